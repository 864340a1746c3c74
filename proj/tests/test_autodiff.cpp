#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <functional>

#include "amdkd/autodiff.hpp"
#include "amdkd/rng.hpp"

using namespace amdkd;
using ad::Mat;

namespace {

Mat random_mat(int r, int c, RngStream& rng) {
    Mat m(r, c);
    for (int i = 0; i < r; ++i) {
        for (int j = 0; j < c; ++j) m(i, j) = rng.normal(0.0, 1.0);
    }
    return m;
}

// Central finite differences of a scalar-valued graph w.r.t. one leaf.
Mat fd_grad(const std::function<double(const std::vector<Mat>&)>& f, std::vector<Mat> leaves,
            size_t which, double h = 1e-6) {
    Mat g = Mat::Zero(leaves[which].rows(), leaves[which].cols());
    for (int i = 0; i < g.rows(); ++i) {
        for (int j = 0; j < g.cols(); ++j) {
            const double orig = leaves[which](i, j);
            leaves[which](i, j) = orig + h;
            const double up = f(leaves);
            leaves[which](i, j) = orig - h;
            const double dn = f(leaves);
            leaves[which](i, j) = orig;
            g(i, j) = (up - dn) / (2.0 * h);
        }
    }
    return g;
}

double max_rel_err(const Mat& a, const Mat& b) {
    double worst = 0.0;
    for (int i = 0; i < a.rows(); ++i) {
        for (int j = 0; j < a.cols(); ++j) {
            const double denom = std::max({std::abs(a(i, j)), std::abs(b(i, j)), 1e-8});
            worst = std::max(worst, std::abs(a(i, j) - b(i, j)) / denom);
        }
    }
    return worst;
}

}  // namespace

TEST_CASE("dense op chain matches finite differences") {
    RngStream rng(1);
    for (int rep = 0; rep < 5; ++rep) {
        std::vector<Mat> leaves = {random_mat(4, 3, rng), random_mat(5, 3, rng), random_mat(1, 5, rng)};
        auto f = [](const std::vector<Mat>& L) {
            ad::Tape t;
            const int a = t.leaf(L[0]);
            const int b = t.leaf(L[1]);
            const int r = t.leaf(L[2]);
            const int mm = t.matmul_nt(a, b);            // 4 x 5
            const int biased = t.add_row(mm, r);         // broadcast row
            const int act = t.tanh_(biased);
            const int rl = t.relu(t.scale(biased, 0.5));
            const int both = t.add(act, rl);
            const int pooled = t.col_mean(both);         // 1 x 5
            const int soft = t.row_softmax(pooled);
            const int mixed = t.hadamard(soft, t.rsqrt_eps(t.relu(pooled), 1e-5));
            return t.val(t.sum(mixed))(0, 0);
        };
        ad::Tape t;
        const int a = t.leaf(leaves[0]);
        const int b = t.leaf(leaves[1]);
        const int r = t.leaf(leaves[2]);
        const int mm = t.matmul_nt(a, b);
        const int biased = t.add_row(mm, r);
        const int act = t.tanh_(biased);
        const int rl = t.relu(t.scale(biased, 0.5));
        const int both = t.add(act, rl);
        const int pooled = t.col_mean(both);
        const int soft = t.row_softmax(pooled);
        const int mixed = t.hadamard(soft, t.rsqrt_eps(t.relu(pooled), 1e-5));
        const int out = t.sum(mixed);
        t.backward(out);
        CHECK(max_rel_err(t.grad(a), fd_grad(f, leaves, 0)) < 1e-4);
        CHECK(max_rel_err(t.grad(b), fd_grad(f, leaves, 1)) < 1e-4);
        CHECK(max_rel_err(t.grad(r), fd_grad(f, leaves, 2)) < 1e-4);
    }
}

TEST_CASE("structural ops (concat/slice/row/entry) route gradients correctly") {
    RngStream rng(2);
    std::vector<Mat> leaves = {random_mat(3, 4, rng), random_mat(3, 2, rng), random_mat(2, 6, rng)};
    auto build = [](ad::Tape& t, const std::vector<Mat>& L) {
        const int a = t.leaf(L[0]);
        const int b = t.leaf(L[1]);
        const int c = t.leaf(L[2]);
        const int cc = t.concat_cols(a, b);   // 3 x 6
        const int rr = t.concat_rows(cc, c);  // 5 x 6
        const int sl = t.col_slice(rr, 1, 3); // 5 x 3
        const int r1 = t.row(sl, 2);          // 1 x 3
        const int sub = t.sub(r1, t.row(sl, 4));
        const int mr = t.mul_row(sl, sub);
        const int e = t.entry(mr, 1, 1);
        return t.add(e, t.sum(mr));
    };
    auto f = [&](const std::vector<Mat>& L) {
        ad::Tape t;
        return t.val(build(t, L))(0, 0);
    };
    ad::Tape t;
    const int out = build(t, leaves);
    t.backward(out);
    for (size_t k = 0; k < leaves.size(); ++k) {
        CHECK(max_rel_err(t.grad(static_cast<int>(k)), fd_grad(f, leaves, k)) < 1e-4);
    }
}

TEST_CASE("masked_log_softmax: normalization, masking, gradients") {
    RngStream rng(3);
    Mat logits = random_mat(1, 6, rng);
    std::vector<char> mask = {1, 0, 1, 1, 0, 1};

    ad::Tape t;
    const int a = t.leaf(logits);
    const int lp = t.masked_log_softmax(a, mask);
    const Mat& v = t.val(lp);
    double sum = 0.0;
    for (int j = 0; j < 6; ++j) {
        if (mask[static_cast<size_t>(j)]) {
            sum += std::exp(v(0, j));
        } else {
            CHECK(v(0, j) == ad::kNegInf);
            CHECK(std::exp(v(0, j)) == 0.0);
        }
    }
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));

    // Gradient of one selected log-prob vs finite differences.
    const int picked = t.entry(lp, 0, 3);
    t.backward(picked);
    auto f = [&mask](const std::vector<Mat>& L) {
        ad::Tape tt;
        const int aa = tt.leaf(L[0]);
        const int l = tt.masked_log_softmax(aa, mask);
        return tt.val(tt.entry(l, 0, 3))(0, 0);
    };
    const Mat fd = fd_grad(f, {logits}, 0);
    CHECK(max_rel_err(t.grad(a), fd) < 1e-4);
    // Masked logits receive no gradient.
    CHECK(t.grad(a)(0, 1) == 0.0);
    CHECK(t.grad(a)(0, 4) == 0.0);
}

TEST_CASE("backward accumulates over shared subexpressions") {
    Mat x(1, 1);
    x << 1.7;
    ad::Tape t;
    const int a = t.leaf(x);
    const int sq = t.hadamard(a, a);
    const int out = t.add(sq, t.scale(a, 3.0));  // x^2 + 3x
    t.backward(out);
    CHECK(t.grad(a)(0, 0) == doctest::Approx(2.0 * 1.7 + 3.0).epsilon(1e-12));
}
