#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numeric>
#include <set>

#include "amdkd/instancegen.hpp"
#include "amdkd/policy.hpp"

using namespace amdkd;

namespace {

ArchSpec tiny_arch(ProblemKind kind, int dim = 8) {
    ArchSpec a;
    a.embed_dim = dim;
    a.n_heads = 2;
    a.n_layers = 2;
    a.kind = kind;
    return a;
}

PolicyParams random_params(const ArchSpec& arch, uint64_t seed) {
    RngStream rng(seed);
    return PolicyParams::init(arch, rng);
}

Instance random_instance(ProblemKind kind, int n, uint64_t seed) {
    DistributionSpec spec;
    return make_instance(spec, kind, n, seed);
}

double total_logp_of(const Instance& inst, const std::vector<int>& seq, const PolicyParams& p) {
    Tour t{seq, 0.0};
    return score_tour(inst, t, p).total_logp;
}

}  // namespace

TEST_CASE("encode: permutation equivariance and duplicate-node invariance") {
    const auto arch = tiny_arch(ProblemKind::TSP);
    const auto params = random_params(arch, 3);
    auto inst = random_instance(ProblemKind::TSP, 6, 10);
    const Mat h = encode(inst, params);
    REQUIRE(h.rows() == 6);
    REQUIRE(h.cols() == arch.embed_dim);

    // Reverse the nodes: embeddings must follow the permutation exactly.
    Instance rev = inst;
    std::reverse(rev.coords.begin(), rev.coords.end());
    const Mat hr = encode(rev, params);
    for (int i = 0; i < 6; ++i) {
        CHECK((h.row(i) - hr.row(5 - i)).cwiseAbs().maxCoeff() < 1e-9);
    }

    Instance dup = inst;
    dup.coords[3] = dup.coords[1];
    const Mat hd = encode(dup, params);
    CHECK((hd.row(3) - hd.row(1)).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("decode_step: masked entries are exactly zero and the rest sum to 1") {
    const auto params = random_params(tiny_arch(ProblemKind::CVRP), 5);
    const auto inst = random_instance(ProblemKind::CVRP, 6, 11);
    auto state = initial_state(inst);
    while (!state.done) {
        const auto mask = feasible_mask(state, inst);
        const Eigen::VectorXd dist = decode_step(state, inst, params);
        double sum = 0.0;
        int action = -1;
        for (int j = 0; j < dist.size(); ++j) {
            if (!mask[static_cast<size_t>(j)]) {
                CHECK(dist(j) == 0.0);
            } else {
                CHECK(dist(j) >= 0.0);
                sum += dist(j);
                if (action < 0 || dist(j) > dist(action)) action = j;
            }
        }
        CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
        env_step(state, action, inst);
    }
}

TEST_CASE("decode_step: a single feasible action receives probability 1") {
    const auto params = random_params(tiny_arch(ProblemKind::TSP), 6);
    Instance inst = random_instance(ProblemKind::TSP, 3, 12);
    auto state = initial_state(inst);
    env_step(state, 0, inst);
    env_step(state, 2, inst);
    const auto dist = decode_step(state, inst, params);
    CHECK(dist(1) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("rollout: greedy is deterministic, sampling is feasible") {
    const auto params = random_params(tiny_arch(ProblemKind::TSP), 7);
    const auto inst = random_instance(ProblemKind::TSP, 8, 13);
    const auto a = rollout(inst, params, DecodeMode::Greedy, nullptr);
    const auto b = rollout(inst, params, DecodeMode::Greedy, nullptr);
    CHECK(a.tour.sequence == b.tour.sequence);
    CHECK(a.tour.length == b.tour.length);

    RngStream rng(99);
    for (int rep = 0; rep < 50; ++rep) {
        const auto s = rollout(inst, params, DecodeMode::Sample, &rng);
        CHECK(!validate_tour(inst, s.tour).has_value());
    }
}

TEST_CASE("rollout_multistart forces distinct first actions") {
    const auto params = random_params(tiny_arch(ProblemKind::TSP), 8);
    const auto inst = random_instance(ProblemKind::TSP, 8, 14);
    RngStream rng(5);
    const auto traces = rollout_multistart(inst, params, 8, DecodeMode::Sample, &rng);
    REQUIRE(traces.size() == 8);
    std::set<int> firsts;
    for (const auto& t : traces) {
        firsts.insert(t.tour.sequence.front());
        CHECK(!validate_tour(inst, t.tour).has_value());
    }
    CHECK(firsts.size() == 8);
}

TEST_CASE("score_tour is self-consistent with rollout log-probs") {
    for (auto kind : {ProblemKind::TSP, ProblemKind::CVRP}) {
        const auto params = random_params(tiny_arch(kind), 9);
        const auto inst = random_instance(kind, 6, 15);
        RngStream rng(3);
        const auto trace = rollout(inst, params, DecodeMode::Sample, &rng);
        const auto score = score_tour(inst, trace.tour, params);
        CHECK(std::abs(score.total_logp - trace.total_logp) < 1e-9);
        REQUIRE(score.step_logp.size() == trace.step_logp.size());
        for (size_t i = 0; i < score.step_logp.size(); ++i) {
            CHECK(std::abs(score.step_logp[i] - trace.step_logp[i]) < 1e-9);
        }
    }
}

TEST_CASE("tour probabilities sum to 1 over all permutations (n=5)") {
    const auto params = random_params(tiny_arch(ProblemKind::TSP), 10);
    const auto inst = random_instance(ProblemKind::TSP, 5, 16);
    std::vector<int> perm{0, 1, 2, 3, 4};
    double total = 0.0;
    std::sort(perm.begin(), perm.end());
    do {
        total += std::exp(total_logp_of(inst, perm, params));
    } while (std::next_permutation(perm.begin(), perm.end()));
    CHECK(total == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("grad_log_prob: unused problem-kind tensors get exactly zero gradient") {
    const auto params = random_params(tiny_arch(ProblemKind::TSP), 11);
    const auto inst = random_instance(ProblemKind::TSP, 5, 17);
    const auto trace = rollout(inst, params, DecodeMode::Greedy, nullptr);
    const auto grads = grad_log_prob(inst, trace.tour, params);
    CHECK(grads.at("embed_cust.W").cwiseAbs().maxCoeff() == 0.0);
    CHECK(grads.at("embed_depot.W").cwiseAbs().maxCoeff() == 0.0);
    CHECK(grads.at("dec.Wctx_cvrp").cwiseAbs().maxCoeff() == 0.0);
    CHECK(grads.at("embed_node.W").cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("grad_log_prob matches central finite differences (spot check)") {
    const auto arch = tiny_arch(ProblemKind::TSP);
    auto params = random_params(arch, 12);
    const auto inst = random_instance(ProblemKind::TSP, 5, 18);
    const auto trace = rollout(inst, params, DecodeMode::Greedy, nullptr);
    const auto grads = grad_log_prob(inst, trace.tour, params);
    const double h = 1e-5;
    RngStream pick(4);
    for (const auto& [name, g] : grads) {
        if (g.size() == 0) continue;
        const int i = pick.uniform_int(0, static_cast<int>(g.rows()) - 1);
        const int j = pick.uniform_int(0, static_cast<int>(g.cols()) - 1);
        const double orig = params.tensors[name](i, j);
        params.tensors[name](i, j) = orig + h;
        const double up = total_logp_of(inst, trace.tour.sequence, params);
        params.tensors[name](i, j) = orig - h;
        const double dn = total_logp_of(inst, trace.tour.sequence, params);
        params.tensors[name](i, j) = orig;
        const double fd = (up - dn) / (2.0 * h);
        // The 1e-6 floor keeps central-difference roundoff (~1e-11) from
        // registering as relative error on near-zero gradient entries.
        const double denom = std::max({std::abs(fd), std::abs(g(i, j)), 1e-6});
        CHECK(std::abs(fd - g(i, j)) / denom < 1e-4);
    }
}

TEST_CASE("parameter counts: halving dims keeps the non-input ratio under 0.5") {
    for (auto kind : {ProblemKind::TSP, ProblemKind::CVRP}) {
        ArchSpec teacher;
        teacher.kind = kind;
        teacher.embed_dim = 32;
        ArchSpec student = teacher;
        student.embed_dim = 16;
        CHECK(teacher.param_count() > 0);
        CHECK(student.param_count() < teacher.param_count());
        const double ratio = static_cast<double>(student.param_count_excluding_input()) /
                             static_cast<double>(teacher.param_count_excluding_input());
        CHECK(ratio < 0.5);
    }
}

TEST_CASE("ArchSpec rejects indivisible head splits") {
    ArchSpec bad;
    bad.embed_dim = 10;
    bad.n_heads = 4;
    CHECK_THROWS(bad.validate());
}

TEST_CASE("checkpoint round-trip is bit exact and shape-checked") {
    namespace fs = std::filesystem;
    const auto params = random_params(tiny_arch(ProblemKind::CVRP, 8), 13);
    const auto path = (fs::temp_directory_path() / "amdkd_test_ckpt.bin").string();
    AdamState adam;
    adam.m = zero_grads(params.arch);
    adam.v = zero_grads(params.arch);
    adam.t = 7;
    save_checkpoint(path, params, &adam);
    AdamState loaded_adam;
    const auto loaded = load_checkpoint(path, &loaded_adam);
    CHECK(loaded.arch == params.arch);
    CHECK(loaded_adam.t == 7);
    for (const auto& [name, t] : params.tensors) {
        CHECK((t - loaded.tensors.at(name)).cwiseAbs().maxCoeff() == 0.0);
    }
    fs::remove(path);
    CHECK_THROWS(load_checkpoint(path + ".missing"));
}

TEST_CASE("greedy augment-8 never loses to plain greedy") {
    const auto params = random_params(tiny_arch(ProblemKind::TSP), 14);
    for (uint64_t seed = 0; seed < 10; ++seed) {
        const auto inst = random_instance(ProblemKind::TSP, 10, seed);
        CHECK(greedy_aug8_length(inst, params) <= greedy_length(inst, params) + 1e-9);
    }
}

TEST_CASE("Adam update with clipping moves parameters and stays finite") {
    auto params = random_params(tiny_arch(ProblemKind::TSP), 15);
    const auto before = params.tensors.at("embed_node.W");
    const auto inst = random_instance(ProblemKind::TSP, 5, 20);
    const auto trace = rollout(inst, params, DecodeMode::Greedy, nullptr);
    auto grads = grad_log_prob(inst, trace.tour, params);
    AdamState adam;
    adam.update(params, grads, 1e-2);
    CHECK(params.finite());
    CHECK((params.tensors.at("embed_node.W") - before).cwiseAbs().maxCoeff() > 0.0);
}
