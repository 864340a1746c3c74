#include "amdkd/autodiff.hpp"

#include <cmath>
#include <stdexcept>

namespace amdkd::ad {

int Tape::push(Node n) {
    nodes_.push_back(std::move(n));
    return static_cast<int>(nodes_.size()) - 1;
}

int Tape::leaf(Mat v) {
    Node n;
    n.op = Op::Leaf;
    n.value = std::move(v);
    return push(std::move(n));
}

int Tape::matmul(int a, int b) {
    Node n;
    n.op = Op::MatMul;
    n.a = a;
    n.b = b;
    n.value = val(a) * val(b);
    return push(std::move(n));
}

int Tape::matmul_nt(int a, int b) {
    Node n;
    n.op = Op::MatMulNT;
    n.a = a;
    n.b = b;
    n.value = val(a) * val(b).transpose();
    return push(std::move(n));
}

int Tape::add(int a, int b) {
    Node n;
    n.op = Op::Add;
    n.a = a;
    n.b = b;
    n.value = val(a) + val(b);
    return push(std::move(n));
}

int Tape::sub(int a, int b) {
    Node n;
    n.op = Op::Sub;
    n.a = a;
    n.b = b;
    n.value = val(a) - val(b);
    return push(std::move(n));
}

int Tape::hadamard(int a, int b) {
    Node n;
    n.op = Op::Hadamard;
    n.a = a;
    n.b = b;
    n.value = val(a).cwiseProduct(val(b));
    return push(std::move(n));
}

int Tape::add_row(int a, int r) {
    Node n;
    n.op = Op::AddRow;
    n.a = a;
    n.b = r;
    n.value = val(a).rowwise() + val(r).row(0);
    return push(std::move(n));
}

int Tape::mul_row(int a, int r) {
    Node n;
    n.op = Op::MulRow;
    n.a = a;
    n.b = r;
    n.value = val(a).array().rowwise() * val(r).row(0).array();
    return push(std::move(n));
}

int Tape::scale(int a, double c) {
    Node n;
    n.op = Op::Scale;
    n.a = a;
    n.c = c;
    n.value = c * val(a);
    return push(std::move(n));
}

int Tape::tanh_(int a) {
    Node n;
    n.op = Op::Tanh;
    n.a = a;
    n.value = val(a).array().tanh();
    return push(std::move(n));
}

int Tape::relu(int a) {
    Node n;
    n.op = Op::Relu;
    n.a = a;
    n.value = val(a).cwiseMax(0.0);
    return push(std::move(n));
}

int Tape::col_mean(int a) {
    Node n;
    n.op = Op::ColMean;
    n.a = a;
    n.value = val(a).colwise().mean();
    return push(std::move(n));
}

int Tape::sum(int a) {
    Node n;
    n.op = Op::Sum;
    n.a = a;
    n.value = Mat::Constant(1, 1, val(a).sum());
    return push(std::move(n));
}

int Tape::concat_cols(int a, int b) {
    Node n;
    n.op = Op::ConcatCols;
    n.a = a;
    n.b = b;
    n.value.resize(val(a).rows(), val(a).cols() + val(b).cols());
    n.value << val(a), val(b);
    return push(std::move(n));
}

int Tape::concat_rows(int a, int b) {
    Node n;
    n.op = Op::ConcatRows;
    n.a = a;
    n.b = b;
    n.value.resize(val(a).rows() + val(b).rows(), val(a).cols());
    n.value << val(a), val(b);
    return push(std::move(n));
}

int Tape::row(int a, int i) {
    Node n;
    n.op = Op::Row;
    n.a = a;
    n.i = i;
    n.value = val(a).row(i);
    return push(std::move(n));
}

int Tape::entry(int a, int i, int j) {
    Node n;
    n.op = Op::Entry;
    n.a = a;
    n.i = i;
    n.j = j;
    n.value = Mat::Constant(1, 1, val(a)(i, j));
    return push(std::move(n));
}

int Tape::col_slice(int a, int start, int len) {
    Node n;
    n.op = Op::ColSlice;
    n.a = a;
    n.i = start;
    n.j = len;
    n.value = val(a).middleCols(start, len);
    return push(std::move(n));
}

int Tape::row_softmax(int a) {
    Node n;
    n.op = Op::RowSoftmax;
    n.a = a;
    const Mat& z = val(a);
    n.value.resize(z.rows(), z.cols());
    for (Eigen::Index r = 0; r < z.rows(); ++r) {
        const double m = z.row(r).maxCoeff();
        Eigen::ArrayXd e = (z.row(r).array() - m).exp();
        n.value.row(r) = (e / e.sum()).matrix();
    }
    return push(std::move(n));
}

int Tape::masked_log_softmax(int a, const std::vector<char>& mask) {
    const Mat& z = val(a);
    if (z.rows() != 1 || static_cast<size_t>(z.cols()) != mask.size()) {
        throw std::invalid_argument("masked_log_softmax: shape mismatch");
    }
    Node n;
    n.op = Op::MaskedLogSoftmax;
    n.a = a;
    n.mask = mask;
    double m = -std::numeric_limits<double>::infinity();
    bool any = false;
    for (Eigen::Index j = 0; j < z.cols(); ++j) {
        if (mask[static_cast<size_t>(j)]) {
            m = std::max(m, z(0, j));
            any = true;
        }
    }
    if (!any) throw std::logic_error("masked_log_softmax: all actions masked");
    double denom = 0.0;
    for (Eigen::Index j = 0; j < z.cols(); ++j) {
        if (mask[static_cast<size_t>(j)]) denom += std::exp(z(0, j) - m);
    }
    const double lse = m + std::log(denom);
    n.value = Mat::Constant(1, z.cols(), kNegInf);
    n.aux = Mat::Zero(1, z.cols());  // probabilities
    for (Eigen::Index j = 0; j < z.cols(); ++j) {
        if (mask[static_cast<size_t>(j)]) {
            n.value(0, j) = z(0, j) - lse;
            n.aux(0, j) = std::exp(n.value(0, j));
        }
    }
    return push(std::move(n));
}

int Tape::rsqrt_eps(int a, double eps) {
    Node n;
    n.op = Op::RsqrtEps;
    n.a = a;
    n.c = eps;
    n.value = (val(a).array() + eps).rsqrt();
    return push(std::move(n));
}

void Tape::backward(int node) {
    if (val(node).rows() != 1 || val(node).cols() != 1) {
        throw std::invalid_argument("backward: node is not a scalar");
    }
    for (auto& n : nodes_) n.grad = Mat::Zero(n.value.rows(), n.value.cols());
    nodes_[static_cast<size_t>(node)].grad(0, 0) = 1.0;
    for (int id = node; id >= 0; --id) {
        Node& n = nodes_[static_cast<size_t>(id)];
        if (n.grad.isZero(0.0) && n.op != Op::Leaf) continue;
        const Mat& g = n.grad;
        auto& ga = n.a >= 0 ? nodes_[static_cast<size_t>(n.a)].grad : n.grad;
        switch (n.op) {
            case Op::Leaf:
                break;
            case Op::MatMul:
                ga += g * val(n.b).transpose();
                nodes_[static_cast<size_t>(n.b)].grad += val(n.a).transpose() * g;
                break;
            case Op::MatMulNT:
                ga += g * val(n.b);
                nodes_[static_cast<size_t>(n.b)].grad += g.transpose() * val(n.a);
                break;
            case Op::Add:
                ga += g;
                nodes_[static_cast<size_t>(n.b)].grad += g;
                break;
            case Op::Sub:
                ga += g;
                nodes_[static_cast<size_t>(n.b)].grad -= g;
                break;
            case Op::Hadamard:
                ga += g.cwiseProduct(val(n.b));
                nodes_[static_cast<size_t>(n.b)].grad += g.cwiseProduct(val(n.a));
                break;
            case Op::AddRow:
                ga += g;
                nodes_[static_cast<size_t>(n.b)].grad += g.colwise().sum();
                break;
            case Op::MulRow:
                ga += (g.array().rowwise() * val(n.b).row(0).array()).matrix();
                nodes_[static_cast<size_t>(n.b)].grad += g.cwiseProduct(val(n.a)).colwise().sum();
                break;
            case Op::Scale:
                ga += n.c * g;
                break;
            case Op::Tanh:
                ga += g.cwiseProduct((1.0 - n.value.array().square()).matrix());
                break;
            case Op::Relu:
                ga += (g.array() * (val(n.a).array() > 0.0).cast<double>()).matrix();
                break;
            case Op::ColMean:
                ga += (Mat::Ones(val(n.a).rows(), 1) * g) / static_cast<double>(val(n.a).rows());
                break;
            case Op::Sum:
                ga.array() += g(0, 0);
                break;
            case Op::ConcatCols:
                ga += g.leftCols(val(n.a).cols());
                nodes_[static_cast<size_t>(n.b)].grad += g.rightCols(val(n.b).cols());
                break;
            case Op::ConcatRows:
                ga += g.topRows(val(n.a).rows());
                nodes_[static_cast<size_t>(n.b)].grad += g.bottomRows(val(n.b).rows());
                break;
            case Op::Row:
                ga.row(n.i) += g.row(0);
                break;
            case Op::Entry:
                ga(n.i, n.j) += g(0, 0);
                break;
            case Op::ColSlice:
                ga.middleCols(n.i, n.j) += g;
                break;
            case Op::RowSoftmax: {
                const Mat& p = n.value;
                for (Eigen::Index r = 0; r < g.rows(); ++r) {
                    const double s = g.row(r).dot(p.row(r));
                    ga.row(r) += p.row(r).cwiseProduct(((g.row(r).array() - s).matrix()));
                }
                break;
            }
            case Op::MaskedLogSoftmax: {
                double gsum = 0.0;
                for (Eigen::Index j = 0; j < g.cols(); ++j) {
                    if (n.mask[static_cast<size_t>(j)]) gsum += g(0, j);
                }
                for (Eigen::Index j = 0; j < g.cols(); ++j) {
                    if (n.mask[static_cast<size_t>(j)]) ga(0, j) += g(0, j) - n.aux(0, j) * gsum;
                }
                break;
            }
            case Op::RsqrtEps:
                ga += g.cwiseProduct((-0.5 * n.value.array().cube()).matrix());
                break;
        }
    }
}

}  // namespace amdkd::ad
