#pragma once

#include <Eigen/Dense>
#include <vector>

namespace amdkd::ad {

using Mat = Eigen::MatrixXd;

// Value used for masked-out log-probabilities; exp() underflows to 0.
constexpr double kNegInf = -1e30;

// A small reverse-mode tape over dense double matrices. Internal machinery
// behind grad_log_prob; the policy composes its forward pass from these
// primitives and calls backward() on a scalar node.
class Tape {
public:
    int leaf(Mat v);

    int matmul(int a, int b);     // A * B
    int matmul_nt(int a, int b);  // A * B^T
    int add(int a, int b);
    int sub(int a, int b);
    int hadamard(int a, int b);
    int add_row(int a, int r);  // broadcast 1 x c row over rows of A
    int mul_row(int a, int r);
    int scale(int a, double c);
    int tanh_(int a);
    int relu(int a);
    int col_mean(int a);  // n x c -> 1 x c
    int sum(int a);       // -> 1 x 1
    int concat_cols(int a, int b);
    int concat_rows(int a, int b);
    int row(int a, int i);             // -> 1 x c
    int entry(int a, int i, int j);    // -> 1 x 1
    int col_slice(int a, int start, int len);
    int row_softmax(int a);  // softmax over each row
    // 1 x n logits -> 1 x n log-probabilities over feasible entries;
    // masked entries take the value kNegInf and receive zero gradient.
    int masked_log_softmax(int a, const std::vector<char>& mask);
    int rsqrt_eps(int a, double eps);  // elementwise (x + eps)^(-1/2)

    const Mat& val(int id) const { return nodes_[static_cast<size_t>(id)].value; }
    const Mat& grad(int id) const { return nodes_[static_cast<size_t>(id)].grad; }

    // Seeds d(scalar node)/d(scalar node) = 1 and propagates to all leaves.
    void backward(int node);

    size_t size() const { return nodes_.size(); }

private:
    enum class Op {
        Leaf, MatMul, MatMulNT, Add, Sub, Hadamard, AddRow, MulRow, Scale, Tanh, Relu,
        ColMean, Sum, ConcatCols, ConcatRows, Row, Entry, ColSlice, RowSoftmax,
        MaskedLogSoftmax, RsqrtEps
    };
    struct Node {
        Op op = Op::Leaf;
        int a = -1;
        int b = -1;
        double c = 0.0;
        int i = 0;
        int j = 0;
        Mat value;
        Mat grad;
        Mat aux;  // softmax probabilities, etc.
        std::vector<char> mask;
    };
    int push(Node n);
    std::vector<Node> nodes_;
};

}  // namespace amdkd::ad
