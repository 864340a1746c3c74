#pragma once

#include <map>
#include <string>
#include <vector>

#include "amdkd/autodiff.hpp"
#include "amdkd/problems.hpp"
#include "amdkd/rng.hpp"

namespace amdkd {

using ad::Mat;
using GradMap = std::map<std::string, Mat>;

// Attention encoder-decoder construction policy at configurable (toy)
// dimensions. Teacher default embed_dim 32, student 16.
struct ArchSpec {
    int embed_dim = 32;
    int n_heads = 4;
    int n_layers = 2;
    int ff_dim = 0;  // 0 -> 4 * embed_dim
    ProblemKind kind = ProblemKind::TSP;

    int ff() const { return ff_dim > 0 ? ff_dim : 4 * embed_dim; }
    int head_dim() const { return embed_dim / n_heads; }
    void validate() const;

    struct TensorShape {
        std::string name;
        int rows;
        int cols;
    };
    // All named tensors, including the input projections of both problem
    // kinds; only the ones matching `kind` participate in the forward pass.
    std::vector<TensorShape> shapes() const;
    long param_count() const;                  // tensors used by `kind`
    long param_count_excluding_input() const;  // minus the input projections

    bool operator==(const ArchSpec&) const = default;
};

struct PolicyParams {
    ArchSpec arch;
    std::map<std::string, Mat> tensors;

    static PolicyParams init(const ArchSpec& arch, RngStream& rng);
    bool finite() const;
};

struct RolloutTrace {
    Tour tour;
    std::vector<double> step_logp;
    std::vector<Eigen::VectorXd> step_dist;  // retained when requested
    double total_logp = 0.0;
};

enum class DecodeMode { Greedy, Sample };

constexpr double kLogitClip = 10.0;
constexpr double kNormEps = 1e-5;

// One tape per (instance, params): the encoder is built once, decode steps
// append to the shared graph so a single backward covers a whole rollout
// batch on this instance.
class TapedPolicy {
public:
    TapedPolicy(const Instance& inst, const PolicyParams& params);

    // Appends one decode step for `state`, returns the 1 x n log-prob row id.
    int step_logp_row(const ConstructionState& state);

    struct Replay {
        std::vector<int> logp_rows;
        int total_node = -1;
        std::vector<double> step_logp;
        double total_logp = 0.0;
    };
    Replay replay(const Tour& tour);

    ad::Tape& tape() { return tape_; }
    const Instance& instance() const { return inst_; }
    int embeddings_node() const { return h_; }

    void backward(int node) { tape_.backward(node); }
    Mat grad(const std::string& tensor) const;

private:
    void build_encoder();
    int instance_norm(int x, const std::string& prefix);

    const Instance& inst_;
    const PolicyParams& params_;
    ad::Tape tape_;
    std::map<std::string, int> leaves_;
    int h_ = -1;      // node embeddings, n x D
    int hmean_ = -1;  // graph embedding, 1 x D
    int kptr_ = -1;   // pointer keys, n x D
};

// Embeddings only (values); used by tests for equivariance checks.
Mat encode(const Instance& inst, const PolicyParams& params);

// One masked action distribution (values) for the given state.
Eigen::VectorXd decode_step(const ConstructionState& state, const Instance& inst,
                            const PolicyParams& params);

RolloutTrace rollout(const Instance& inst, const PolicyParams& params, DecodeMode mode,
                     RngStream* rng, bool keep_dists = false);

// POMO-style: one rollout per distinct forced first action.
std::vector<RolloutTrace> rollout_multistart(const Instance& inst, const PolicyParams& params,
                                             int n_starts, DecodeMode mode, RngStream* rng,
                                             bool keep_dists = false);

struct ScoreResult {
    std::vector<Eigen::VectorXd> step_dist;
    std::vector<double> step_logp;
    double total_logp = 0.0;
};
ScoreResult score_tour(const Instance& inst, const Tour& tour, const PolicyParams& params);

GradMap grad_log_prob(const Instance& inst, const Tour& tour, const PolicyParams& params);

// Greedy decode helpers used throughout evaluation.
double greedy_length(const Instance& inst, const PolicyParams& params);
double greedy_aug8_length(const Instance& inst, const PolicyParams& params);

// Checkpoint container: versioned header + named little-endian f64 tensors.
struct AdamState;
void save_checkpoint(const std::string& path, const PolicyParams& params,
                     const AdamState* moments = nullptr);
PolicyParams load_checkpoint(const std::string& path, AdamState* moments = nullptr);

struct AdamState {
    std::map<std::string, Mat> m;
    std::map<std::string, Mat> v;
    long t = 0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;

    // Descends `grads` with gradient clipping at global norm 1.
    void update(PolicyParams& params, const GradMap& grads, double lr);
};

void accumulate(GradMap& into, const GradMap& add, double scale = 1.0);
GradMap zero_grads(const ArchSpec& arch);

}  // namespace amdkd
