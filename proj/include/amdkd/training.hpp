#pragma once

#include <functional>
#include <vector>

#include "amdkd/instancegen.hpp"
#include "amdkd/policy.hpp"

namespace amdkd {

enum class BaselineMode { SharedMultistart, GreedyRollout };

struct TrainConfig {
    DistributionSpec distribution;
    ProblemKind problem = ProblemKind::TSP;
    int n_nodes = 20;
    int epochs = 10;
    int steps_per_epoch = 50;
    int batch_size = 16;
    double learning_rate = 1e-4;
    BaselineMode baseline = BaselineMode::SharedMultistart;
    int num_starts = 8;  // multistart rollouts per instance
    uint64_t seed = 0;
    ArchSpec arch;

    void validate() const;
};

struct StepStats {
    double mean_length = 0.0;
    double surrogate_loss = 0.0;
};

// One REINFORCE update over a batch of instances. `baseline_params` is the
// frozen policy for BaselineMode::GreedyRollout, ignored otherwise.
StepStats reinforce_step(PolicyParams& params, AdamState& adam,
                         const std::vector<Instance>& batch, const TrainConfig& cfg,
                         RngStream& rng, const PolicyParams* baseline_params = nullptr);

struct TrainLogRow {
    int epoch = 0;
    int step = 0;
    double mean_length = 0.0;
};

struct TrainResult {
    PolicyParams params;
    std::vector<TrainLogRow> log;
    std::vector<double> epoch_mean_length;
};

TrainResult train_teacher(const TrainConfig& cfg,
                          const std::function<void(const TrainLogRow&)>& on_step = nullptr);

// Shared pieces reused by the distillation loop.
std::vector<Instance> sample_batch(const DistributionSpec& spec, ProblemKind problem, int n_nodes,
                                   int batch_size, RngStream& rng);

}  // namespace amdkd
