#include "amdkd/training.hpp"

#include <cmath>
#include <stdexcept>

namespace amdkd {

void TrainConfig::validate() const {
    if (n_nodes < 2 || epochs < 1 || steps_per_epoch < 1 || batch_size < 1 || num_starts < 1) {
        throw std::invalid_argument("TrainConfig: all sizes must be positive");
    }
    if (learning_rate <= 0.0) throw std::invalid_argument("TrainConfig: learning_rate must be > 0");
}

std::vector<Instance> sample_batch(const DistributionSpec& spec, ProblemKind problem, int n_nodes,
                                   int batch_size, RngStream& rng) {
    std::vector<Instance> batch;
    batch.reserve(static_cast<size_t>(batch_size));
    for (int i = 0; i < batch_size; ++i) {
        batch.push_back(make_instance(spec, problem, n_nodes, rng.next_u64()));
    }
    return batch;
}

StepStats reinforce_step(PolicyParams& params, AdamState& adam,
                         const std::vector<Instance>& batch, const TrainConfig& cfg,
                         RngStream& rng, const PolicyParams* baseline_params) {
    if (batch.empty()) throw std::invalid_argument("reinforce_step: empty batch");
    GradMap grads = zero_grads(params.arch);
    double length_sum = 0.0;
    double surrogate_sum = 0.0;
    long rollouts = 0;
    for (const auto& inst : batch) {
        TapedPolicy tp(inst, params);
        std::vector<TapedPolicy::Replay> replays;
        std::vector<double> lengths;
        if (cfg.baseline == BaselineMode::SharedMultistart) {
            // POMO-style: k rollouts with distinct first actions share their
            // mean length as the baseline.
            const auto mask0 = feasible_mask(initial_state(inst), inst);
            std::vector<int> firsts;
            for (int j = 0; j < inst.size() && static_cast<int>(firsts.size()) < cfg.num_starts; ++j) {
                if (mask0[static_cast<size_t>(j)]) firsts.push_back(j);
            }
            for (int f : firsts) {
                ConstructionState state = initial_state(inst);
                TapedPolicy::Replay rep;
                bool first = true;
                while (!state.done) {
                    const int row = tp.step_logp_row(state);
                    const Mat& logp = tp.tape().val(row);
                    int action;
                    if (first) {
                        action = f;
                    } else {
                        const double u = rng.uniform();
                        double acc = 0.0;
                        action = -1;
                        for (Eigen::Index j = 0; j < logp.cols(); ++j) {
                            if (logp(0, j) <= ad::kNegInf) continue;
                            action = static_cast<int>(j);
                            acc += std::exp(logp(0, j));
                            if (u < acc) break;
                        }
                    }
                    const int picked = tp.tape().entry(row, 0, action);
                    rep.total_node = rep.total_node < 0 ? picked : tp.tape().add(rep.total_node, picked);
                    rep.total_logp += tp.tape().val(picked)(0, 0);
                    env_step(state, action, inst);
                    first = false;
                }
                lengths.push_back(finish_tour(inst, state).length);
                replays.push_back(rep);
            }
        } else {
            if (!baseline_params) throw std::invalid_argument("GreedyRollout baseline requires baseline params");
            auto trace = rollout(inst, params, DecodeMode::Sample, &rng);
            // re-score on the shared tape so gradients flow
            replays.push_back(tp.replay(trace.tour));
            lengths.push_back(trace.tour.length);
        }
        double baseline;
        if (cfg.baseline == BaselineMode::SharedMultistart) {
            baseline = 0.0;
            for (double l : lengths) baseline += l;
            baseline /= static_cast<double>(lengths.size());
        } else {
            baseline = greedy_length(inst, *baseline_params);
        }
        int surrogate = -1;
        for (size_t i = 0; i < replays.size(); ++i) {
            const double adv = lengths[i] - baseline;
            length_sum += lengths[i];
            ++rollouts;
            surrogate_sum += adv * replays[i].total_logp;
            const int term = tp.tape().scale(replays[i].total_node, adv);
            surrogate = surrogate < 0 ? term : tp.tape().add(surrogate, term);
        }
        const int loss = tp.tape().scale(surrogate, 1.0 / static_cast<double>(replays.size()));
        if (!std::isfinite(tp.tape().val(loss)(0, 0))) {
            throw std::runtime_error("reinforce_step: non-finite surrogate loss");
        }
        tp.backward(loss);
        for (auto& [name, g] : grads) {
            g += tp.grad(name);
        }
    }
    for (auto& [name, g] : grads) {
        (void)name;
        g /= static_cast<double>(batch.size());
    }
    adam.update(params, grads, cfg.learning_rate);
    StepStats st;
    st.mean_length = length_sum / static_cast<double>(rollouts);
    st.surrogate_loss = surrogate_sum / static_cast<double>(rollouts * static_cast<long>(batch.size()));
    return st;
}

TrainResult train_teacher(const TrainConfig& cfg,
                          const std::function<void(const TrainLogRow&)>& on_step) {
    cfg.validate();
    RngStream master(cfg.seed);
    RngStream init_rng = master.derive(1);
    RngStream gen_rng = master.derive(2);
    RngStream rollout_rng = master.derive(3);
    TrainResult res;
    res.params = PolicyParams::init(cfg.arch, init_rng);
    AdamState adam;
    PolicyParams baseline_copy = res.params;
    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        double epoch_sum = 0.0;
        for (int step = 1; step <= cfg.steps_per_epoch; ++step) {
            auto batch = sample_batch(cfg.distribution, cfg.problem, cfg.n_nodes, cfg.batch_size, gen_rng);
            const auto stats = reinforce_step(res.params, adam, batch, cfg, rollout_rng,
                                              cfg.baseline == BaselineMode::GreedyRollout ? &baseline_copy : nullptr);
            epoch_sum += stats.mean_length;
            TrainLogRow row{epoch, step, stats.mean_length};
            res.log.push_back(row);
            if (on_step) on_step(row);
        }
        res.epoch_mean_length.push_back(epoch_sum / cfg.steps_per_epoch);
        if (cfg.baseline == BaselineMode::GreedyRollout) {
            baseline_copy = res.params;  // unconditional refresh each epoch
        }
    }
    return res;
}

}  // namespace amdkd
