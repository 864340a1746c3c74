#include "amdkd/distill.hpp"

#include <chrono>
#include <cmath>
#include <stdexcept>

namespace amdkd {

namespace {

constexpr double kLogFloor = 1e-12;

uint64_t fnv1a(uint64_t h, const void* data, size_t len) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (size_t i = 0; i < len; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ULL;
    }
    return h;
}

}  // namespace

void DistillConfig::validate() const {
    if (teachers.empty()) throw std::invalid_argument("DistillConfig: empty teacher set");
    if (alpha < 0.0 || alpha > 1.0) throw std::invalid_argument("DistillConfig: alpha must be in [0,1]");
    if (adaptive_start > epochs + 1) throw std::invalid_argument("DistillConfig: adaptive_start > epochs");
    if (validation_size < 1) throw std::invalid_argument("DistillConfig: validation_size must be >= 1");
    for (const auto& t : teachers) {
        if (t.params.arch.kind != problem) {
            throw std::invalid_argument("DistillConfig: teacher problem kind mismatch");
        }
    }
    if (student_arch.kind != problem) throw std::invalid_argument("DistillConfig: student problem kind mismatch");
}

ValidationSet build_validation_set(const DistributionSpec& dist, ProblemKind problem, int n_nodes,
                                   int count, uint64_t seed) {
    ValidationSet vs;
    vs.distribution = dist;
    RngStream rng(seed);
    for (int i = 0; i < count; ++i) {
        vs.instances.push_back(make_instance(dist, problem, n_nodes, rng.next_u64()));
        vs.reference_lengths.push_back(solve_reference(vs.instances.back()).tour.length);
    }
    vs.content_hash = validation_hash(vs);
    return vs;
}

uint64_t validation_hash(const ValidationSet& vs) {
    uint64_t h = 0xcbf29ce484222325ULL;
    for (const auto& inst : vs.instances) {
        for (const auto& p : inst.coords) {
            h = fnv1a(h, &p.x, sizeof(double));
            h = fnv1a(h, &p.y, sizeof(double));
        }
        for (int d : inst.demands) h = fnv1a(h, &d, sizeof(int));
        h = fnv1a(h, &inst.capacity, sizeof(int));
    }
    for (double r : vs.reference_lengths) h = fnv1a(h, &r, sizeof(double));
    return h;
}

double avg_gap(const PolicyParams& params, const ValidationSet& vs, bool augment8_best) {
    if (vs.instances.empty()) throw std::invalid_argument("avg_gap: empty validation set");
    double sum = 0.0;
    for (size_t i = 0; i < vs.instances.size(); ++i) {
        const double len = augment8_best ? greedy_aug8_length(vs.instances[i], params)
                                         : greedy_length(vs.instances[i], params);
        sum += (len - vs.reference_lengths[i]) / vs.reference_lengths[i];
    }
    return sum / static_cast<double>(vs.instances.size());
}

std::vector<double> adaptive_probs(const std::vector<double>& gaps, int epoch,
                                   const DistillConfig& cfg) {
    const size_t k = gaps.size();
    std::vector<double> probs(k, 1.0 / static_cast<double>(k));
    if (epoch < cfg.adaptive_start || cfg.force_uniform) return probs;
    // Softmax over gaps in percentage points; larger gap, more attention.
    double mx = -std::numeric_limits<double>::infinity();
    for (double g : gaps) {
        if (!std::isfinite(g)) throw std::invalid_argument("adaptive_probs: non-finite gap");
        mx = std::max(mx, g * 100.0);
    }
    double denom = 0.0;
    for (size_t i = 0; i < k; ++i) {
        probs[i] = std::exp(gaps[i] * 100.0 - mx);
        denom += probs[i];
    }
    for (auto& p : probs) p /= denom;
    return probs;
}

double step_kl(const Eigen::VectorXd& p_teacher, const Eigen::RowVectorXd& log_p_student) {
    double kl = 0.0;
    for (Eigen::Index a = 0; a < p_teacher.size(); ++a) {
        if (p_teacher(a) > 0.0) {
            kl += p_teacher(a) * (std::log(std::max(p_teacher(a), kLogFloor)) - log_p_student(a));
        }
    }
    return kl;
}

namespace {

// Builds the distillation surrogate for one tour on the student's tape and
// returns (node id, loss value). The node omits the teacher-entropy
// constant, which does not affect gradients.
struct KdPiece {
    int node = -1;
    double loss = 0.0;
};

KdPiece kd_surrogate(TapedPolicy& student_tape, const TapedPolicy::Replay& replay,
                     const std::vector<const PolicyParams*>& teachers, const Instance& inst,
                     const Tour& tour) {
    KdPiece out;
    auto& tape = student_tape.tape();
    const double tw = 1.0 / static_cast<double>(teachers.size());
    for (const PolicyParams* teacher : teachers) {
        const auto tscore = score_tour(inst, tour, *teacher);
        if (tscore.step_dist.size() != replay.logp_rows.size()) {
            throw std::logic_error("kd: trace length mismatch between teacher and student");
        }
        for (size_t s = 0; s < replay.logp_rows.size(); ++s) {
            const Eigen::VectorXd& pt = tscore.step_dist[s];
            const Mat& slogp = tape.val(replay.logp_rows[s]);
            out.loss += tw * step_kl(pt, slogp.row(0));
            const int ptleaf = tape.leaf(pt.transpose());
            const int dot = tape.matmul_nt(ptleaf, replay.logp_rows[s]);
            const int term = tape.scale(dot, -tw);
            out.node = out.node < 0 ? term : tape.add(out.node, term);
        }
    }
    return out;
}

KdEval kd_eval(const std::vector<const PolicyParams*>& teachers, const PolicyParams& student,
               const Instance& inst, const Tour& tour) {
    TapedPolicy tp(inst, student);
    const auto replay = tp.replay(tour);
    const auto piece = kd_surrogate(tp, replay, teachers, inst, tour);
    tp.backward(piece.node);
    KdEval out;
    out.loss = piece.loss;
    for (const auto& [name, t] : student.tensors) {
        (void)t;
        out.grads.emplace(name, tp.grad(name));
    }
    return out;
}

}  // namespace

KdEval kd_loss(const PolicyParams& teacher, const PolicyParams& student, const Instance& inst,
               const Tour& student_tour) {
    return kd_eval({&teacher}, student, inst, student_tour);
}

KdEval kd_loss_multi(const std::vector<PolicyParams>& teachers, const PolicyParams& student,
                     const Instance& inst, const Tour& student_tour) {
    if (teachers.empty()) throw std::invalid_argument("kd_loss_multi: empty teacher set");
    std::vector<const PolicyParams*> ptrs;
    for (const auto& t : teachers) ptrs.push_back(&t);
    return kd_eval(ptrs, student, inst, student_tour);
}

CombinedStats combined_update(PolicyParams& student, AdamState& adam,
                              const std::vector<const PolicyParams*>& teachers,
                              const std::vector<Instance>& batch, const DistillConfig& cfg,
                              RngStream& rng) {
    if (batch.empty()) throw std::invalid_argument("combined_update: empty batch");
    if (teachers.empty() && cfg.alpha < 1.0) throw std::invalid_argument("combined_update: empty teacher set");
    GradMap grads = zero_grads(student.arch);
    CombinedStats stats;
    long n_tours = 0;
    for (const auto& inst : batch) {
        TapedPolicy tp(inst, student);
        // Student samples its own multistart tours (Algorithm 1 line 6).
        std::vector<Tour> tours;
        std::vector<TapedPolicy::Replay> replays;
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
                int action = -1;
                if (first) {
                    action = f;
                } else {
                    const double u = rng.uniform();
                    double acc = 0.0;
                    for (Eigen::Index j = 0; j < logp.cols(); ++j) {
                        if (logp(0, j) <= ad::kNegInf) continue;
                        action = static_cast<int>(j);
                        acc += std::exp(logp(0, j));
                        if (u < acc) break;
                    }
                }
                const int picked = tp.tape().entry(row, 0, action);
                rep.logp_rows.push_back(row);
                rep.total_node = rep.total_node < 0 ? picked : tp.tape().add(rep.total_node, picked);
                rep.step_logp.push_back(tp.tape().val(picked)(0, 0));
                env_step(state, action, inst);
                first = false;
            }
            tours.push_back(finish_tour(inst, state));
            replays.push_back(rep);
        }
        const double k = static_cast<double>(tours.size());
        int combined = -1;
        if (cfg.alpha > 0.0) {
            double baseline = 0.0;
            for (const auto& t : tours) baseline += t.length;
            baseline /= k;
            int task = -1;
            double task_loss = 0.0;
            for (size_t i = 0; i < tours.size(); ++i) {
                const double adv = tours[i].length - baseline;
                double lp = 0.0;
                for (double s : replays[i].step_logp) lp += s;
                task_loss += adv * lp;
                const int term = tp.tape().scale(replays[i].total_node, adv);
                task = task < 0 ? term : tp.tape().add(task, term);
            }
            stats.task_loss += task_loss / k;
            combined = tp.tape().scale(task, cfg.alpha / k);
        }
        if (cfg.alpha < 1.0) {
            int kd = -1;
            double kd_value = 0.0;
            if (cfg.trajectory_source == TrajectorySource::OnPolicy) {
                for (size_t i = 0; i < tours.size(); ++i) {
                    const auto piece = kd_surrogate(tp, replays[i], teachers, inst, tours[i]);
                    kd_value += piece.loss;
                    kd = kd < 0 ? piece.node : tp.tape().add(kd, piece.node);
                }
                kd = tp.tape().scale(kd, (1.0 - cfg.alpha) / k);
                kd_value /= k;
            } else {
                // Off-policy: the selected teacher samples the trajectory,
                // the student replays and imitates it.
                RngStream trng = rng.derive(rng.next_u64());
                const auto ttrace = rollout(inst, *teachers.front(), DecodeMode::Sample, &trng);
                const auto replay = tp.replay(ttrace.tour);
                const auto piece = kd_surrogate(tp, replay, teachers, inst, ttrace.tour);
                kd_value = piece.loss;
                kd = tp.tape().scale(piece.node, 1.0 - cfg.alpha);
            }
            stats.kd_loss += kd_value;
            combined = combined < 0 ? kd : tp.tape().add(combined, kd);
        }
        ++n_tours;
        tp.backward(combined);
        for (auto& [name, g] : grads) g += tp.grad(name);
    }
    const double b = static_cast<double>(batch.size());
    for (auto& [name, g] : grads) {
        (void)name;
        g /= b;
    }
    stats.task_loss /= b;
    stats.kd_loss /= b;
    adam.update(student, grads, cfg.learning_rate);
    return stats;
}

DistillResult distill(const DistillConfig& cfg, const std::vector<ValidationSet>& validation) {
    cfg.validate();
    if (validation.size() != cfg.teachers.size()) {
        throw std::invalid_argument("distill: one validation set per exemplar distribution required");
    }
    for (const auto& vs : validation) {
        if (vs.instances.empty() || vs.instances.size() != vs.reference_lengths.size()) {
            throw std::invalid_argument("distill: validation set missing reference lengths");
        }
    }
    for (const auto& t : cfg.teachers) {
        if (!t.params.finite()) throw std::invalid_argument("distill: teacher checkpoint not finite");
    }
    RngStream master(cfg.seed);
    RngStream init_rng = master.derive(11);
    RngStream pick_rng = master.derive(12);
    RngStream gen_rng = master.derive(13);
    RngStream rollout_rng = master.derive(14);

    DistillResult res;
    res.student = PolicyParams::init(cfg.student_arch, init_rng);
    AdamState adam;

    std::vector<uint64_t> hashes;
    for (const auto& vs : validation) hashes.push_back(vs.content_hash);

    auto eval_gaps = [&]() {
        std::vector<double> gaps;
        for (const auto& vs : validation) gaps.push_back(avg_gap(res.student, vs, cfg.eval_augment8));
        return gaps;
    };
    std::vector<double> gaps = eval_gaps();
    std::vector<double> prev_probs;
    int stable_epochs = 0;
    bool frozen = false;

    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        const auto t0 = std::chrono::steady_clock::now();
        for (size_t i = 0; i < validation.size(); ++i) {
            if (validation_hash(validation[i]) != hashes[i]) {
                throw std::logic_error("distill: validation set mutated during the run");
            }
        }
        const auto probs = adaptive_probs(gaps, epoch, cfg);
        // Sample the exemplar distribution for this epoch.
        const double u = pick_rng.uniform();
        int selected = static_cast<int>(probs.size()) - 1;
        double acc = 0.0;
        for (size_t i = 0; i < probs.size(); ++i) {
            acc += probs[i];
            if (u < acc) {
                selected = static_cast<int>(i);
                break;
            }
        }
        std::vector<const PolicyParams*> teachers;
        if (cfg.teacher_mode == TeacherMode::SingleSelected) {
            teachers.push_back(&cfg.teachers[static_cast<size_t>(selected)].params);
        } else {
            for (const auto& t : cfg.teachers) teachers.push_back(&t.params);
        }
        CombinedStats sum;
        for (int step = 0; step < cfg.steps_per_epoch; ++step) {
            auto batch = sample_batch(cfg.teachers[static_cast<size_t>(selected)].distribution,
                                      cfg.problem, cfg.n_nodes, cfg.batch_size, gen_rng);
            const auto st = combined_update(res.student, adam, teachers, batch, cfg, rollout_rng);
            sum.task_loss += st.task_loss;
            sum.kd_loss += st.kd_loss;
        }
        if (!frozen) {
            gaps = eval_gaps();
            if (cfg.freeze_stable_probs) {
                if (!prev_probs.empty()) {
                    double delta = 0.0;
                    for (size_t i = 0; i < probs.size(); ++i) delta = std::max(delta, std::abs(probs[i] - prev_probs[i]));
                    stable_epochs = delta < 1e-3 ? stable_epochs + 1 : 0;
                    if (stable_epochs >= 20) frozen = true;
                }
                prev_probs = probs;
            }
        }
        DistillLogRow row;
        row.epoch = epoch;
        row.selected = selected;
        row.probs = probs;
        row.gaps = gaps;
        row.task_loss = sum.task_loss / cfg.steps_per_epoch;
        row.kd_loss = sum.kd_loss / cfg.steps_per_epoch;
        row.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        res.log.push_back(row);
    }
    res.final_gaps = gaps;
    return res;
}

DistillResult ablate(DistillConfig cfg, AblationSwitch sw,
                     const std::vector<ValidationSet>& validation) {
    switch (sw) {
        case AblationSwitch::NoAdaptive: cfg.force_uniform = true; break;
        case AblationSwitch::NoKD: cfg.alpha = 1.0; break;
        case AblationSwitch::NoTask: cfg.alpha = 0.0; break;
        case AblationSwitch::OffPolicy: cfg.trajectory_source = TrajectorySource::OffPolicy; break;
    }
    return distill(cfg, validation);
}

AblationSwitch ablation_from_string(const std::string& name) {
    if (name == "no-adaptive") return AblationSwitch::NoAdaptive;
    if (name == "no-kd") return AblationSwitch::NoKD;
    if (name == "no-task") return AblationSwitch::NoTask;
    if (name == "off-policy") return AblationSwitch::OffPolicy;
    throw std::invalid_argument("unknown ablation switch: " + name);
}

}  // namespace amdkd
