#pragma once

#include <string>
#include <vector>

#include "amdkd/instancegen.hpp"
#include "amdkd/policy.hpp"
#include "amdkd/solvers.hpp"
#include "amdkd/training.hpp"

namespace amdkd {

enum class TrajectorySource { OnPolicy, OffPolicy };
enum class TeacherMode { SingleSelected, SimultaneousMT };
enum class AblationSwitch { NoAdaptive, NoKD, NoTask, OffPolicy };

struct TeacherEntry {
    DistributionSpec distribution;
    PolicyParams params;
};

struct DistillConfig {
    std::vector<TeacherEntry> teachers;  // exemplar set, one teacher each
    double alpha = 0.5;
    int epochs = 10;
    int adaptive_start = 1;  // E': uniform selection before this epoch
    int steps_per_epoch = 20;
    int batch_size = 16;
    double learning_rate = 1e-4;
    int validation_size = 1000;
    TrajectorySource trajectory_source = TrajectorySource::OnPolicy;
    TeacherMode teacher_mode = TeacherMode::SingleSelected;
    uint64_t seed = 0;
    ProblemKind problem = ProblemKind::TSP;
    int n_nodes = 20;
    ArchSpec student_arch;
    int num_starts = 8;
    bool eval_augment8 = false;   // x8-augmented greedy for validation gaps
    bool force_uniform = false;   // ablation: never adapt selection
    bool freeze_stable_probs = false;  // stop re-evaluating once probabilities settle

    void validate() const;
};

struct ValidationSet {
    DistributionSpec distribution;
    std::vector<Instance> instances;
    std::vector<double> reference_lengths;
    uint64_t content_hash = 0;
};

ValidationSet build_validation_set(const DistributionSpec& dist, ProblemKind problem, int n_nodes,
                                   int count, uint64_t seed);
uint64_t validation_hash(const ValidationSet& vs);

struct GapReport {
    std::vector<std::string> names;
    std::vector<double> gaps;
    double overall = 0.0;
};

// Mean relative gap of greedy decoding against the stored references.
double avg_gap(const PolicyParams& params, const ValidationSet& vs, bool augment8_best);

// Eq.-style adaptive selection: uniform before adaptive_start, softmax over
// gaps in percentage points from then on.
std::vector<double> adaptive_probs(const std::vector<double>& gaps, int epoch,
                                   const DistillConfig& cfg);

// KL(p_teacher || p_student) over the feasible actions of one decode step;
// entries with teacher probability 0 contribute nothing. `log_p_student` is
// a row of per-action log-probabilities.
double step_kl(const Eigen::VectorXd& p_teacher, const Eigen::RowVectorXd& log_p_student);

struct KdEval {
    double loss = 0.0;
    GradMap grads;  // w.r.t. the student only
};

KdEval kd_loss(const PolicyParams& teacher, const PolicyParams& student, const Instance& inst,
               const Tour& student_tour);

KdEval kd_loss_multi(const std::vector<PolicyParams>& teachers, const PolicyParams& student,
                     const Instance& inst, const Tour& student_tour);

struct CombinedStats {
    double task_loss = 0.0;
    double kd_loss = 0.0;
};

// One Algorithm-1 inner step: sample student tours, combine the REINFORCE
// surrogate gradient with the distillation gradient at weight alpha.
CombinedStats combined_update(PolicyParams& student, AdamState& adam,
                              const std::vector<const PolicyParams*>& teachers,
                              const std::vector<Instance>& batch, const DistillConfig& cfg,
                              RngStream& rng);

struct DistillLogRow {
    int epoch = 0;
    int selected = 0;
    std::vector<double> probs;
    std::vector<double> gaps;
    double task_loss = 0.0;
    double kd_loss = 0.0;
    double wall_seconds = 0.0;  // reported out-of-band, never in the run CSV
};

struct DistillResult {
    PolicyParams student;
    std::vector<DistillLogRow> log;
    std::vector<double> final_gaps;
};

DistillResult distill(const DistillConfig& cfg, const std::vector<ValidationSet>& validation);

DistillResult ablate(DistillConfig cfg, AblationSwitch sw,
                     const std::vector<ValidationSet>& validation);

AblationSwitch ablation_from_string(const std::string& name);

}  // namespace amdkd
