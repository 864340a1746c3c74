#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>

#include <CLI11.hpp>

#include "amdkd/bench.hpp"
#include "amdkd/distill.hpp"
#include "amdkd/io.hpp"
#include "amdkd/solvers.hpp"
#include "amdkd/training.hpp"

namespace amdkd {

namespace fs = std::filesystem;

namespace {

DistributionSpec dist_spec_from(const KeyValueConfig& cfg, const std::string& name) {
    DistributionSpec spec;
    spec.kind = distribution_from_string(name);
    spec.n_clusters = static_cast<int>(cfg.get_int("n_clusters", spec.n_clusters));
    spec.cluster_sigma = cfg.get_double("cluster_sigma", spec.cluster_sigma);
    spec.mutation_radius = cfg.get_double("mutation_radius", spec.mutation_radius);
    spec.exp_rate = cfg.get_double("exp_rate", spec.exp_rate);
    return spec;
}

ProblemKind problem_from(const KeyValueConfig& cfg) {
    const std::string p = cfg.get_or("problem", "tsp");
    if (p == "tsp") return ProblemKind::TSP;
    if (p == "cvrp") return ProblemKind::CVRP;
    throw std::invalid_argument("config: problem must be tsp or cvrp");
}

ArchSpec arch_from(const KeyValueConfig& cfg, ProblemKind kind, const std::string& prefix = "") {
    ArchSpec arch;
    arch.embed_dim = static_cast<int>(cfg.get_int(prefix + "embed_dim", 32));
    arch.n_heads = static_cast<int>(cfg.get_int(prefix + "n_heads", 4));
    arch.n_layers = static_cast<int>(cfg.get_int(prefix + "n_layers", 2));
    arch.kind = kind;
    arch.validate();
    return arch;
}

void echo_config(const KeyValueConfig& cfg, const fs::path& out_dir, uint64_t seed) {
    fs::create_directories(out_dir);
    std::ofstream os(out_dir / "effective_config.txt");
    os << cfg.echo();
    os << "seed = " << seed << "\n";
}

std::ostream& csv_stream(std::ofstream& os) {
    os.precision(17);
    return os;
}

int cmd_generate(const KeyValueConfig& cfg, uint64_t seed) {
    cfg.reject_unknown({"distribution", "n", "count", "problem", "out", "seed", "n_clusters",
                        "cluster_sigma", "mutation_radius", "exp_rate"});
    const auto spec = dist_spec_from(cfg, cfg.get("distribution"));
    const int n = static_cast<int>(cfg.get_int("n", 20));
    const int count = static_cast<int>(cfg.get_int("count", 100));
    const ProblemKind problem = problem_from(cfg);
    const fs::path out = cfg.get("out");
    if (out.has_parent_path()) fs::create_directories(out.parent_path());
    std::ofstream os(out);
    if (!os) throw std::runtime_error("cannot write " + out.string());
    RngStream rng(seed);
    for (int i = 0; i < count; ++i) {
        InstanceRecord rec;
        rec.kind = to_string(spec.kind);
        rec.n = n;
        rec.seed = rng.next_u64();
        rec.instance = make_instance(spec, problem, n, rec.seed);
        os << instance_to_jsonl(rec) << "\n";
    }
    return 0;
}

int cmd_solve(const KeyValueConfig& cfg, uint64_t) {
    cfg.reject_unknown({"in", "cache_out", "tours_out", "seed"});
    std::ifstream is(cfg.get("in"));
    if (!is) throw std::runtime_error("cannot read " + cfg.get("in"));
    ReferenceCache cache;
    std::ofstream tours;
    const bool write_tours = cfg.has("tours_out");
    if (write_tours) {
        tours.open(cfg.get("tours_out"));
        csv_stream(tours);
    }
    std::string line;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        const auto rec = instance_from_jsonl(line);
        const auto res = solve_reference(rec.instance);
        cache.entries[instance_hash(rec.instance)] = {res.tour.length, res.is_exact};
        if (write_tours) {
            TourRecord tr;
            tr.instance_ref = rec.kind + ":" + std::to_string(rec.n) + ":" + std::to_string(rec.seed);
            tr.sequence = res.tour.sequence;
            tr.length = res.tour.length;
            tours << tour_to_jsonl(tr) << "\n";
        }
    }
    cache.save(cfg.get("cache_out"));
    return 0;
}

int cmd_train_teacher(const KeyValueConfig& cfg, uint64_t seed) {
    cfg.reject_unknown({"distribution", "problem", "n", "epochs", "steps_per_epoch", "batch_size",
                        "learning_rate", "baseline", "num_starts", "embed_dim", "n_heads",
                        "n_layers", "out_dir", "seed", "n_clusters", "cluster_sigma",
                        "mutation_radius", "exp_rate"});
    TrainConfig tc;
    tc.distribution = dist_spec_from(cfg, cfg.get("distribution"));
    tc.problem = problem_from(cfg);
    tc.n_nodes = static_cast<int>(cfg.get_int("n", 20));
    tc.epochs = static_cast<int>(cfg.get_int("epochs", 10));
    tc.steps_per_epoch = static_cast<int>(cfg.get_int("steps_per_epoch", 50));
    tc.batch_size = static_cast<int>(cfg.get_int("batch_size", 16));
    tc.learning_rate = cfg.get_double("learning_rate", 1e-4);
    tc.num_starts = static_cast<int>(cfg.get_int("num_starts", 8));
    tc.seed = seed;
    tc.arch = arch_from(cfg, tc.problem);
    const std::string bl = cfg.get_or("baseline", "multistart");
    if (bl == "multistart") tc.baseline = BaselineMode::SharedMultistart;
    else if (bl == "greedy") tc.baseline = BaselineMode::GreedyRollout;
    else throw std::invalid_argument("config: baseline must be multistart or greedy");

    const fs::path out_dir = cfg.get("out_dir");
    echo_config(cfg, out_dir, seed);
    std::ofstream log(out_dir / "training_log.csv");
    csv_stream(log) << "epoch,step,mean_length,baseline_mode,seed\n";
    const auto res = train_teacher(tc, [&](const TrainLogRow& row) {
        log << row.epoch << "," << row.step << "," << row.mean_length << "," << bl << "," << seed << "\n";
    });
    save_checkpoint((out_dir / "teacher_final.ckpt").string(), res.params);
    return 0;
}

std::vector<TeacherEntry> load_teachers(const KeyValueConfig& cfg) {
    // teachers = uniform:path,cluster:path,mixed:path
    std::vector<TeacherEntry> teachers;
    std::istringstream ss(cfg.get("teachers"));
    std::string item;
    while (std::getline(ss, item, ',')) {
        const auto colon = item.find(':');
        if (colon == std::string::npos) throw std::invalid_argument("teachers entry must be dist:path");
        TeacherEntry te;
        te.distribution = DistributionSpec{};
        te.distribution.kind = distribution_from_string(item.substr(0, colon));
        te.params = load_checkpoint(item.substr(colon + 1));
        teachers.push_back(std::move(te));
    }
    return teachers;
}

DistillConfig distill_config_from(const KeyValueConfig& cfg, uint64_t seed) {
    DistillConfig dc;
    dc.teachers = load_teachers(cfg);
    dc.alpha = cfg.get_double("alpha", 0.5);
    dc.epochs = static_cast<int>(cfg.get_int("epochs", 10));
    dc.adaptive_start = static_cast<int>(cfg.get_int("adaptive_start", 1));
    dc.steps_per_epoch = static_cast<int>(cfg.get_int("steps_per_epoch", 20));
    dc.batch_size = static_cast<int>(cfg.get_int("batch_size", 16));
    dc.learning_rate = cfg.get_double("learning_rate", 1e-4);
    dc.validation_size = static_cast<int>(cfg.get_int("validation_size", 1000));
    dc.problem = problem_from(cfg);
    dc.n_nodes = static_cast<int>(cfg.get_int("n", 20));
    dc.num_starts = static_cast<int>(cfg.get_int("num_starts", 8));
    dc.seed = seed;
    dc.student_arch = arch_from(cfg, dc.problem, "student_");
    if (!cfg.has("student_embed_dim")) dc.student_arch.embed_dim = 16;
    dc.student_arch.validate();
    const std::string ts = cfg.get_or("trajectory_source", "on_policy");
    if (ts == "on_policy") dc.trajectory_source = TrajectorySource::OnPolicy;
    else if (ts == "off_policy") dc.trajectory_source = TrajectorySource::OffPolicy;
    else throw std::invalid_argument("config: trajectory_source must be on_policy or off_policy");
    const std::string tm = cfg.get_or("teacher_mode", "single");
    if (tm == "single") dc.teacher_mode = TeacherMode::SingleSelected;
    else if (tm == "mt") dc.teacher_mode = TeacherMode::SimultaneousMT;
    else throw std::invalid_argument("config: teacher_mode must be single or mt");
    dc.eval_augment8 = cfg.get_int("eval_augment8", 0) != 0;
    dc.freeze_stable_probs = cfg.get_int("freeze_stable_probs", 0) != 0;
    return dc;
}

const std::vector<std::string> kDistillKeys = {
    "teachers", "alpha", "epochs", "adaptive_start", "steps_per_epoch", "batch_size",
    "learning_rate", "validation_size", "problem", "n", "num_starts", "student_embed_dim",
    "student_n_heads", "student_n_layers", "trajectory_source", "teacher_mode", "eval_augment8",
    "freeze_stable_probs", "out_dir", "seed", "validation_seed", "switch"};

void write_distill_outputs(const DistillResult& res, const DistillConfig& dc,
                           const fs::path& out_dir) {
    std::ofstream log(out_dir / "run_log.csv");
    csv_stream(log) << "epoch,selected_distribution";
    for (const auto& t : dc.teachers) log << ",p_" << to_string(t.distribution.kind);
    for (const auto& t : dc.teachers) log << ",gap_" << to_string(t.distribution.kind);
    log << ",task_loss,kd_loss\n";
    std::ofstream meta(out_dir / "run_log.meta");
    csv_stream(meta) << "epoch,wall_seconds\n";
    for (const auto& row : res.log) {
        log << row.epoch << "," << to_string(dc.teachers[static_cast<size_t>(row.selected)].distribution.kind);
        for (double p : row.probs) log << "," << p;
        for (double g : row.gaps) log << "," << g;
        log << "," << row.task_loss << "," << row.kd_loss << "\n";
        meta << row.epoch << "," << row.wall_seconds << "\n";
    }
    save_checkpoint((out_dir / "student_final.ckpt").string(), res.student);
}

int cmd_distill(const KeyValueConfig& cfg, uint64_t seed, const std::string& ablation = "") {
    cfg.reject_unknown(kDistillKeys);
    DistillConfig dc = distill_config_from(cfg, seed);
    const uint64_t vseed = static_cast<uint64_t>(cfg.get_int("validation_seed", 90210));
    std::vector<ValidationSet> validation;
    for (size_t i = 0; i < dc.teachers.size(); ++i) {
        validation.push_back(build_validation_set(dc.teachers[i].distribution, dc.problem, dc.n_nodes,
                                                  dc.validation_size, vseed + i));
    }
    const fs::path out_dir = cfg.get("out_dir");
    echo_config(cfg, out_dir, seed);
    const DistillResult res = ablation.empty() ? distill(dc, validation)
                                               : ablate(dc, ablation_from_string(ablation), validation);
    write_distill_outputs(res, dc, out_dir);
    return 0;
}

int cmd_evaluate(const KeyValueConfig& cfg, uint64_t seed) {
    cfg.reject_unknown({"checkpoint", "distributions", "n", "count", "mode", "sample_k",
                        "out_dir", "seed", "model_name"});
    const PolicyParams params = load_checkpoint(cfg.get("checkpoint"));
    std::vector<DistributionSpec> dists;
    std::istringstream ss(cfg.get_or("distributions",
                                     "uniform,cluster,mixed,expansion,implosion,explosion,grid"));
    std::string item;
    while (std::getline(ss, item, ',')) {
        DistributionSpec d;
        d.kind = distribution_from_string(item);
        dists.push_back(d);
    }
    EvalSpec spec;
    const std::string mode = cfg.get_or("mode", "greedy");
    if (mode == "greedy") spec.mode = EvalSpec::Mode::Greedy;
    else if (mode == "greedy_aug8") spec.mode = EvalSpec::Mode::GreedyAug8;
    else if (mode == "sample_k") spec.mode = EvalSpec::Mode::SampleK;
    else throw std::invalid_argument("config: unknown mode " + mode);
    spec.sample_k = static_cast<int>(cfg.get_int("sample_k", 1280));
    spec.seed = seed;
    const int n = static_cast<int>(cfg.get_int("n", 20));
    const int count = static_cast<int>(cfg.get_int("count", 1000));
    const fs::path out_dir = cfg.get("out_dir");
    echo_config(cfg, out_dir, seed);
    const auto report = evaluate(params, dists, params.arch.kind, n, count, spec, seed);
    std::ofstream per(out_dir / "per_instance.csv");
    csv_stream(per) << "distribution,index,model_length,reference_length,gap\n";
    for (const auto& row : report.rows) {
        per << row.distribution << "," << row.index << "," << row.model_length << ","
            << row.reference_length << "," << row.gap << "\n";
    }
    std::ofstream summary(out_dir / "gap_table.csv");
    csv_stream(summary) << "model";
    for (const auto& name : report.names) summary << ",G_" << name;
    summary << ",Avg\n" << cfg.get_or("model_name", "model");
    for (double g : report.gaps) summary << "," << g;
    summary << "," << report.overall << "\n";
    return 0;
}

int cmd_parse_bench(const KeyValueConfig& cfg, uint64_t seed) {
    cfg.reject_unknown({"in", "format", "reference", "solve", "seed"});
    std::ifstream is(cfg.get("in"));
    if (!is) throw std::runtime_error("cannot read " + cfg.get("in"));
    std::ostringstream text;
    text << is.rdbuf();
    const std::string format = cfg.get_or("format", "tsplib");
    const BenchmarkInstance bi = format == "cvrplib" ? parse_cvrplib(text.str()) : parse_tsplib(text.str());
    std::cout << "name=" << bi.name << " dimension=" << bi.dimension
              << " kind=" << (bi.is_cvrp ? "cvrp" : "tsp") << "\n";
    if (cfg.get_int("solve", 0) != 0) {
        const Instance inst = to_instance(bi, false);
        RngStream rng(seed);
        const auto res = bi.is_cvrp ? heuristic_cvrp(inst, rng) : heuristic_tsp(inst, rng);
        const long rounded = bi.rounded_length(res.tour.sequence);
        std::cout << "heuristic_rounded_length=" << rounded;
        if (cfg.has("reference")) {
            const double ref = cfg.get_double("reference", 0.0);
            std::cout << " reference=" << ref << " gap=" << (rounded - ref) / ref;
        }
        std::cout << "\n";
    }
    return 0;
}

}  // namespace

int cli_main(int argc, const char* const* argv) {
    CLI::App app{"Multi-distribution knowledge distillation for TSP/CVRP construction policies"};
    app.require_subcommand(1);
    std::string config_path;
    uint64_t seed = 0;
    bool seed_given = false;

    std::string ablation_switch;
    std::vector<std::pair<std::string, std::function<int(const KeyValueConfig&, uint64_t)>>> cmds = {
        {"generate", cmd_generate},
        {"solve", cmd_solve},
        {"train-teacher", cmd_train_teacher},
        {"distill", [](const KeyValueConfig& c, uint64_t s) { return cmd_distill(c, s); }},
        {"evaluate", cmd_evaluate},
        {"parse-bench", cmd_parse_bench},
    };
    std::map<std::string, CLI::App*> subs;
    for (auto& [name, fn] : cmds) {
        CLI::App* sub = app.add_subcommand(name);
        sub->add_option("--config", config_path, "flat key = value config file")->required();
        sub->add_option("--seed", seed, "run seed (overrides config)");
        subs[name] = sub;
    }
    CLI::App* ab = app.add_subcommand("ablate");
    ab->add_option("--config", config_path, "flat key = value config file")->required();
    ab->add_option("--seed", seed, "run seed (overrides config)");
    ab->add_option("--switch", ablation_switch, "no-adaptive | no-kd | no-task | off-policy");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }
    for (auto* sub : app.get_subcommands()) {
        seed_given = sub->count("--seed") > 0;
    }
    try {
        const KeyValueConfig cfg = KeyValueConfig::load(config_path);
        if (!seed_given) seed = static_cast<uint64_t>(cfg.get_int("seed", 0));
        for (auto& [name, fn] : cmds) {
            if (subs[name]->parsed()) return fn(cfg, seed);
        }
        if (ab->parsed()) {
            const std::string sw = !ablation_switch.empty() ? ablation_switch : cfg.get("switch");
            return cmd_distill(cfg, seed, sw);
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}

}  // namespace amdkd
