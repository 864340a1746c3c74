#pragma once

#include <string>
#include <vector>

#include "amdkd/distill.hpp"
#include "amdkd/policy.hpp"
#include "amdkd/problems.hpp"

namespace amdkd {

// A TSPLIB/CVRPLIB benchmark instance; EUC_2D only.
struct BenchmarkInstance {
    std::string name;
    int dimension = 0;
    std::vector<Point> coords;  // original units
    bool is_cvrp = false;
    std::vector<int> demands;
    int capacity = 0;
    int depot = 0;  // after internal reordering the depot is index 0

    // Rounded-integer Euclidean length, the convention TSPLIB optima use.
    long rounded_length(const std::vector<int>& sequence) const;
};

BenchmarkInstance parse_tsplib(const std::string& text);
BenchmarkInstance parse_cvrplib(const std::string& text);
std::string serialize_tsplib(const BenchmarkInstance& bi);

// Internal model: coordinates min-max normalized to the unit square when
// `normalize` is set (models are trained there); lengths and gaps are
// always computed in original units.
Instance to_instance(const BenchmarkInstance& bi, bool normalize = true);

struct EvalSpec {
    enum class Mode { Greedy, GreedyAug8, SampleK } mode = Mode::Greedy;
    int sample_k = 1280;
    uint64_t seed = 0;
};

std::string to_string(EvalSpec::Mode mode);

struct EvalRow {
    std::string distribution;
    int index = 0;
    double model_length = 0.0;
    double reference_length = 0.0;
    double gap = 0.0;
};

struct EvalReport {
    std::vector<std::string> names;
    std::vector<double> gaps;
    double overall = 0.0;
    std::vector<EvalRow> rows;
};

double model_tour_length(const Instance& inst, const PolicyParams& params, const EvalSpec& spec,
                         RngStream& rng);

// Gap evaluation over generated distributions with reference solutions.
EvalReport evaluate(const PolicyParams& params, const std::vector<DistributionSpec>& dists,
                    ProblemKind problem, int n_nodes, int count, const EvalSpec& spec,
                    uint64_t seed);

int cli_main(int argc, const char* const* argv);

}  // namespace amdkd
