#pragma once

#include <vector>

#include "amdkd/problems.hpp"
#include "amdkd/rng.hpp"

namespace amdkd {

struct SolverResult {
    Tour tour;
    bool is_exact = false;
    long iterations = 0;
    // 2-opt/relocate improvement trajectory, monotone non-increasing.
    std::vector<double> improvement_log;
};

// Held-Karp dynamic program; n <= 16.
SolverResult exact_tsp(const Instance& inst);

// Best of min(n,10) nearest-neighbor starts, each 2-opt'd to local optimality.
SolverResult heuristic_tsp(const Instance& inst, RngStream& rng);

// Exhaustive permutations with optimal route splitting; <= 8 customers.
SolverResult exact_cvrp(const Instance& inst);

// Clarke-Wright savings, then intra-route 2-opt and inter-route relocate.
SolverResult heuristic_cvrp(const Instance& inst, RngStream& rng);

// Exact when within size limits, heuristic otherwise.
SolverResult solve_reference(const Instance& inst);

constexpr int kExactTspLimit = 16;
constexpr int kExactCvrpLimit = 8;

}  // namespace amdkd
