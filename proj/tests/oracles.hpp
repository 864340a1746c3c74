#pragma once

// Independent brute-force oracles used to cross-check the production
// solvers. Deliberately written with different algorithms and data layouts
// than the library code they verify.

#include <algorithm>
#include <limits>
#include <numeric>
#include <vector>

#include "amdkd/problems.hpp"

namespace oracle {

// Closed-tour length by plain pairwise summation.
inline double tsp_cycle_length(const amdkd::Instance& inst, const std::vector<int>& perm) {
    double len = 0.0;
    const size_t n = perm.size();
    for (size_t i = 0; i < n; ++i) {
        len += inst.dist(perm[i], perm[(i + 1) % n]);
    }
    return len;
}

// Exhaustive permutation enumeration with node 0 fixed (rotation symmetry).
inline double brute_tsp(const amdkd::Instance& inst) {
    std::vector<int> perm(static_cast<size_t>(inst.size()));
    std::iota(perm.begin(), perm.end(), 0);
    double best = std::numeric_limits<double>::infinity();
    do {
        best = std::min(best, tsp_cycle_length(inst, perm));
    } while (std::next_permutation(perm.begin() + 1, perm.end()));
    return best;
}

// Cheapest partition of a fixed customer order into capacity-feasible
// routes, found by trying every split recursively (no DP shared with the
// production split).
inline double best_split(const amdkd::Instance& inst, const std::vector<int>& order, size_t from) {
    if (from == order.size()) return 0.0;
    double best = std::numeric_limits<double>::infinity();
    int load = 0;
    double inner = 0.0;
    for (size_t to = from; to < order.size(); ++to) {
        load += inst.demands[static_cast<size_t>(order[to])];
        if (load > inst.capacity) break;
        if (to > from) inner += inst.dist(order[to - 1], order[to]);
        const double route = inst.dist(inst.depot, order[from]) + inner + inst.dist(order[to], inst.depot);
        best = std::min(best, route + best_split(inst, order, to + 1));
    }
    return best;
}

// Exhaustive CVRP: all customer permutations x all route splits.
inline double brute_cvrp(const amdkd::Instance& inst) {
    std::vector<int> order;
    for (int i = 0; i < inst.size(); ++i) {
        if (i != inst.depot) order.push_back(i);
    }
    std::sort(order.begin(), order.end());
    double best = std::numeric_limits<double>::infinity();
    do {
        best = std::min(best, best_split(inst, order, 0));
    } while (std::next_permutation(order.begin(), order.end()));
    return best;
}

}  // namespace oracle
