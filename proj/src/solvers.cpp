#include "amdkd/solvers.hpp"

#include <algorithm>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace amdkd {

namespace {

double open_path_closed_length(const Instance& inst, const std::vector<int>& seq) {
    double len = 0.0;
    const int n = static_cast<int>(seq.size());
    for (int i = 0; i < n; ++i) len += inst.dist(seq[static_cast<size_t>(i)], seq[static_cast<size_t>((i + 1) % n)]);
    return len;
}

// First-improvement 2-opt in lexicographic (i, j) order on an open
// permutation interpreted as a closed tour.
void two_opt(const Instance& inst, std::vector<int>& seq, std::vector<double>* log, long* iters) {
    const int n = static_cast<int>(seq.size());
    bool improved = true;
    double len = open_path_closed_length(inst, seq);
    if (log) log->push_back(len);
    while (improved) {
        improved = false;
        for (int i = 0; i < n - 1 && !improved; ++i) {
            for (int j = i + 1; j < n; ++j) {
                if (i == 0 && j == n - 1) continue;  // same edge pair
                const int a = seq[static_cast<size_t>(i == 0 ? n - 1 : i - 1)];
                const int b = seq[static_cast<size_t>(i)];
                const int c = seq[static_cast<size_t>(j)];
                const int d = seq[static_cast<size_t>((j + 1) % n)];
                const double delta = inst.dist(a, c) + inst.dist(b, d) - inst.dist(a, b) - inst.dist(c, d);
                if (iters) ++*iters;
                if (delta < -1e-12) {
                    std::reverse(seq.begin() + i, seq.begin() + j + 1);
                    len += delta;
                    if (log) log->push_back(len);
                    improved = true;
                    break;
                }
            }
        }
    }
}

std::vector<int> nearest_neighbor(const Instance& inst, int start) {
    const int n = inst.size();
    std::vector<char> used(static_cast<size_t>(n), 0);
    std::vector<int> seq;
    seq.reserve(static_cast<size_t>(n));
    int cur = start;
    used[static_cast<size_t>(cur)] = 1;
    seq.push_back(cur);
    for (int step = 1; step < n; ++step) {
        int best = -1;
        double best_d = std::numeric_limits<double>::infinity();
        for (int j = 0; j < n; ++j) {
            if (!used[static_cast<size_t>(j)] && inst.dist(cur, j) < best_d) {
                best_d = inst.dist(cur, j);
                best = j;
            }
        }
        used[static_cast<size_t>(best)] = 1;
        seq.push_back(best);
        cur = best;
    }
    return seq;
}

}  // namespace

SolverResult exact_tsp(const Instance& inst) {
    const int n = inst.size();
    if (n > kExactTspLimit) {
        throw std::invalid_argument("exact_tsp: n > " + std::to_string(kExactTspLimit) + ", use heuristic_tsp");
    }
    SolverResult res;
    res.is_exact = true;
    if (n == 2) {
        res.tour.sequence = {0, 1};
        res.tour.length = tour_length(inst, res.tour);
        return res;
    }
    // Subsets over nodes 1..n-1, tours anchored at node 0.
    const int m = n - 1;
    const size_t full = size_t{1} << m;
    const double inf = std::numeric_limits<double>::infinity();
    std::vector<double> dp(full * static_cast<size_t>(m), inf);
    std::vector<int> parent(full * static_cast<size_t>(m), -1);
    for (int j = 0; j < m; ++j) {
        dp[(size_t{1} << j) * static_cast<size_t>(m) + static_cast<size_t>(j)] = inst.dist(0, j + 1);
    }
    for (size_t mask = 1; mask < full; ++mask) {
        for (int j = 0; j < m; ++j) {
            if (!(mask & (size_t{1} << j))) continue;
            const double cur = dp[mask * static_cast<size_t>(m) + static_cast<size_t>(j)];
            if (cur == inf) continue;
            for (int k = 0; k < m; ++k) {
                if (mask & (size_t{1} << k)) continue;
                const size_t nmask = mask | (size_t{1} << k);
                double cand = cur + inst.dist(j + 1, k + 1);
                double& slot = dp[nmask * static_cast<size_t>(m) + static_cast<size_t>(k)];
                if (cand < slot) {
                    slot = cand;
                    parent[nmask * static_cast<size_t>(m) + static_cast<size_t>(k)] = j;
                }
            }
        }
    }
    double best = inf;
    int best_j = -1;
    for (int j = 0; j < m; ++j) {
        const double cand = dp[(full - 1) * static_cast<size_t>(m) + static_cast<size_t>(j)] + inst.dist(j + 1, 0);
        if (cand < best) {
            best = cand;
            best_j = j;
        }
    }
    std::vector<int> rev;
    size_t mask = full - 1;
    int j = best_j;
    while (j != -1) {
        rev.push_back(j + 1);
        const int pj = parent[mask * static_cast<size_t>(m) + static_cast<size_t>(j)];
        mask &= ~(size_t{1} << j);
        j = pj;
    }
    res.tour.sequence.push_back(0);
    for (auto it = rev.rbegin(); it != rev.rend(); ++it) res.tour.sequence.push_back(*it);
    res.tour.length = tour_length(inst, res.tour);
    return res;
}

SolverResult heuristic_tsp(const Instance& inst, RngStream& rng) {
    const int n = inst.size();
    if (n < 2) throw std::invalid_argument("heuristic_tsp: n < 2");
    const int k = std::min(n, 10);
    // k distinct start nodes, drawn without replacement.
    std::vector<int> order(static_cast<size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    rng.shuffle(order);
    SolverResult res;
    res.is_exact = false;
    double best = std::numeric_limits<double>::infinity();
    for (int s = 0; s < k; ++s) {
        auto seq = nearest_neighbor(inst, order[static_cast<size_t>(s)]);
        std::vector<double> log;
        two_opt(inst, seq, &log, &res.iterations);
        const double len = open_path_closed_length(inst, seq);
        if (len < best) {
            best = len;
            res.tour.sequence = seq;
            res.improvement_log = log;
        }
    }
    res.tour.length = tour_length(inst, res.tour);
    return res;
}

namespace {

// Optimal split of a fixed customer order into capacity-feasible routes.
double split_cost(const Instance& inst, const std::vector<int>& perm, std::vector<int>* breaks) {
    const int m = static_cast<int>(perm.size());
    const double inf = std::numeric_limits<double>::infinity();
    std::vector<double> dp(static_cast<size_t>(m) + 1, inf);
    std::vector<int> from(static_cast<size_t>(m) + 1, -1);
    dp[0] = 0.0;
    for (int i = 0; i < m; ++i) {
        if (dp[static_cast<size_t>(i)] == inf) continue;
        int load = 0;
        double inner = 0.0;
        for (int j = i; j < m; ++j) {
            load += inst.demands[static_cast<size_t>(perm[static_cast<size_t>(j)])];
            if (load > inst.capacity) break;
            if (j > i) inner += inst.dist(perm[static_cast<size_t>(j - 1)], perm[static_cast<size_t>(j)]);
            const double cost = inst.dist(inst.depot, perm[static_cast<size_t>(i)]) + inner +
                                inst.dist(perm[static_cast<size_t>(j)], inst.depot);
            if (dp[static_cast<size_t>(i)] + cost < dp[static_cast<size_t>(j) + 1]) {
                dp[static_cast<size_t>(j) + 1] = dp[static_cast<size_t>(i)] + cost;
                from[static_cast<size_t>(j) + 1] = i;
            }
        }
    }
    if (breaks) {
        breaks->clear();
        int j = m;
        while (j > 0) {
            breaks->push_back(j);
            j = from[static_cast<size_t>(j)];
        }
        std::reverse(breaks->begin(), breaks->end());
    }
    return dp[static_cast<size_t>(m)];
}

Tour tour_from_split(const Instance& inst, const std::vector<int>& perm, const std::vector<int>& breaks) {
    Tour t;
    int start = 0;
    for (int b : breaks) {
        for (int i = start; i < b; ++i) t.sequence.push_back(perm[static_cast<size_t>(i)]);
        t.sequence.push_back(inst.depot);
        start = b;
    }
    t.length = tour_length(inst, t);
    return t;
}

}  // namespace

SolverResult exact_cvrp(const Instance& inst) {
    if (inst.kind != ProblemKind::CVRP) throw std::invalid_argument("exact_cvrp: not a CVRP instance");
    const int m = inst.num_customers();
    if (m > kExactCvrpLimit) {
        throw std::invalid_argument("exact_cvrp: more than " + std::to_string(kExactCvrpLimit) + " customers");
    }
    std::vector<int> perm;
    for (int i = 0; i < inst.size(); ++i) {
        if (i != inst.depot) perm.push_back(i);
    }
    std::sort(perm.begin(), perm.end());
    SolverResult res;
    res.is_exact = true;
    double best = std::numeric_limits<double>::infinity();
    std::vector<int> best_perm, best_breaks;
    do {
        std::vector<int> breaks;
        const double cost = split_cost(inst, perm, &breaks);
        ++res.iterations;
        if (cost < best) {
            best = cost;
            best_perm = perm;
            best_breaks = breaks;
        }
    } while (std::next_permutation(perm.begin(), perm.end()));
    res.tour = tour_from_split(inst, best_perm, best_breaks);
    return res;
}

namespace {

struct Routes {
    std::vector<std::vector<int>> routes;  // customers only
    std::vector<int> loads;
};

double route_cost(const Instance& inst, const std::vector<int>& route) {
    if (route.empty()) return 0.0;
    double c = inst.dist(inst.depot, route.front());
    for (size_t i = 0; i + 1 < route.size(); ++i) c += inst.dist(route[i], route[i + 1]);
    c += inst.dist(route.back(), inst.depot);
    return c;
}

// Intra-route 2-opt on the open depot..depot path.
bool improve_intra(const Instance& inst, std::vector<int>& route) {
    const int n = static_cast<int>(route.size());
    for (int i = 0; i < n - 1; ++i) {
        for (int j = i + 1; j < n; ++j) {
            const int a = i == 0 ? inst.depot : route[static_cast<size_t>(i - 1)];
            const int b = route[static_cast<size_t>(i)];
            const int c = route[static_cast<size_t>(j)];
            const int d = j == n - 1 ? inst.depot : route[static_cast<size_t>(j + 1)];
            const double delta = inst.dist(a, c) + inst.dist(b, d) - inst.dist(a, b) - inst.dist(c, d);
            if (delta < -1e-12) {
                std::reverse(route.begin() + i, route.begin() + j + 1);
                return true;
            }
        }
    }
    return false;
}

bool improve_relocate(const Instance& inst, Routes& r) {
    for (size_t ri = 0; ri < r.routes.size(); ++ri) {
        auto& src = r.routes[ri];
        for (size_t pi = 0; pi < src.size(); ++pi) {
            const int cust = src[pi];
            const int demand = inst.demands[static_cast<size_t>(cust)];
            const int prev = pi == 0 ? inst.depot : src[pi - 1];
            const int next = pi + 1 == src.size() ? inst.depot : src[pi + 1];
            const double removal = inst.dist(prev, next) - inst.dist(prev, cust) - inst.dist(cust, next);
            for (size_t rj = 0; rj < r.routes.size(); ++rj) {
                if (rj == ri) continue;
                if (r.loads[rj] + demand > inst.capacity) continue;
                auto& dst = r.routes[rj];
                for (size_t pj = 0; pj <= dst.size(); ++pj) {
                    const int a = pj == 0 ? inst.depot : dst[pj - 1];
                    const int b = pj == dst.size() ? inst.depot : dst[pj];
                    const double insertion = inst.dist(a, cust) + inst.dist(cust, b) - inst.dist(a, b);
                    if (removal + insertion < -1e-12) {
                        src.erase(src.begin() + static_cast<long>(pi));
                        dst.insert(dst.begin() + static_cast<long>(pj), cust);
                        r.loads[ri] -= demand;
                        r.loads[rj] += demand;
                        if (src.empty()) {
                            r.routes.erase(r.routes.begin() + static_cast<long>(ri));
                            r.loads.erase(r.loads.begin() + static_cast<long>(ri));
                        }
                        return true;
                    }
                }
            }
        }
    }
    return false;
}

}  // namespace

SolverResult heuristic_cvrp(const Instance& inst, RngStream& rng) {
    (void)rng;  // construction and search are deterministic; kept for the contract
    if (inst.kind != ProblemKind::CVRP) throw std::invalid_argument("heuristic_cvrp: not a CVRP instance");
    const int m = inst.num_customers();
    if (m < 1) throw std::invalid_argument("heuristic_cvrp: no customers");
    Routes r;
    std::vector<int> route_of(static_cast<size_t>(inst.size()), -1);
    for (int i = 0; i < inst.size(); ++i) {
        if (i == inst.depot) continue;
        route_of[static_cast<size_t>(i)] = static_cast<int>(r.routes.size());
        r.routes.push_back({i});
        r.loads.push_back(inst.demands[static_cast<size_t>(i)]);
    }
    // Clarke-Wright: merge route ends by descending savings.
    struct Saving {
        double s;
        int i, j;
    };
    std::vector<Saving> savings;
    for (int i = 0; i < inst.size(); ++i) {
        if (i == inst.depot) continue;
        for (int j = i + 1; j < inst.size(); ++j) {
            if (j == inst.depot) continue;
            savings.push_back({inst.dist(inst.depot, i) + inst.dist(inst.depot, j) - inst.dist(i, j), i, j});
        }
    }
    std::sort(savings.begin(), savings.end(), [](const Saving& a, const Saving& b) {
        if (a.s != b.s) return a.s > b.s;
        return std::tie(a.i, a.j) < std::tie(b.i, b.j);
    });
    for (const auto& sv : savings) {
        const int ri = route_of[static_cast<size_t>(sv.i)];
        const int rj = route_of[static_cast<size_t>(sv.j)];
        if (ri == rj || ri < 0 || rj < 0) continue;
        auto& a = r.routes[static_cast<size_t>(ri)];
        auto& b = r.routes[static_cast<size_t>(rj)];
        if (r.loads[static_cast<size_t>(ri)] + r.loads[static_cast<size_t>(rj)] > inst.capacity) continue;
        // Merge only if i and j are route endpoints that can be joined.
        const bool i_back = a.back() == sv.i;
        const bool i_front = a.front() == sv.i;
        const bool j_back = b.back() == sv.j;
        const bool j_front = b.front() == sv.j;
        if (!(i_back || i_front) || !(j_back || j_front)) continue;
        if (i_front) std::reverse(a.begin(), a.end());
        if (j_back) std::reverse(b.begin(), b.end());
        for (int c : b) {
            a.push_back(c);
            route_of[static_cast<size_t>(c)] = ri;
        }
        r.loads[static_cast<size_t>(ri)] += r.loads[static_cast<size_t>(rj)];
        b.clear();
        r.loads[static_cast<size_t>(rj)] = 0;
    }
    // Drop emptied routes.
    Routes compact;
    for (size_t i = 0; i < r.routes.size(); ++i) {
        if (!r.routes[i].empty()) {
            compact.routes.push_back(r.routes[i]);
            compact.loads.push_back(r.loads[i]);
        }
    }
    r = std::move(compact);

    SolverResult res;
    res.is_exact = false;
    auto total = [&]() {
        double t = 0.0;
        for (const auto& rt : r.routes) t += route_cost(inst, rt);
        return t;
    };
    res.improvement_log.push_back(total());
    bool improved = true;
    while (improved) {
        improved = false;
        for (auto& rt : r.routes) {
            while (improve_intra(inst, rt)) improved = true;
        }
        while (improve_relocate(inst, r)) improved = true;
        ++res.iterations;
        res.improvement_log.push_back(total());
    }
    for (const auto& rt : r.routes) {
        for (int c : rt) res.tour.sequence.push_back(c);
        res.tour.sequence.push_back(inst.depot);
    }
    res.tour.length = tour_length(inst, res.tour);
    return res;
}

SolverResult solve_reference(const Instance& inst) {
    RngStream rng(0x5eedULL);
    if (inst.kind == ProblemKind::TSP) {
        return inst.size() <= kExactTspLimit ? exact_tsp(inst) : heuristic_tsp(inst, rng);
    }
    return inst.num_customers() <= kExactCvrpLimit ? exact_cvrp(inst) : heuristic_cvrp(inst, rng);
}

}  // namespace amdkd
