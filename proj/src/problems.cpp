#include "amdkd/problems.hpp"

#include <algorithm>

namespace amdkd {

ConstructionState initial_state(const Instance& inst) {
    ConstructionState s;
    s.visited.assign(static_cast<size_t>(inst.size()), 0);
    if (inst.kind == ProblemKind::CVRP) {
        s.current = inst.depot;
        s.remaining = inst.capacity;
        s.visited[static_cast<size_t>(inst.depot)] = 1;
    }
    return s;
}

double tour_length(const Instance& inst, const Tour& tour) {
    if (auto v = validate_tour(inst, tour)) {
        throw std::invalid_argument("infeasible tour: " + v->what);
    }
    const auto& seq = tour.sequence;
    double len = 0.0;
    if (inst.kind == ProblemKind::TSP) {
        const int n = inst.size();
        for (int i = 0; i < n; ++i) {
            len += inst.dist(seq[static_cast<size_t>(i)], seq[static_cast<size_t>((i + 1) % n)]);
        }
    } else {
        int prev = inst.depot;
        for (int node : seq) {
            len += inst.dist(prev, node);
            prev = node;
        }
        if (prev != inst.depot) len += inst.dist(prev, inst.depot);
    }
    return len;
}

std::optional<Violation> validate_tour(const Instance& inst, const Tour& tour) {
    const auto& seq = tour.sequence;
    const int n = inst.size();
    std::vector<int> count(static_cast<size_t>(n), 0);
    for (int node : seq) {
        if (node < 0 || node >= n) return Violation{"node index " + std::to_string(node) + " out of range"};
        count[static_cast<size_t>(node)]++;
    }
    if (inst.kind == ProblemKind::TSP) {
        for (int i = 0; i < n; ++i) {
            if (count[static_cast<size_t>(i)] == 0) return Violation{"node " + std::to_string(i) + " missing"};
            if (count[static_cast<size_t>(i)] > 1) return Violation{"node " + std::to_string(i) + " visited twice"};
        }
        return std::nullopt;
    }
    for (int i = 0; i < n; ++i) {
        if (i == inst.depot) continue;
        if (count[static_cast<size_t>(i)] == 0) return Violation{"customer " + std::to_string(i) + " missing"};
        if (count[static_cast<size_t>(i)] > 1) return Violation{"customer " + std::to_string(i) + " visited twice"};
    }
    // Per-sub-tour capacity; sub-tours are depot-to-depot segments.
    int load = 0;
    int sub = 0;
    for (int node : seq) {
        if (node == inst.depot) {
            load = 0;
            ++sub;
        } else {
            load += inst.demands[static_cast<size_t>(node)];
            if (load > inst.capacity) {
                return Violation{"sub-tour " + std::to_string(sub) + " exceeds capacity at node " + std::to_string(node)};
            }
        }
    }
    return std::nullopt;
}

std::vector<char> feasible_mask(const ConstructionState& state, const Instance& inst) {
    const int n = inst.size();
    std::vector<char> mask(static_cast<size_t>(n), 0);
    if (inst.kind == ProblemKind::TSP) {
        for (int i = 0; i < n; ++i) mask[static_cast<size_t>(i)] = !state.visited[static_cast<size_t>(i)];
    } else {
        for (int i = 0; i < n; ++i) {
            if (i == inst.depot) {
                mask[static_cast<size_t>(i)] = state.current != inst.depot;  // no depot self-loop
            } else if (!state.visited[static_cast<size_t>(i)] && inst.demands[static_cast<size_t>(i)] <= state.remaining) {
                mask[static_cast<size_t>(i)] = 1;
            }
        }
    }
    bool any = false;
    for (char m : mask) any = any || m;
    if (!any) throw std::logic_error("feasible_mask: no feasible action (unreachable state)");
    return mask;
}

bool env_step(ConstructionState& state, int action, const Instance& inst) {
    const auto mask = feasible_mask(state, inst);
    if (!mask[static_cast<size_t>(action)]) {
        throw std::invalid_argument("illegal action " + std::to_string(action));
    }
    state.sequence.push_back(action);
    if (inst.kind == ProblemKind::TSP) {
        state.visited[static_cast<size_t>(action)] = 1;
        state.current = action;
        state.visited_customers++;
        state.done = state.visited_customers == inst.size();
    } else {
        if (action == inst.depot) {
            state.remaining = inst.capacity;  // full replenishment
        } else {
            state.visited[static_cast<size_t>(action)] = 1;
            state.remaining -= inst.demands[static_cast<size_t>(action)];
            state.visited_customers++;
        }
        state.current = action;
        state.done = state.visited_customers == inst.num_customers() && state.current == inst.depot;
    }
    return state.done;
}

Tour finish_tour(const Instance& inst, const ConstructionState& state) {
    Tour t;
    t.sequence = state.sequence;
    if (inst.kind == ProblemKind::CVRP && (t.sequence.empty() || t.sequence.back() != inst.depot)) {
        t.sequence.push_back(inst.depot);
    }
    t.length = tour_length(inst, t);
    return t;
}

std::array<Instance, 8> augment8(const Instance& inst) {
    std::array<Instance, 8> out;
    for (int k = 0; k < 8; ++k) {
        Instance a = inst;
        for (auto& p : a.coords) {
            const double x = p.x;
            const double y = p.y;
            switch (k) {
                case 0: p = {x, y}; break;
                case 1: p = {y, x}; break;
                case 2: p = {x, 1 - y}; break;
                case 3: p = {1 - x, y}; break;
                case 4: p = {1 - x, 1 - y}; break;
                case 5: p = {y, 1 - x}; break;
                case 6: p = {1 - y, x}; break;
                case 7: p = {1 - y, 1 - x}; break;
                default: break;
            }
        }
        out[static_cast<size_t>(k)] = std::move(a);
    }
    return out;
}

}  // namespace amdkd
