#pragma once

#include <array>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace amdkd {

enum class ProblemKind { TSP, CVRP };

struct Point {
    double x = 0.0;
    double y = 0.0;
};

inline double euclid(const Point& a, const Point& b) {
    return std::hypot(a.x - b.x, a.y - b.y);
}

// A VRP instance over the complete Euclidean graph of its coordinates.
// TSP instances carry no demand data; CVRP instances have a depot,
// per-node integer demands (0 at the depot) and a vehicle capacity.
struct Instance {
    ProblemKind kind = ProblemKind::TSP;
    std::vector<Point> coords;
    int depot = 0;
    std::vector<int> demands;
    int capacity = 0;

    int size() const { return static_cast<int>(coords.size()); }
    int num_customers() const { return kind == ProblemKind::CVRP ? size() - 1 : size(); }
    double dist(int i, int j) const { return euclid(coords[static_cast<size_t>(i)], coords[static_cast<size_t>(j)]); }
};

// TSP: an open permutation, closed implicitly in the length computation.
// CVRP: customer/depot visit order starting implicitly at the depot; the
// final depot return is appended automatically if absent.
struct Tour {
    std::vector<int> sequence;
    double length = 0.0;
};

struct Violation {
    std::string what;
};

// Single-owner mutable state for one sequential construction.
struct ConstructionState {
    std::vector<int> sequence;
    std::vector<char> visited;
    int current = -1;     // -1 before the first TSP action; depot for CVRP
    int remaining = 0;    // CVRP remaining capacity
    int visited_customers = 0;
    bool done = false;
};

ConstructionState initial_state(const Instance& inst);

double tour_length(const Instance& inst, const Tour& tour);

std::optional<Violation> validate_tour(const Instance& inst, const Tour& tour);

std::vector<char> feasible_mask(const ConstructionState& state, const Instance& inst);

// Applies the action, returns the done flag. Throws on a masked action.
bool env_step(ConstructionState& state, int action, const Instance& inst);

// Builds a Tour from a finished construction, appending the closing depot
// for CVRP if the rollout stopped right after the last customer.
Tour finish_tour(const Instance& inst, const ConstructionState& state);

// The 8 symmetries of the unit square; element 0 is the identity.
std::array<Instance, 8> augment8(const Instance& inst);

}  // namespace amdkd
