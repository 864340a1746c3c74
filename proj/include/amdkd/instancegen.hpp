#pragma once

#include <string>
#include <vector>

#include "amdkd/problems.hpp"
#include "amdkd/rng.hpp"

namespace amdkd {

enum class DistributionKind { Uniform, Cluster, Mixed, Expansion, Implosion, Explosion, Grid };

std::string to_string(DistributionKind kind);
DistributionKind distribution_from_string(const std::string& name);

struct DistributionSpec {
    DistributionKind kind = DistributionKind::Uniform;
    int n_clusters = 3;
    double cluster_sigma = 0.07;
    double mutation_radius = 0.3;  // r, R_ic, R_ec, R_g
    double exp_rate = 10.0;        // lambda
    double cluster_mean_lo = 0.2;
    double cluster_mean_hi = 0.8;

    void validate() const;
};

struct CvrpSpec {
    int demand_lo = 1;
    int demand_hi = 9;
    int capacity = 0;  // 0 means: derive from n
};

// Per-generator debug captures, exposed so statistical checks can look at
// the pre-normalization geometry.
struct ExpansionDebug {
    double a = 0.0, b = 0.0;
    std::vector<Point> pre_norm;
};
struct ImplosionDebug {
    Point centroid;
    double inner_radius = 0.0;
};
struct ExplosionDebug {
    Point centroid;
    std::vector<Point> pre_norm;
};
struct GridDebug {
    Point box_origin;
    int inside_count = 0;
    double pitch = 0.0;
    std::vector<int> relocated;
};

std::vector<Point> gen_uniform(int n, RngStream& rng);
std::vector<Point> gen_cluster(int n, const DistributionSpec& spec, RngStream& rng);
// labels, when given, receives 0 (uniform part) / 1 (clustered part) per point.
std::vector<Point> gen_mixed(int n, RngStream& rng, const DistributionSpec& spec = {},
                             std::vector<int>* labels = nullptr);
std::vector<Point> gen_expansion(int n, const DistributionSpec& spec, RngStream& rng,
                                 ExpansionDebug* dbg = nullptr);
std::vector<Point> gen_implosion(int n, const DistributionSpec& spec, RngStream& rng,
                                 ImplosionDebug* dbg = nullptr);
std::vector<Point> gen_explosion(int n, const DistributionSpec& spec, RngStream& rng,
                                 ExplosionDebug* dbg = nullptr);
std::vector<Point> gen_grid(int n, const DistributionSpec& spec, RngStream& rng,
                            GridDebug* dbg = nullptr);

// Per-axis min-max normalization; a degenerate axis collapses to 0.5.
std::vector<Point> normalize_coords(std::vector<Point> points);

std::vector<Point> generate_coords(const DistributionSpec& spec, int n, RngStream& rng);

// Capacity table: Q(20)=30, Q(50)=40, Q(100)=50, else max(30, round(n/2)).
int default_capacity(int n_customers);

// coords must hold n+1 points with the depot first.
Instance attach_cvrp(std::vector<Point> coords, int n_customers, RngStream& rng,
                     const CvrpSpec& cvrp = {});

// Convenience: full instance from (distribution, problem kind, n, seed).
// For CVRP the depot is drawn from the same distribution (n+1 points).
Instance make_instance(const DistributionSpec& spec, ProblemKind problem, int n, uint64_t seed);

}  // namespace amdkd
