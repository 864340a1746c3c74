#include "amdkd/instancegen.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace amdkd {

std::string to_string(DistributionKind kind) {
    switch (kind) {
        case DistributionKind::Uniform: return "uniform";
        case DistributionKind::Cluster: return "cluster";
        case DistributionKind::Mixed: return "mixed";
        case DistributionKind::Expansion: return "expansion";
        case DistributionKind::Implosion: return "implosion";
        case DistributionKind::Explosion: return "explosion";
        case DistributionKind::Grid: return "grid";
    }
    throw std::logic_error("bad DistributionKind");
}

DistributionKind distribution_from_string(const std::string& name) {
    if (name == "uniform") return DistributionKind::Uniform;
    if (name == "cluster") return DistributionKind::Cluster;
    if (name == "mixed") return DistributionKind::Mixed;
    if (name == "expansion") return DistributionKind::Expansion;
    if (name == "implosion") return DistributionKind::Implosion;
    if (name == "explosion") return DistributionKind::Explosion;
    if (name == "grid") return DistributionKind::Grid;
    throw std::invalid_argument("unknown distribution: " + name);
}

void DistributionSpec::validate() const {
    if (cluster_sigma <= 0.0) throw std::invalid_argument("cluster_sigma must be > 0");
    if (mutation_radius <= 0.0 || mutation_radius >= 1.0) throw std::invalid_argument("mutation_radius must be in (0,1)");
    if (exp_rate <= 0.0) throw std::invalid_argument("exp_rate must be > 0");
    if (n_clusters < 1) throw std::invalid_argument("n_clusters must be >= 1");
}

static void require_size(int n, int minimum) {
    if (n < minimum) throw std::invalid_argument("invalid size n=" + std::to_string(n));
}

std::vector<Point> gen_uniform(int n, RngStream& rng) {
    require_size(n, 2);
    std::vector<Point> pts(static_cast<size_t>(n));
    for (auto& p : pts) {
        p.x = rng.uniform();
        p.y = rng.uniform();
    }
    return pts;
}

std::vector<Point> gen_cluster(int n, const DistributionSpec& spec, RngStream& rng) {
    spec.validate();
    require_size(n, spec.n_clusters);
    std::vector<Point> means(static_cast<size_t>(spec.n_clusters));
    for (auto& m : means) {
        m.x = rng.uniform(spec.cluster_mean_lo, spec.cluster_mean_hi);
        m.y = rng.uniform(spec.cluster_mean_lo, spec.cluster_mean_hi);
    }
    std::vector<Point> pts(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) {
        // Round-robin assignment keeps clusters balanced and deterministic.
        const Point& mu = means[static_cast<size_t>(i % spec.n_clusters)];
        double x = rng.normal(mu.x, spec.cluster_sigma);
        double y = rng.normal(mu.y, spec.cluster_sigma);
        pts[static_cast<size_t>(i)] = {std::clamp(x, 0.0, 1.0), std::clamp(y, 0.0, 1.0)};
    }
    return pts;
}

std::vector<Point> gen_mixed(int n, RngStream& rng, const DistributionSpec& spec,
                             std::vector<int>* labels) {
    require_size(n, 2);
    const int n_uni = n / 2;
    std::vector<Point> pts(static_cast<size_t>(n_uni));
    for (auto& p : pts) p = {rng.uniform(), rng.uniform()};
    DistributionSpec one = spec;
    one.n_clusters = 1;
    auto clustered = gen_cluster(n - n_uni, one, rng);
    std::vector<std::pair<Point, int>> tagged;
    tagged.reserve(static_cast<size_t>(n));
    for (const auto& p : pts) tagged.push_back({p, 0});
    for (const auto& p : clustered) tagged.push_back({p, 1});
    rng.shuffle(tagged);
    std::vector<Point> out(static_cast<size_t>(n));
    if (labels) labels->assign(static_cast<size_t>(n), 0);
    for (int i = 0; i < n; ++i) {
        out[static_cast<size_t>(i)] = tagged[static_cast<size_t>(i)].first;
        if (labels) (*labels)[static_cast<size_t>(i)] = tagged[static_cast<size_t>(i)].second;
    }
    return out;
}

std::vector<Point> normalize_coords(std::vector<Point> points) {
    if (points.size() < 2) throw std::invalid_argument("normalize_coords needs at least two points");
    double xmin = points[0].x, xmax = points[0].x, ymin = points[0].y, ymax = points[0].y;
    for (const auto& p : points) {
        xmin = std::min(xmin, p.x);
        xmax = std::max(xmax, p.x);
        ymin = std::min(ymin, p.y);
        ymax = std::max(ymax, p.y);
    }
    const bool xdeg = xmax == xmin;
    const bool ydeg = ymax == ymin;
    for (auto& p : points) {
        p.x = xdeg ? 0.5 : (p.x - xmin) / (xmax - xmin);
        p.y = ydeg ? 0.5 : (p.y - ymin) / (ymax - ymin);
    }
    return points;
}

std::vector<Point> gen_expansion(int n, const DistributionSpec& spec, RngStream& rng,
                                 ExpansionDebug* dbg) {
    spec.validate();
    auto pts = gen_uniform(n, rng);
    const double b = rng.uniform();
    const double a = b < 0.5 ? rng.uniform(0.0, 3.0) : rng.uniform(-3.0, 0.0);
    const double r = spec.mutation_radius;
    const double norm = std::sqrt(a * a + 1.0);
    for (auto& p : pts) {
        // Signed orthogonal distance to y = a x + b.
        const double signed_d = (p.y - a * p.x - b) / norm;
        if (std::abs(signed_d) < r) {
            const double gamma = rng.exponential(spec.exp_rate);
            const double side = signed_d >= 0.0 ? 1.0 : -1.0;
            // Foot of the perpendicular, then push out to distance r + gamma.
            const double fx = p.x - signed_d * (-a / norm);
            const double fy = p.y - signed_d * (1.0 / norm);
            p.x = fx + side * (r + gamma) * (-a / norm);
            p.y = fy + side * (r + gamma) * (1.0 / norm);
        }
    }
    if (dbg) {
        dbg->a = a;
        dbg->b = b;
        dbg->pre_norm = pts;
    }
    return normalize_coords(std::move(pts));
}

std::vector<Point> gen_implosion(int n, const DistributionSpec& spec, RngStream& rng,
                                 ImplosionDebug* dbg) {
    spec.validate();
    auto pts = gen_uniform(n, rng);
    const Point centroid{rng.uniform(), rng.uniform()};
    const double r_outer = spec.mutation_radius;
    const double r_inner = rng.uniform(0.0, r_outer);
    const double scale = r_inner / r_outer;
    for (auto& p : pts) {
        const double dx = p.x - centroid.x;
        const double dy = p.y - centroid.y;
        if (std::hypot(dx, dy) <= r_outer) {
            p.x = centroid.x + dx * scale;
            p.y = centroid.y + dy * scale;
        }
    }
    if (dbg) {
        dbg->centroid = centroid;
        dbg->inner_radius = r_inner;
    }
    return pts;
}

std::vector<Point> gen_explosion(int n, const DistributionSpec& spec, RngStream& rng,
                                 ExplosionDebug* dbg) {
    spec.validate();
    auto pts = gen_uniform(n, rng);
    const Point centroid{rng.uniform(), rng.uniform()};
    const double r = spec.mutation_radius;
    for (auto& p : pts) {
        double dx = p.x - centroid.x;
        double dy = p.y - centroid.y;
        double d = std::hypot(dx, dy);
        if (d < r) {
            if (d == 0.0) {
                const double phi = rng.uniform(0.0, 2.0 * M_PI);
                dx = std::cos(phi);
                dy = std::sin(phi);
                d = 1.0;
            }
            const double gamma = rng.exponential(spec.exp_rate);
            p.x = centroid.x + dx / d * (r + gamma);
            p.y = centroid.y + dy / d * (r + gamma);
        }
    }
    if (dbg) {
        dbg->centroid = centroid;
        dbg->pre_norm = pts;
    }
    return normalize_coords(std::move(pts));
}

std::vector<Point> gen_grid(int n, const DistributionSpec& spec, RngStream& rng, GridDebug* dbg) {
    spec.validate();
    auto pts = gen_uniform(n, rng);
    const double rg = spec.mutation_radius;
    const Point origin{rng.uniform(0.0, 1.0 - rg), rng.uniform(0.0, 1.0 - rg)};
    std::vector<int> inside;
    for (int i = 0; i < n; ++i) {
        const auto& p = pts[static_cast<size_t>(i)];
        if (p.x >= origin.x && p.x <= origin.x + rg && p.y >= origin.y && p.y <= origin.y + rg) {
            inside.push_back(i);
        }
    }
    const int k = static_cast<int>(inside.size());
    double pitch = 0.0;
    if (k > 0) {
        const int side = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(k))));
        pitch = side > 1 ? rg / (side - 1) : 0.0;
        // Row-major fill from the box's bottom-left corner.
        for (int j = 0; j < k; ++j) {
            const int row = j / side;
            const int col = j % side;
            pts[static_cast<size_t>(inside[static_cast<size_t>(j)])] = {origin.x + col * pitch,
                                                                        origin.y + row * pitch};
        }
    }
    if (dbg) {
        dbg->box_origin = origin;
        dbg->inside_count = k;
        dbg->pitch = pitch;
        dbg->relocated = inside;
    }
    return pts;
}

std::vector<Point> generate_coords(const DistributionSpec& spec, int n, RngStream& rng) {
    switch (spec.kind) {
        case DistributionKind::Uniform: return gen_uniform(n, rng);
        case DistributionKind::Cluster: return gen_cluster(n, spec, rng);
        case DistributionKind::Mixed: return gen_mixed(n, rng, spec);
        case DistributionKind::Expansion: return gen_expansion(n, spec, rng);
        case DistributionKind::Implosion: return gen_implosion(n, spec, rng);
        case DistributionKind::Explosion: return gen_explosion(n, spec, rng);
        case DistributionKind::Grid: return gen_grid(n, spec, rng);
    }
    throw std::logic_error("bad DistributionKind");
}

int default_capacity(int n_customers) {
    if (n_customers == 20) return 30;
    if (n_customers == 50) return 40;
    if (n_customers == 100) return 50;
    return std::max(30, static_cast<int>(std::lround(n_customers / 2.0)));
}

Instance attach_cvrp(std::vector<Point> coords, int n_customers, RngStream& rng,
                     const CvrpSpec& cvrp) {
    if (n_customers < 1) throw std::invalid_argument("invalid size n=" + std::to_string(n_customers));
    if (static_cast<int>(coords.size()) != n_customers + 1) {
        throw std::invalid_argument("attach_cvrp expects n+1 points (depot first)");
    }
    Instance inst;
    inst.kind = ProblemKind::CVRP;
    inst.coords = std::move(coords);
    inst.depot = 0;
    inst.capacity = cvrp.capacity > 0 ? cvrp.capacity : default_capacity(n_customers);
    inst.demands.assign(static_cast<size_t>(n_customers + 1), 0);
    for (int i = 1; i <= n_customers; ++i) {
        inst.demands[static_cast<size_t>(i)] = rng.uniform_int(cvrp.demand_lo, cvrp.demand_hi);
    }
    return inst;
}

Instance make_instance(const DistributionSpec& spec, ProblemKind problem, int n, uint64_t seed) {
    RngStream rng(seed);
    if (problem == ProblemKind::TSP) {
        Instance inst;
        inst.kind = ProblemKind::TSP;
        inst.coords = generate_coords(spec, n, rng);
        return inst;
    }
    auto coords = generate_coords(spec, n + 1, rng);
    return attach_cvrp(std::move(coords), n, rng);
}

}  // namespace amdkd
