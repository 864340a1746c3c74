#include "amdkd/bench.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>
#include <stdexcept>

#include "amdkd/io.hpp"
#include "amdkd/solvers.hpp"

namespace amdkd {

long BenchmarkInstance::rounded_length(const std::vector<int>& sequence) const {
    long total = 0;
    const int n = static_cast<int>(sequence.size());
    auto d = [this](int i, int j) {
        const double dx = coords[static_cast<size_t>(i)].x - coords[static_cast<size_t>(j)].x;
        const double dy = coords[static_cast<size_t>(i)].y - coords[static_cast<size_t>(j)].y;
        return static_cast<long>(std::sqrt(dx * dx + dy * dy) + 0.5);
    };
    if (!is_cvrp) {
        for (int i = 0; i < n; ++i) total += d(sequence[static_cast<size_t>(i)], sequence[static_cast<size_t>((i + 1) % n)]);
    } else {
        int prev = depot;
        for (int node : sequence) {
            total += d(prev, node);
            prev = node;
        }
        if (prev != depot) total += d(prev, depot);
    }
    return total;
}

namespace {

struct Section {
    std::string key;
    std::string value;
};

// TSPLIB-style "KEY : value" header line; returns false at a section marker.
bool parse_header_line(const std::string& line, Section& out) {
    const auto colon = line.find(':');
    if (colon == std::string::npos) return false;
    auto trim = [](std::string s) {
        const auto b = s.find_first_not_of(" \t\r");
        const auto e = s.find_last_not_of(" \t\r");
        return b == std::string::npos ? std::string{} : s.substr(b, e - b + 1);
    };
    out.key = trim(line.substr(0, colon));
    out.value = trim(line.substr(colon + 1));
    return true;
}

std::string trimmed(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    const auto e = s.find_last_not_of(" \t\r");
    return b == std::string::npos ? std::string{} : s.substr(b, e - b + 1);
}

BenchmarkInstance parse_lib(const std::string& text, bool expect_cvrp) {
    BenchmarkInstance bi;
    bi.is_cvrp = expect_cvrp;
    std::istringstream is(text);
    std::string line;
    int lineno = 0;
    std::string edge_weight_type;
    std::vector<int> node_ids;
    std::vector<int> depot_ids;
    std::map<int, int> demand_by_id;
    enum class Mode { Header, Coords, Demands, Depots } mode = Mode::Header;
    while (std::getline(is, line)) {
        ++lineno;
        const std::string t = trimmed(line);
        if (t.empty()) continue;
        if (t == "EOF") break;
        if (t == "NODE_COORD_SECTION") {
            mode = Mode::Coords;
            continue;
        }
        if (t == "DEMAND_SECTION") {
            mode = Mode::Demands;
            continue;
        }
        if (t == "DEPOT_SECTION") {
            mode = Mode::Depots;
            continue;
        }
        if (mode == Mode::Header) {
            Section sec;
            if (!parse_header_line(t, sec)) {
                throw std::invalid_argument("parse error at line " + std::to_string(lineno) + ": " + t);
            }
            if (sec.key == "NAME") bi.name = sec.value;
            else if (sec.key == "DIMENSION") bi.dimension = std::stoi(sec.value);
            else if (sec.key == "EDGE_WEIGHT_TYPE") edge_weight_type = sec.value;
            else if (sec.key == "CAPACITY") bi.capacity = std::stoi(sec.value);
            // TYPE / COMMENT / others ignored
            continue;
        }
        std::istringstream ls(t);
        if (mode == Mode::Coords) {
            int id;
            double x, y;
            if (!(ls >> id >> x >> y)) {
                throw std::invalid_argument("parse error at line " + std::to_string(lineno) + ": bad coordinate");
            }
            node_ids.push_back(id);
            bi.coords.push_back({x, y});
        } else if (mode == Mode::Demands) {
            int id, dem;
            if (!(ls >> id >> dem)) {
                throw std::invalid_argument("parse error at line " + std::to_string(lineno) + ": bad demand");
            }
            demand_by_id[id] = dem;
        } else {
            int id;
            if (!(ls >> id)) {
                throw std::invalid_argument("parse error at line " + std::to_string(lineno) + ": bad depot id");
            }
            if (id >= 0) depot_ids.push_back(id);
        }
    }
    if (edge_weight_type != "EUC_2D") {
        throw std::invalid_argument("unsupported EDGE_WEIGHT_TYPE: " +
                                    (edge_weight_type.empty() ? std::string("<missing>") : edge_weight_type));
    }
    if (bi.dimension != static_cast<int>(bi.coords.size())) {
        throw std::invalid_argument("DIMENSION " + std::to_string(bi.dimension) + " does not match " +
                                    std::to_string(bi.coords.size()) + " coordinates");
    }
    if (expect_cvrp) {
        if (bi.capacity <= 0) throw std::invalid_argument("CVRP file missing CAPACITY");
        if (depot_ids.empty()) throw std::invalid_argument("CVRP file missing DEPOT_SECTION");
        bi.demands.resize(bi.coords.size(), 0);
        for (size_t i = 0; i < node_ids.size(); ++i) {
            auto it = demand_by_id.find(node_ids[i]);
            if (it == demand_by_id.end()) {
                throw std::invalid_argument("missing demand for node " + std::to_string(node_ids[i]));
            }
            bi.demands[i] = it->second;
        }
        // Reorder so the depot is index 0.
        int depot_pos = -1;
        for (size_t i = 0; i < node_ids.size(); ++i) {
            if (node_ids[i] == depot_ids.front()) depot_pos = static_cast<int>(i);
        }
        if (depot_pos < 0) throw std::invalid_argument("depot id not found in coordinates");
        if (depot_pos != 0) {
            std::swap(bi.coords[0], bi.coords[static_cast<size_t>(depot_pos)]);
            std::swap(bi.demands[0], bi.demands[static_cast<size_t>(depot_pos)]);
        }
        bi.depot = 0;
        if (bi.demands[0] != 0) throw std::invalid_argument("depot demand must be 0");
        // Pigeonhole sanity: total demand bounds the route count from below.
        long total = 0;
        for (int d : bi.demands) total += d;
        if (total <= 0) throw std::invalid_argument("non-positive total demand");
    }
    return bi;
}

}  // namespace

BenchmarkInstance parse_tsplib(const std::string& text) { return parse_lib(text, false); }
BenchmarkInstance parse_cvrplib(const std::string& text) { return parse_lib(text, true); }

std::string serialize_tsplib(const BenchmarkInstance& bi) {
    std::ostringstream os;
    os << "NAME : " << bi.name << "\n";
    os << "TYPE : " << (bi.is_cvrp ? "CVRP" : "TSP") << "\n";
    os << "DIMENSION : " << bi.dimension << "\n";
    os << "EDGE_WEIGHT_TYPE : EUC_2D\n";
    if (bi.is_cvrp) os << "CAPACITY : " << bi.capacity << "\n";
    os << "NODE_COORD_SECTION\n";
    os.precision(17);
    for (size_t i = 0; i < bi.coords.size(); ++i) {
        os << (i + 1) << " " << bi.coords[i].x << " " << bi.coords[i].y << "\n";
    }
    if (bi.is_cvrp) {
        os << "DEMAND_SECTION\n";
        for (size_t i = 0; i < bi.demands.size(); ++i) os << (i + 1) << " " << bi.demands[i] << "\n";
        os << "DEPOT_SECTION\n1\n-1\n";
    }
    os << "EOF\n";
    return os.str();
}

Instance to_instance(const BenchmarkInstance& bi, bool normalize) {
    Instance inst;
    inst.kind = bi.is_cvrp ? ProblemKind::CVRP : ProblemKind::TSP;
    inst.coords = bi.coords;
    if (bi.is_cvrp) {
        inst.depot = 0;
        inst.demands = bi.demands;
        inst.capacity = bi.capacity;
    }
    if (normalize) inst.coords = normalize_coords(std::move(inst.coords));
    return inst;
}

std::string to_string(EvalSpec::Mode mode) {
    switch (mode) {
        case EvalSpec::Mode::Greedy: return "greedy";
        case EvalSpec::Mode::GreedyAug8: return "greedy_aug8";
        case EvalSpec::Mode::SampleK: return "sample_k";
    }
    throw std::logic_error("bad mode");
}

double model_tour_length(const Instance& inst, const PolicyParams& params, const EvalSpec& spec,
                         RngStream& rng) {
    switch (spec.mode) {
        case EvalSpec::Mode::Greedy:
            return greedy_length(inst, params);
        case EvalSpec::Mode::GreedyAug8:
            return greedy_aug8_length(inst, params);
        case EvalSpec::Mode::SampleK: {
            double best = std::numeric_limits<double>::infinity();
            for (int k = 0; k < spec.sample_k; ++k) {
                best = std::min(best, rollout(inst, params, DecodeMode::Sample, &rng).tour.length);
            }
            return best;
        }
    }
    throw std::logic_error("bad mode");
}

EvalReport evaluate(const PolicyParams& params, const std::vector<DistributionSpec>& dists,
                    ProblemKind problem, int n_nodes, int count, const EvalSpec& spec,
                    uint64_t seed) {
    EvalReport report;
    for (const auto& dist : dists) {
        RngStream gen(seed ^ (0x9e37ULL * (static_cast<uint64_t>(dist.kind) + 1)));
        RngStream sample_rng(spec.seed ^ static_cast<uint64_t>(dist.kind));
        double sum = 0.0;
        int used = 0;
        for (int i = 0; i < count; ++i) {
            const Instance inst = make_instance(dist, problem, n_nodes, gen.next_u64());
            const double ref = solve_reference(inst).tour.length;
            if (!(ref > 0.0)) continue;  // skip missing/degenerate references
            const double len = model_tour_length(inst, params, spec, sample_rng);
            const double gap = (len - ref) / ref;
            EvalRow row;
            row.distribution = to_string(dist.kind);
            row.index = i;
            row.model_length = len;
            row.reference_length = ref;
            row.gap = gap;
            report.rows.push_back(row);
            sum += gap;
            ++used;
        }
        report.names.push_back(to_string(dist.kind));
        report.gaps.push_back(used > 0 ? sum / used : std::numeric_limits<double>::quiet_NaN());
    }
    double total = 0.0;
    for (double g : report.gaps) total += g;
    report.overall = total / static_cast<double>(report.gaps.size());
    return report;
}

}  // namespace amdkd
