#include "amdkd/io.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace amdkd {

using nlohmann::json;

std::string instance_to_jsonl(const InstanceRecord& rec) {
    json j;
    j["kind"] = rec.kind;
    j["n"] = rec.n;
    j["seed"] = rec.seed;
    json coords = json::array();
    for (const auto& p : rec.instance.coords) coords.push_back({p.x, p.y});
    j["coords"] = std::move(coords);
    if (rec.instance.kind == ProblemKind::CVRP) {
        j["depot_index"] = rec.instance.depot;
        j["demands"] = rec.instance.demands;
        j["capacity"] = rec.instance.capacity;
    }
    return j.dump();
}

InstanceRecord instance_from_jsonl(const std::string& line) {
    const json j = json::parse(line);
    InstanceRecord rec;
    rec.kind = j.at("kind").get<std::string>();
    rec.n = j.at("n").get<int>();
    rec.seed = j.at("seed").get<uint64_t>();
    for (const auto& c : j.at("coords")) {
        rec.instance.coords.push_back({c.at(0).get<double>(), c.at(1).get<double>()});
    }
    if (j.contains("capacity")) {
        rec.instance.kind = ProblemKind::CVRP;
        rec.instance.depot = j.at("depot_index").get<int>();
        rec.instance.demands = j.at("demands").get<std::vector<int>>();
        rec.instance.capacity = j.at("capacity").get<int>();
    }
    return rec;
}

std::string tour_to_jsonl(const TourRecord& rec) {
    json j;
    j["instance"] = rec.instance_ref;
    j["sequence"] = rec.sequence;
    j["length"] = rec.length;
    return j.dump();
}

TourRecord tour_from_jsonl(const std::string& line) {
    const json j = json::parse(line);
    TourRecord rec;
    rec.instance_ref = j.at("instance").get<std::string>();
    rec.sequence = j.at("sequence").get<std::vector<int>>();
    rec.length = j.at("length").get<double>();
    return rec;
}

uint64_t instance_hash(const Instance& inst) {
    uint64_t h = 0xcbf29ce484222325ULL;
    auto mix = [&h](const void* data, size_t len) {
        const auto* p = static_cast<const unsigned char*>(data);
        for (size_t i = 0; i < len; ++i) {
            h ^= p[i];
            h *= 0x100000001b3ULL;
        }
    };
    const int kind = inst.kind == ProblemKind::TSP ? 0 : 1;
    mix(&kind, sizeof(kind));
    for (const auto& p : inst.coords) {
        mix(&p.x, sizeof(double));
        mix(&p.y, sizeof(double));
    }
    for (int d : inst.demands) mix(&d, sizeof(int));
    mix(&inst.capacity, sizeof(int));
    mix(&inst.depot, sizeof(int));
    return h;
}

void ReferenceCache::save(const std::string& path) const {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot write cache: " + path);
    for (const auto& [hash, entry] : entries) {
        json j;
        j["hash"] = hash;
        j["length"] = entry.first;
        j["is_exact"] = entry.second;
        os << j.dump() << "\n";
    }
}

ReferenceCache ReferenceCache::load(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot read cache: " + path);
    ReferenceCache cache;
    std::string line;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        const json j = json::parse(line);
        cache.entries[j.at("hash").get<uint64_t>()] = {j.at("length").get<double>(),
                                                       j.at("is_exact").get<bool>()};
    }
    return cache;
}

KeyValueConfig KeyValueConfig::parse(const std::string& text) {
    KeyValueConfig cfg;
    std::istringstream is(text);
    std::string line;
    int lineno = 0;
    auto trim = [](std::string s) {
        const auto b = s.find_first_not_of(" \t\r");
        const auto e = s.find_last_not_of(" \t\r");
        return b == std::string::npos ? std::string{} : s.substr(b, e - b + 1);
    };
    while (std::getline(is, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw std::invalid_argument("config line " + std::to_string(lineno) + ": expected key = value");
        }
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty()) throw std::invalid_argument("config line " + std::to_string(lineno) + ": empty key");
        if (cfg.values_.count(key)) {
            throw std::invalid_argument("config line " + std::to_string(lineno) + ": duplicate key " + key);
        }
        cfg.values_[key] = value;
    }
    return cfg;
}

KeyValueConfig KeyValueConfig::load(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot read config: " + path);
    std::ostringstream ss;
    ss << is.rdbuf();
    return parse(ss.str());
}

bool KeyValueConfig::has(const std::string& key) const { return values_.count(key) > 0; }

std::string KeyValueConfig::get(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end()) throw std::invalid_argument("config: missing key " + key);
    return it->second;
}

std::string KeyValueConfig::get_or(const std::string& key, const std::string& fallback) const {
    auto it = values_.find(key);
    return it == values_.end() ? fallback : it->second;
}

long KeyValueConfig::get_int(const std::string& key, long fallback) const {
    auto it = values_.find(key);
    return it == values_.end() ? fallback : std::stol(it->second);
}

double KeyValueConfig::get_double(const std::string& key, double fallback) const {
    auto it = values_.find(key);
    return it == values_.end() ? fallback : std::stod(it->second);
}

void KeyValueConfig::reject_unknown(const std::vector<std::string>& allowed) const {
    for (const auto& [key, value] : values_) {
        (void)value;
        if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
            throw std::invalid_argument("config: unknown key " + key);
        }
    }
}

std::string KeyValueConfig::echo() const {
    std::ostringstream os;
    for (const auto& [key, value] : values_) os << key << " = " << value << "\n";
    return os.str();
}

}  // namespace amdkd
