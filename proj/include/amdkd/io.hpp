#pragma once

#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "amdkd/instancegen.hpp"
#include "amdkd/problems.hpp"

namespace amdkd {

// JSON-lines instance records; doubles round-trip bit-exactly.
struct InstanceRecord {
    std::string kind;  // distribution name
    int n = 0;
    uint64_t seed = 0;
    Instance instance;
};

std::string instance_to_jsonl(const InstanceRecord& rec);
InstanceRecord instance_from_jsonl(const std::string& line);

struct TourRecord {
    std::string instance_ref;  // "kind:n:seed" or file offset
    std::vector<int> sequence;
    double length = 0.0;
};

std::string tour_to_jsonl(const TourRecord& rec);
TourRecord tour_from_jsonl(const std::string& line);

// Reference-solution cache keyed by instance content hash.
uint64_t instance_hash(const Instance& inst);

struct ReferenceCache {
    std::map<uint64_t, std::pair<double, bool>> entries;  // hash -> (length, is_exact)

    void save(const std::string& path) const;
    static ReferenceCache load(const std::string& path);
};

// Flat key = value run configuration; '#' starts a comment. Unknown keys
// are rejected against the per-command schema.
class KeyValueConfig {
public:
    static KeyValueConfig parse(const std::string& text);
    static KeyValueConfig load(const std::string& path);

    bool has(const std::string& key) const;
    std::string get(const std::string& key) const;
    std::string get_or(const std::string& key, const std::string& fallback) const;
    long get_int(const std::string& key, long fallback) const;
    double get_double(const std::string& key, double fallback) const;

    void reject_unknown(const std::vector<std::string>& allowed) const;
    std::string echo() const;  // canonical re-serialization

private:
    std::map<std::string, std::string> values_;
};

}  // namespace amdkd
