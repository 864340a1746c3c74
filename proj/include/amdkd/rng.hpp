#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

namespace amdkd {

// Deterministic xoshiro256** stream seeded through splitmix64.
// Identical seeds produce identical sequences on every platform; all
// distributions are hand-rolled so no standard-library variance leaks in.
class RngStream {
public:
    explicit RngStream(uint64_t seed) : seed_(seed) {
        uint64_t x = seed;
        for (auto& si : s_) si = splitmix64(x);
    }

    uint64_t seed() const { return seed_; }

    // Derive an independent stream, e.g. one per instance or per epoch.
    RngStream derive(uint64_t salt) const {
        uint64_t x = seed_ ^ (0x9e3779b97f4a7c15ULL * (salt + 1));
        return RngStream(splitmix64(x));
    }

    uint64_t next_u64() {
        const uint64_t result = rotl(s_[1] * 5, 7) * 9;
        const uint64_t t = s_[1] << 17;
        s_[2] ^= s_[0];
        s_[3] ^= s_[1];
        s_[1] ^= s_[2];
        s_[0] ^= s_[3];
        s_[2] ^= t;
        s_[3] = rotl(s_[3], 45);
        return result;
    }

    // Uniform on [0, 1).
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Inclusive integer range.
    int uniform_int(int lo, int hi) {
        const uint64_t range = static_cast<uint64_t>(hi - lo) + 1;
        const uint64_t limit = UINT64_MAX - UINT64_MAX % range;
        uint64_t r;
        do {
            r = next_u64();
        } while (r >= limit);
        return lo + static_cast<int>(r % range);
    }

    // Box-Muller with the companion value cached.
    double normal(double mu, double sigma) {
        if (have_cached_) {
            have_cached_ = false;
            return mu + sigma * cached_;
        }
        double u1;
        do {
            u1 = uniform();
        } while (u1 <= 0.0);
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double z0 = r * std::cos(2.0 * M_PI * u2);
        cached_ = r * std::sin(2.0 * M_PI * u2);
        have_cached_ = true;
        return mu + sigma * z0;
    }

    double exponential(double rate) { return -std::log1p(-uniform()) / rate; }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (int i = static_cast<int>(v.size()) - 1; i > 0; --i) {
            std::swap(v[static_cast<size_t>(i)], v[static_cast<size_t>(uniform_int(0, i))]);
        }
    }

private:
    static uint64_t splitmix64(uint64_t& x) {
        uint64_t z = (x += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }
    static uint64_t rotl(uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

    uint64_t seed_;
    uint64_t s_[4];
    bool have_cached_ = false;
    double cached_ = 0.0;
};

}  // namespace amdkd
