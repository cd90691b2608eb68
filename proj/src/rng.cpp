#include "augrl/rng.hpp"

#include <cmath>

namespace augrl {

uint64_t mix64(uint64_t x) {
    // splitmix64 finalizer
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

uint64_t hash_string(const std::string& s) {
    uint64_t h = 0xCBF29CE484222325ULL;  // FNV-1a
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001B3ULL;
    }
    return h;
}

RandomStream::RandomStream(uint64_t seed, const std::string& name)
    : key_(mix64(mix64(seed) ^ hash_string(name))) {}

uint64_t RandomStream::next_u64() { return mix64(key_ ^ mix64(++counter_)); }

double RandomStream::uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double RandomStream::uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

double RandomStream::normal() {
    if (has_spare_) {
        has_spare_ = false;
        return spare_normal_;
    }
    double u1 = 0.0;
    do {
        u1 = uniform();
    } while (u1 <= 0.0);
    double u2 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    double theta = 2.0 * M_PI * u2;
    spare_normal_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
}

int RandomStream::uniform_int(int n) {
    // modulo bias is ~n/2^64, irrelevant here
    return static_cast<int>(next_u64() % static_cast<uint64_t>(n));
}

RandomStream RandomStream::fork(const std::string& name) const {
    RandomStream s;
    s.key_ = mix64(key_ ^ hash_string(name));
    s.counter_ = 0;
    s.has_spare_ = false;
    return s;
}

}  // namespace augrl
