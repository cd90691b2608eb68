#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace augrl {

// Counter-based random stream. A stream is fully determined by (seed, name):
// draw i is a pure function of the key and i, so independently named streams
// never perturb each other no matter how many values each one consumes.
class RandomStream {
public:
    RandomStream() : RandomStream(0, "default") {}
    RandomStream(uint64_t seed, const std::string& name);

    uint64_t next_u64();
    double uniform();                    // [0, 1)
    double uniform(double lo, double hi);
    double normal();                     // standard normal (Box-Muller)
    int uniform_int(int n);              // {0, ..., n-1}
    RandomStream fork(const std::string& name) const;  // derived independent stream

    uint64_t key() const { return key_; }

private:
    uint64_t key_ = 0;
    uint64_t counter_ = 0;
    double spare_normal_ = 0.0;
    bool has_spare_ = false;
};

uint64_t hash_string(const std::string& s);
uint64_t mix64(uint64_t x);

}  // namespace augrl
