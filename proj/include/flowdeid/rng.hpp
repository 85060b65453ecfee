#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace flowdeid {

// Deterministic stream splitting: a master seed plus a purpose tag and an
// index derive an independent substream seed. Every randomized stage of the
// pipeline draws from its own named substream, so runs replay bit-exactly
// from a single recorded seed.
//
// Mixing is FNV-1a over the tag followed by splitmix64 finalization; the
// generator is std::mt19937_64 (fully specified by the standard). Gaussians
// use an explicit Box-Muller transform because std::normal_distribution is
// implementation-defined.
std::uint64_t derive_seed(std::uint64_t master, std::string_view purpose, std::uint64_t index = 0);

std::uint64_t splitmix64(std::uint64_t x);

class RandomStream {
public:
    explicit RandomStream(std::uint64_t seed) : gen_(seed) {}

    std::uint64_t next_u64() { return gen_(); }

    // [0, 1)
    double uniform() {
        return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Standard normal via Box-Muller; pairs are cached.
    double normal();

    // Uniform integer in [0, n) by rejection, bias-free.
    std::uint64_t below(std::uint64_t n);

    int uniform_int(int lo, int hi) {  // inclusive bounds
        return lo + static_cast<int>(below(static_cast<std::uint64_t>(hi - lo + 1)));
    }

private:
    std::mt19937_64 gen_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

inline RandomStream substream(std::uint64_t master, std::string_view purpose, std::uint64_t index = 0) {
    return RandomStream(derive_seed(master, purpose, index));
}

}  // namespace flowdeid
