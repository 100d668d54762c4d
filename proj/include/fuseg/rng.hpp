#pragma once

#include <cstdint>
#include <random>

namespace fuseg {

// splitmix64; used to derive well-separated seed streams from (seed, index, tag...).
inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t a) { return splitmix64(a); }

template <typename... Rest>
std::uint64_t derive_seed(std::uint64_t a, std::uint64_t b, Rest... rest) {
    return derive_seed(splitmix64(a) ^ (b + 0x9e3779b97f4a7c15ULL), rest...);
}

// Deterministic RNG. mt19937_64 has a fully specified output sequence, and the
// value mappings below are hand-rolled (std distributions are not portable
// across standard libraries), so every draw is reproducible bit-for-bit.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    std::uint64_t next_u64() { return gen_(); }

    // uniform in [0, 1)
    double uniform() {
        return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // uniform integer in [lo, hi], inclusive
    int uniform_int(int lo, int hi) {
        const std::uint64_t span = static_cast<std::uint64_t>(hi - lo) + 1;
        return lo + static_cast<int>(gen_() % span);
    }

    bool bernoulli(double p) { return uniform() < p; }

private:
    std::mt19937_64 gen_;
};

}  // namespace fuseg
