#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <utility>
#include <vector>

namespace dpgen {

// Portable random source. The engine is std::mt19937_64, whose output
// sequence is fixed by the standard; the conversions to uniform and normal
// variates are done here so results do not depend on the standard library.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    // Uniform in [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Standard normal via Box-Muller; the second variate of each pair is cached.
    double normal();

    // Unbiased integer in [0, n).
    std::size_t below(std::size_t n);

    // Independent child stream keyed by `stream`; advances this generator once.
    Rng split(std::uint64_t stream);

    template <typename T>
    void shuffle(std::vector<T>& items) {
        for (std::size_t i = items.size(); i > 1; --i) {
            std::swap(items[i - 1], items[below(i)]);
        }
    }

private:
    std::mt19937_64 engine_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

// splitmix64 finalizer, used to derive well-mixed child seeds.
std::uint64_t mix_seed(std::uint64_t x);

}  // namespace dpgen
