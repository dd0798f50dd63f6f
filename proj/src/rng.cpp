#include "dpgen/rng.hpp"

#include <cmath>
#include <numbers>

namespace dpgen {

double Rng::normal() {
    if (has_spare_) {
        has_spare_ = false;
        return spare_;
    }
    double u1 = uniform();
    while (u1 <= 0.0) {
        u1 = uniform();
    }
    const double u2 = uniform();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    spare_ = radius * std::sin(angle);
    has_spare_ = true;
    return radius * std::cos(angle);
}

std::size_t Rng::below(std::size_t n) {
    if (n <= 1) {
        return 0;
    }
    const std::uint64_t bound = n;
    const std::uint64_t threshold = (0 - bound) % bound;
    for (;;) {
        const std::uint64_t r = engine_();
        if (r >= threshold) {
            return static_cast<std::size_t>(r % bound);
        }
    }
}

Rng Rng::split(std::uint64_t stream) {
    return Rng(mix_seed(engine_() ^ mix_seed(stream + 0x9e3779b97f4a7c15ULL)));
}

std::uint64_t mix_seed(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

}  // namespace dpgen
