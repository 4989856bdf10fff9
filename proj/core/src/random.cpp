#include "tikreg/random.hpp"

#include <cmath>
#include <numbers>

namespace tikreg {

namespace {

std::uint64_t splitmix64(std::uint64_t z) noexcept {
    z += 0x9E3779B97F4A7C15ull;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

}  // namespace

CounterRng::CounterRng(std::uint64_t seed, std::uint64_t stream) noexcept
    : key_(splitmix64(seed ^ splitmix64(stream + 0x632BE59BD9B4E019ull))) {}

std::uint64_t CounterRng::bits(std::uint64_t counter) const noexcept {
    return splitmix64(key_ ^ splitmix64(counter));
}

double CounterRng::uniform(std::uint64_t counter) const noexcept {
    // 53 random mantissa bits, shifted off zero.
    return (static_cast<double>(bits(counter) >> 11) + 1.0) * 0x1.0p-53;
}

double CounterRng::normal(std::uint64_t k) const noexcept {
    const double u1 = uniform(2 * k);
    const double u2 = uniform(2 * k + 1);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

GridFunction random_normal_grid(Shape shape, std::uint64_t seed, std::uint64_t stream) {
    const CounterRng rng(seed, stream);
    GridFunction g(shape);
    for (std::size_t k = 0; k < g.size(); ++k) g[k] = rng.normal(k);
    return g;
}

}  // namespace tikreg
