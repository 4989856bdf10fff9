#pragma once

#include <cstdint>

#include "tikreg/grid.hpp"

namespace tikreg {

/// Counter-based generator: draw k depends only on (seed, stream, k), so
/// results do not depend on call order or threading.
class CounterRng {
public:
    explicit CounterRng(std::uint64_t seed, std::uint64_t stream = 0) noexcept;

    std::uint64_t bits(std::uint64_t counter) const noexcept;
    /// Uniform on (0, 1].
    double uniform(std::uint64_t counter) const noexcept;
    /// Standard normal via Box-Muller on counters 2k and 2k+1.
    double normal(std::uint64_t k) const noexcept;

private:
    std::uint64_t key_;
};

/// Grid of i.i.d. standard normal entries.
GridFunction random_normal_grid(Shape shape, std::uint64_t seed, std::uint64_t stream = 0);

}  // namespace tikreg
