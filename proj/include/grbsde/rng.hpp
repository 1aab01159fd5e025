#pragma once

#include <array>
#include <cstdint>

namespace grbsde {

/// Philox4x32-10 counter-based generator (Salmon et al., SC'11). Pure
/// function of (counter, key), so any (seed, path, step) can be drawn
/// independently of the order of evaluation.
class Philox4x32 {
public:
    using Counter = std::array<std::uint32_t, 4>;
    using Key = std::array<std::uint32_t, 2>;

    [[nodiscard]] static Counter generate(Counter ctr, Key key) noexcept;
};

/// Two standard normals for block `block` of (seed, path, step).
[[nodiscard]] std::array<double, 2> normal_pair(std::uint64_t seed, std::uint64_t path,
                                                std::uint32_t step, std::uint32_t block) noexcept;

}  // namespace grbsde
