#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "tikreg/grid.hpp"

namespace tikreg {

/// Parses an ASCII (P2) or binary (P5, maxval <= 255) portable graymap.
/// Values are divided by maxval, so the result lies in [0, 1].
/// Throws ParseError with the byte offset of the first problem.
GridFunction read_pgm(std::span<const std::uint8_t> bytes);

/// Encodes a single-channel grid as P5 with maxval 255. Values are clamped to
/// [0, 1] and quantized with round(v * 255). No comments are emitted.
std::vector<std::uint8_t> write_pgm(const GridFunction& f);

GridFunction read_pgm_file(const std::filesystem::path& path);
void write_pgm_file(const GridFunction& f, const std::filesystem::path& path);

}  // namespace tikreg
