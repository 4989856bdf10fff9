#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>

#include "tikreg/grid.hpp"
#include "tikreg/lcurve.hpp"
#include "tikreg/operators.hpp"

namespace tikreg {

/// g + eta, eta i.i.d. N(0, (level * |g|_inf)^2) from a counter-based
/// generator keyed by `seed`. Identical arguments give identical bits.
GridFunction add_noise(const GridFunction& g, double level, std::uint64_t seed);

/// Built-in unit-range test images: "blocks" (overlapping rectangles, four
/// gray levels), "cross" (bright cross, invariant under 90 degree rotation on
/// square grids) and "ramp" (0 to 1 left to right).
GridFunction make_phantom(std::string_view name, int width, int height);
bool is_phantom_name(std::string_view name);

/// Binary image marking pixels whose forward-difference gradient magnitude
/// exceeds `fraction` of the maximum.
GridFunction edge_map(const GridFunction& f, double fraction = 0.1);

struct RestorationMetrics {
    double relative_l2_error = 0.0;  // |f_hat - f| / |f|
    double psnr_db = 0.0;            // 10 log10(1 / mse), capped at 300
    double data_residual = 0.0;      // |K f_hat - g_noisy|
};

inline constexpr double kPsnrCap = 300.0;

RestorationMetrics compute_metrics(const GridFunction& f_true, const GridFunction& f_hat,
                                   const GridFunction& g_noisy, const OperatorHandle& forward);

struct AlphaGrid {
    double low = 1e-6;
    double high = 1.0;
    int count = 25;
};

struct PipelineConfig {
    std::string input_image = "blocks";  // phantom name or PGM path
    int width = 64;                      // phantom size
    int height = 64;
    std::optional<std::string> gamma_image;  // PGM path or "auto"
    double kappa = 6.0;
    int blur_radius = 3;
    double noise_level = 0.01;
    std::uint64_t seed = 0;
    std::string penalizer = "grad2";
    double c = 5.0;
    std::optional<double> alpha;  // empty selects alpha on the L-curve
    AlphaGrid alpha_grid;
    std::filesystem::path output_dir = "restore-out";
    int max_iterations = 2000;
    double gradient_tolerance = 1e-8;
    double cg_tolerance = 1e-10;
};

/// Parses flat "key = value" lines; '#' starts a comment. Unknown keys,
/// duplicate keys and malformed values raise ConfigError naming the line.
PipelineConfig parse_config(std::string_view text);
PipelineConfig load_config(const std::filesystem::path& path);

struct PipelineResult {
    RestorationMetrics metrics;
    double alpha = 0.0;
    std::optional<LCurve> lcurve;
    GridFunction f_true;
    GridFunction g_noisy;
    GridFunction f_restored;
};

/// load -> blur -> noise -> (L-curve) -> solve -> write. Writes f_true.pgm
/// (synthetic inputs only), g_blurred.pgm, g_noisy.pgm, f_restored.pgm,
/// metrics.csv and, when alpha comes from the L-curve, lcurve.csv. Failures
/// surface as StageError.
PipelineResult run_pipeline(const PipelineConfig& cfg);

/// load -> blur -> noise -> sweep; writes lcurve.csv only, then raises the
/// lcurve stage error if the curve has no corner.
LCurve run_lcurve(const PipelineConfig& cfg);

}  // namespace tikreg
