#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>

#include "tikreg/stability.hpp"

namespace tikreg::tools {

// Usage and config problems share code 2; 1 is left for I/O and other failures.
enum ExitCode : int { kOk = 0, kOtherFailure = 1, kConfigFailure = 2, kNumericalFailure = 3 };

/// Entry points behind the executables; argv[0] is the program name.
int restore_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err);
int stability_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err);
int phantom_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

struct StabilityConfig {
    std::string phantom = "blocks";
    int width = 6;
    int height = 6;
    double kappa = 6.0;
    int blur_radius = 3;
    double noise_level = 0.01;
    std::uint64_t seed = 0;
    std::string penalizer = "grad2";
    double c = 5.0;  // structural operator, gamma = edge map of the phantom
    double alpha = 0.1;
    int count = 10;
    double base_radius = 0.1;
    ScheduleChannels perturb{true, true, false};
    double tolerance_factor = 0.01;
    std::filesystem::path output = "stability.csv";
};

/// Same "key = value" format as the restoration config. `perturb` is a comma
/// list drawn from data, weights, forward.
StabilityConfig parse_stability_config(std::string_view text);
StabilityConfig load_stability_config(const std::filesystem::path& path);

StabilityReport run_stability(const StabilityConfig& cfg);

}  // namespace tikreg::tools
