#include <fstream>
#include <sstream>

#include "tikreg/errors.hpp"
#include "tikreg/keyvalue.hpp"
#include "tikreg/penalizers.hpp"
#include "tikreg/restore.hpp"
#include "tikreg_tools/cli.hpp"

namespace tikreg::tools {

namespace {

ScheduleChannels parse_channels(const KeyValue& kv) {
    ScheduleChannels ch{false, false, false};
    std::stringstream list(kv.value);
    std::string item;
    while (std::getline(list, item, ',')) {
        const auto b = item.find_first_not_of(" \t");
        const auto e = item.find_last_not_of(" \t");
        item = b == std::string::npos ? "" : item.substr(b, e - b + 1);
        if (item == "data") {
            ch.data = true;
        } else if (item == "weights") {
            ch.weights = true;
        } else if (item == "forward") {
            ch.forward = true;
        } else {
            throw ConfigError("config line " + std::to_string(kv.line) + ": unknown perturbation channel '" + item +
                              "' (expected data, weights or forward)");
        }
    }
    return ch;
}

}  // namespace

StabilityConfig parse_stability_config(std::string_view text) {
    StabilityConfig cfg;
    for (const auto& kv : parse_key_values(text)) {
        const auto& key = kv.key;
        if (key == "phantom") {
            cfg.phantom = kv.value;
        } else if (key == "width") {
            cfg.width = value_as_int(kv);
        } else if (key == "height") {
            cfg.height = value_as_int(kv);
        } else if (key == "kappa") {
            cfg.kappa = value_as_double(kv);
        } else if (key == "blur_radius") {
            cfg.blur_radius = value_as_int(kv);
        } else if (key == "noise_level") {
            cfg.noise_level = value_as_double(kv);
        } else if (key == "seed") {
            cfg.seed = value_as_u64(kv);
        } else if (key == "penalizer") {
            cfg.penalizer = kv.value;
        } else if (key == "c") {
            cfg.c = value_as_double(kv);
        } else if (key == "alpha") {
            cfg.alpha = value_as_double(kv);
        } else if (key == "count") {
            cfg.count = value_as_int(kv);
        } else if (key == "base_radius") {
            cfg.base_radius = value_as_double(kv);
        } else if (key == "perturb") {
            cfg.perturb = parse_channels(kv);
        } else if (key == "tolerance_factor") {
            cfg.tolerance_factor = value_as_double(kv);
        } else if (key == "output") {
            cfg.output = kv.value;
        } else {
            reject_key(kv);
        }
    }
    if (!is_phantom_name(cfg.phantom)) throw ConfigError("unknown phantom '" + cfg.phantom + "'");
    if (cfg.width < 2 || cfg.height < 2) throw ConfigError("width and height must be at least 2");
    if (!(cfg.kappa > 0.0)) throw ConfigError("kappa must be positive");
    if (cfg.blur_radius < 1) throw ConfigError("blur_radius must be at least 1");
    if (!(cfg.noise_level >= 0.0)) throw ConfigError("noise_level must be nonnegative");
    if (!(cfg.c > 0.0)) throw ConfigError("c must be positive");
    if (!(cfg.alpha > 0.0)) throw ConfigError("alpha must be positive");
    if (cfg.count < 1) throw ConfigError("count must be at least 1");
    if (!(cfg.base_radius > 0.0)) throw ConfigError("base_radius must be positive");
    if (!(cfg.tolerance_factor > 0.0)) throw ConfigError("tolerance_factor must be positive");
    if (!cfg.perturb.data && !cfg.perturb.weights && !cfg.perturb.forward) {
        throw ConfigError("perturb must name at least one channel");
    }
    return cfg;
}

StabilityConfig load_stability_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_stability_config(buf.str());
}

StabilityReport run_stability(const StabilityConfig& cfg) {
    const auto truth = make_phantom(cfg.phantom, cfg.width, cfg.height);
    auto blur = make_gaussian_blur(cfg.width, cfg.height, cfg.kappa, cfg.blur_radius);
    auto data = add_noise(blur.apply(truth), cfg.noise_level, cfg.seed);
    PenalizerContext ctx{truth.shape(), std::nullopt};
    if (spec_uses_structural(cfg.penalizer)) ctx.structural = StructuralField{edge_map(truth), cfg.c};
    Problem p{std::move(blur), std::move(data), parse_penalizer(cfg.penalizer, ctx).scaled(cfg.alpha)};
    const auto sched = make_geometric_schedule(p, cfg.count, cfg.base_radius, cfg.seed, cfg.perturb);
    StabilityOptions opts;
    opts.tolerance_factor = cfg.tolerance_factor;
    return run_stability_experiment(p, sched, opts);
}

}  // namespace tikreg::tools
