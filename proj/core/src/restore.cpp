#include "tikreg/restore.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "tikreg/csv.hpp"
#include "tikreg/errors.hpp"
#include "tikreg/keyvalue.hpp"
#include "tikreg/penalizers.hpp"
#include "tikreg/pgm.hpp"
#include "tikreg/random.hpp"
#include "tikreg/solvers.hpp"

namespace tikreg {

GridFunction add_noise(const GridFunction& g, double level, std::uint64_t seed) {
    if (!(level >= 0.0) || !std::isfinite(level)) {
        throw ParameterError("noise level must be nonnegative, got " + std::to_string(level));
    }
    if (level == 0.0) return g;
    const double sigma = level * norm_linf(g);
    const CounterRng rng(seed);
    GridFunction out = g;
    for (std::size_t k = 0; k < out.size(); ++k) out[k] += sigma * rng.normal(k);
    return out;
}

bool is_phantom_name(std::string_view name) {
    return name == "blocks" || name == "cross" || name == "ramp";
}

GridFunction make_phantom(std::string_view name, int width, int height) {
    if (width <= 0 || height <= 0) throw ParameterError("phantom size must be positive");
    GridFunction f(Shape{width, height, 1});
    if (name == "ramp") {
        for (int i = 0; i < height; ++i) {
            for (int j = 0; j < width; ++j) f.at(i, j) = width > 1 ? double(j) / (width - 1) : 0.0;
        }
    } else if (name == "blocks") {
        auto fill = [&](int r0, int r1, int c0, int c1, double v) {
            for (int i = r0; i < r1; ++i) {
                for (int j = c0; j < c1; ++j) f.at(i, j) = v;
            }
        };
        const int w = width;
        const int h = height;
        fill(h / 8, h / 2, w / 8, w / 2, 1.0);
        fill(9 * h / 16, 7 * h / 8, w / 4, 3 * w / 4, 0.5);
        fill(h / 4, 5 * h / 8, 5 * w / 8, 7 * w / 8, 0.75);
    } else if (name == "cross") {
        const double half_width = std::min(width, height) / 10.0;
        const double half_length = 0.4 * std::min(width, height);
        for (int i = 0; i < height; ++i) {
            for (int j = 0; j < width; ++j) {
                const double dy = std::abs(i + 0.5 - height / 2.0);
                const double dx = std::abs(j + 0.5 - width / 2.0);
                const bool bar = (dy <= half_width && dx <= half_length) ||
                                 (dx <= half_width && dy <= half_length);
                f.at(i, j) = bar ? 1.0 : 0.0;
            }
        }
    } else {
        throw ParameterError("unknown phantom '" + std::string(name) + "' (blocks, cross, ramp)");
    }
    return f;
}

GridFunction edge_map(const GridFunction& f, double fraction) {
    const auto g = make_gradient(f.width(), f.height()).apply(f);
    GridFunction mag(f.shape());
    for (std::size_t p = 0; p < mag.size(); ++p) mag[p] = std::hypot(g[2 * p], g[2 * p + 1]);
    const double threshold = fraction * norm_linf(mag);
    GridFunction edges(f.shape());
    if (threshold == 0.0) return edges;
    for (std::size_t p = 0; p < mag.size(); ++p) edges[p] = mag[p] > threshold ? 1.0 : 0.0;
    return edges;
}

RestorationMetrics compute_metrics(const GridFunction& f_true, const GridFunction& f_hat,
                                   const GridFunction& g_noisy, const OperatorHandle& forward) {
    require_same_shape(f_true.shape(), f_hat.shape(), "metrics");
    const auto diff = f_hat - f_true;
    const double err = norm_l2(diff);
    const double ref = norm_l2(f_true);
    RestorationMetrics m;
    m.relative_l2_error = ref > 0.0 ? err / ref : err;
    const double mse = inner_product(diff, diff) / static_cast<double>(diff.size());
    m.psnr_db = mse > 0.0 ? std::min(kPsnrCap, 10.0 * std::log10(1.0 / mse)) : kPsnrCap;
    m.data_residual = norm_l2(forward.apply(f_hat) - g_noisy);
    return m;
}

// Configuration -----------------------------------------------------------------

PipelineConfig parse_config(std::string_view text) {
    PipelineConfig cfg;
    for (const auto& kv : parse_key_values(text)) {
        const std::string_view key = kv.key;
        const std::string_view value = kv.value;
        if (key == "input_image") {
            cfg.input_image = value;
        } else if (key == "width") {
            cfg.width = value_as_int(kv);
        } else if (key == "height") {
            cfg.height = value_as_int(kv);
        } else if (key == "gamma_image") {
            cfg.gamma_image = std::string(value);
        } else if (key == "kappa") {
            cfg.kappa = value_as_double(kv);
        } else if (key == "blur_radius") {
            cfg.blur_radius = value_as_int(kv);
        } else if (key == "noise_level") {
            cfg.noise_level = value_as_double(kv);
        } else if (key == "seed") {
            cfg.seed = value_as_u64(kv);
        } else if (key == "penalizer") {
            cfg.penalizer = value;
        } else if (key == "c") {
            cfg.c = value_as_double(kv);
        } else if (key == "alpha") {
            if (value == "lcurve") {
                cfg.alpha.reset();
            } else {
                cfg.alpha = value_as_double(kv);
            }
        } else if (key == "alpha_min") {
            cfg.alpha_grid.low = value_as_double(kv);
        } else if (key == "alpha_max") {
            cfg.alpha_grid.high = value_as_double(kv);
        } else if (key == "alpha_count") {
            cfg.alpha_grid.count = value_as_int(kv);
        } else if (key == "output_dir") {
            cfg.output_dir = std::string(value);
        } else if (key == "max_iterations") {
            cfg.max_iterations = value_as_int(kv);
        } else if (key == "gradient_tolerance") {
            cfg.gradient_tolerance = value_as_double(kv);
        } else if (key == "cg_tolerance") {
            cfg.cg_tolerance = value_as_double(kv);
        } else {
            reject_key(kv);
        }
    }

    if (!(cfg.kappa > 0.0)) throw ConfigError("kappa must be positive");
    if (cfg.blur_radius < 1) throw ConfigError("blur_radius must be at least 1");
    if (!(cfg.noise_level >= 0.0)) throw ConfigError("noise_level must be nonnegative");
    if (!(cfg.c > 0.0)) throw ConfigError("c must be positive");
    if (cfg.alpha && !(*cfg.alpha >= 0.0)) throw ConfigError("alpha must be nonnegative or 'lcurve'");
    if (!(cfg.alpha_grid.low > 0.0) || !(cfg.alpha_grid.high > cfg.alpha_grid.low) ||
        cfg.alpha_grid.count < 5) {
        throw ConfigError("alpha grid needs 0 < alpha_min < alpha_max and alpha_count >= 5");
    }
    if (cfg.width < 2 || cfg.height < 2) throw ConfigError("width and height must be at least 2");
    if (cfg.max_iterations < 1) throw ConfigError("max_iterations must be positive");
    if (!(cfg.gradient_tolerance > 0.0) || !(cfg.cg_tolerance > 0.0)) {
        throw ConfigError("tolerances must be positive");
    }
    if (spec_uses_structural(cfg.penalizer) && !cfg.gamma_image) {
        throw ConfigError("penalizer '" + cfg.penalizer +
                          "' uses the structural operator; set gamma_image (a PGM path or 'auto')");
    }
    return cfg;
}

PipelineConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_config(buf.str());
}

// Pipeline ----------------------------------------------------------------------

namespace {

template <typename F>
auto run_stage(const char* name, F&& body) -> decltype(body()) {
    try {
        return body();
    } catch (const StageError&) {
        throw;
    } catch (const ConfigError& e) {
        throw StageError(name, StageError::Cause::config, e.what());
    } catch (const NumericalError& e) {
        throw StageError(name, StageError::Cause::numerical, e.what());
    } catch (const Error& e) {
        // Parse, parameter, dimension, capacity and configuration errors all
        // trace back to the inputs.
        throw StageError(name, StageError::Cause::config, e.what());
    } catch (const std::exception& e) {
        throw StageError(name, StageError::Cause::other, e.what());
    }
}

struct Degraded {
    GridFunction f_true;
    bool synthetic = false;
    OperatorHandle blur;
    GridFunction g_blurred;
    GridFunction g_noisy;
    std::optional<Penalizer> penalizer;
};

Degraded degrade(const PipelineConfig& cfg) {
    Degraded d;
    d.f_true = run_stage("load", [&] {
        if (is_phantom_name(cfg.input_image)) {
            d.synthetic = true;
            return make_phantom(cfg.input_image, cfg.width, cfg.height);
        }
        return read_pgm_file(cfg.input_image);
    });
    d.blur = run_stage("blur", [&] {
        return make_gaussian_blur(d.f_true.width(), d.f_true.height(), cfg.kappa, cfg.blur_radius);
    });
    d.g_blurred = run_stage("blur", [&] { return d.blur.apply(d.f_true); });
    d.g_noisy = run_stage("noise", [&] { return add_noise(d.g_blurred, cfg.noise_level, cfg.seed); });
    d.penalizer = run_stage("penalizer", [&] {
        PenalizerContext ctx{d.f_true.shape(), std::nullopt};
        if (spec_uses_structural(cfg.penalizer)) {
            if (!cfg.gamma_image) throw ConfigError("structural penalizer needs gamma_image");
            GridFunction gamma =
                *cfg.gamma_image == "auto" ? edge_map(d.f_true) : read_pgm_file(*cfg.gamma_image);
            require_same_shape(gamma.shape(), d.f_true.shape(), "gamma image");
            ctx.structural = StructuralField{std::move(gamma), cfg.c};
        }
        return parse_penalizer(cfg.penalizer, ctx);
    });
    return d;
}

SolverOptions solver_options(const PipelineConfig& cfg) {
    SolverOptions o;
    o.max_iterations = cfg.max_iterations;
    o.gradient_tolerance = cfg.gradient_tolerance;
    o.cg_tolerance = cfg.cg_tolerance;
    return o;
}

LCurve sweep_for(const PipelineConfig& cfg, const Degraded& d) {
    return run_stage("lcurve", [&] {
        const Problem problem{d.blur, d.g_noisy, *d.penalizer};
        const auto alphas = log_spaced_alphas(cfg.alpha_grid.low, cfg.alpha_grid.high, cfg.alpha_grid.count);
        SweepOptions so;
        so.solver = solver_options(cfg);
        return sweep(problem, alphas, so);
    });
}

void require_corner(const LCurve& curve) {
    run_stage("lcurve", [&] {
        if (!curve.corner_index) throw NoCornerError("L-curve has no convex corner; set alpha explicitly");
        return 0;
    });
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ParameterError("cannot write " + path.string());
    out << text;
    if (!out) throw ParameterError("write failed for " + path.string());
}

void write_lcurve_file(const std::filesystem::path& dir, const LCurve& curve) {
    std::ostringstream csv;
    write_lcurve_csv(curve, csv);
    write_text(dir / "lcurve.csv", csv.str());
}

}  // namespace

PipelineResult run_pipeline(const PipelineConfig& cfg) {
    auto d = degrade(cfg);
    PipelineResult result;

    if (cfg.alpha) {
        result.alpha = *cfg.alpha;
    } else {
        result.lcurve = sweep_for(cfg, d);
        require_corner(*result.lcurve);
        result.alpha = result.lcurve->alphas[*result.lcurve->corner_index];
    }

    const auto report = run_stage("solve", [&] {
        const auto opts = solver_options(cfg);
        if (result.alpha == 0.0) {
            // Unregularized normal equations.
            const auto cg = conjugate_gradient(NormalOperator(d.blur, {}), d.blur.apply_adjoint(d.g_noisy), opts);
            SolveReport r;
            r.minimizer = cg.solution;
            r.converged = cg.converged;
            r.iterations = cg.iterations;
            return r;
        }
        const Problem problem{d.blur, d.g_noisy, d.penalizer->scaled(result.alpha)};
        return problem.penalizer.is_quadratic() ? solve_quadratic(problem, opts)
                                                : solve_general(problem, opts);
    });

    result.metrics = compute_metrics(d.f_true, report.minimizer, d.g_noisy, d.blur);
    result.f_true = d.f_true;
    result.g_noisy = d.g_noisy;
    result.f_restored = report.minimizer;

    run_stage("write", [&] {
        std::filesystem::create_directories(cfg.output_dir);
        if (d.synthetic) write_pgm_file(d.f_true, cfg.output_dir / "f_true.pgm");
        write_pgm_file(d.g_blurred, cfg.output_dir / "g_blurred.pgm");
        write_pgm_file(d.g_noisy, cfg.output_dir / "g_noisy.pgm");
        write_pgm_file(report.minimizer, cfg.output_dir / "f_restored.pgm");
        std::ostringstream m;
        m << "penalizer,alpha,relative_l2_error,psnr_db,data_residual,converged\n"
          << cfg.penalizer << ',' << format_number(result.alpha) << ','
          << format_number(result.metrics.relative_l2_error) << ',' << format_number(result.metrics.psnr_db)
          << ',' << format_number(result.metrics.data_residual) << ',' << (report.converged ? 1 : 0) << '\n';
        write_text(cfg.output_dir / "metrics.csv", m.str());
        if (result.lcurve) write_lcurve_file(cfg.output_dir, *result.lcurve);
        return 0;
    });
    return result;
}

LCurve run_lcurve(const PipelineConfig& cfg) {
    const auto d = degrade(cfg);
    auto curve = sweep_for(cfg, d);
    // Written even without a corner so the curve can be inspected.
    run_stage("write", [&] {
        std::filesystem::create_directories(cfg.output_dir);
        write_lcurve_file(cfg.output_dir, curve);
        return 0;
    });
    require_corner(curve);
    return curve;
}

}  // namespace tikreg
