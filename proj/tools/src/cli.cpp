#include "tikreg_tools/cli.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <functional>
#include <ostream>

#include "tikreg/csv.hpp"
#include "tikreg/errors.hpp"
#include "tikreg/pgm.hpp"
#include "tikreg/restore.hpp"

namespace tikreg::tools {

namespace {

int classify(const StageError& e) {
    switch (e.cause()) {
        case StageError::Cause::config:
            return kConfigFailure;
        case StageError::Cause::numerical:
            return kNumericalFailure;
        case StageError::Cause::other:
            break;
    }
    return kOtherFailure;
}

// Runs `body` and maps library exceptions onto exit codes.
int guarded(std::ostream& err, const std::function<int()>& body) {
    try {
        return body();
    } catch (const StageError& e) {
        err << "error: " << e.what() << '\n';
        return classify(e);
    } catch (const NumericalError& e) {
        err << "error: " << e.what() << '\n';
        return kNumericalFailure;
    } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        return kConfigFailure;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kOtherFailure;
    }
}

int parse_args(CLI::App& app, int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kOk : kConfigFailure;
    }
    return -1;
}

}  // namespace

int restore_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Tikhonov-regularized image restoration"};
    app.name("restore");
    app.require_subcommand(1);
    std::string config;
    auto* run = app.add_subcommand("run", "restore an image and write images, metrics.csv and lcurve.csv");
    run->add_option("config", config, "key = value configuration file")->required();
    auto* lcurve = app.add_subcommand("lcurve", "sweep alpha and write lcurve.csv");
    lcurve->add_option("config", config, "key = value configuration file")->required();

    if (const int code = parse_args(app, argc, argv, out, err); code >= 0) return code;

    return guarded(err, [&] {
        const auto cfg = load_config(config);
        if (run->parsed()) {
            const auto r = run_pipeline(cfg);
            out << "alpha " << format_number(r.alpha) << (r.lcurve ? " (L-curve corner)" : "") << '\n'
                << "relative_l2_error " << format_number(r.metrics.relative_l2_error) << '\n'
                << "psnr_db " << format_number(r.metrics.psnr_db) << '\n'
                << "data_residual " << format_number(r.metrics.data_residual) << '\n'
                << "wrote " << cfg.output_dir.string() << '\n';
        } else {
            const auto curve = run_lcurve(cfg);
            out << "corner alpha " << format_number(curve.alphas[*curve.corner_index]) << " (index "
                << *curve.corner_index << " of " << curve.alphas.size() << ")\n"
                << "wrote " << (cfg.output_dir / "lcurve.csv").string() << '\n';
        }
        return static_cast<int>(kOk);
    });
}

int stability_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Stability experiments for perturbed Tikhonov problems"};
    app.name("stability");
    app.require_subcommand(1);
    std::string config;
    auto* run = app.add_subcommand("run", "solve a geometric perturbation schedule and write a CSV");
    run->add_option("config", config, "key = value configuration file")->required();

    if (const int code = parse_args(app, argc, argv, out, err); code >= 0) return code;

    return guarded(err, [&] {
        const auto cfg = load_stability_config(config);
        const auto report = run_stability(cfg);
        if (cfg.output.has_parent_path()) std::filesystem::create_directories(cfg.output.parent_path());
        std::ofstream csv(cfg.output, std::ios::binary);
        if (!csv) throw std::runtime_error("cannot write " + cfg.output.string());
        write_stability_csv(report, csv);
        out << "k " << format_number(report.k_estimate) << '\n'
            << "adjoint_norm " << format_number(report.adjoint_norm) << '\n'
            << "first_error " << format_number(report.errors.front()) << '\n'
            << "last_error " << format_number(report.errors.back()) << '\n'
            << (report.passed ? "passed" : "FAILED") << '\n'
            << "wrote " << cfg.output.string() << '\n';
        if (!report.passed) {
            err << "error: final error exceeds " << format_number(cfg.tolerance_factor)
                << " of the first error or a bound was violated\n";
            return static_cast<int>(kNumericalFailure);
        }
        return static_cast<int>(kOk);
    });
}

int phantom_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Write a built-in test image as PGM"};
    app.name("phantom");
    std::string name;
    int width = 0;
    int height = 0;
    std::string path;
    app.add_option("name", name, "blocks, cross or ramp")->required();
    app.add_option("width", width, "columns")->required();
    app.add_option("height", height, "rows")->required();
    app.add_option("output", path, "output PGM file")->required();

    if (const int code = parse_args(app, argc, argv, out, err); code >= 0) return code;

    return guarded(err, [&] {
        write_pgm_file(make_phantom(name, width, height), path);
        out << "wrote " << path << '\n';
        return static_cast<int>(kOk);
    });
}

}  // namespace tikreg::tools
