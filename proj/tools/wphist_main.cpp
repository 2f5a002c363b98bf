// wphist: fit and interrogate wavelet-packet historical functional
// linear models from the command line.

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "wphist/csv.hpp"
#include "wphist/errors.hpp"
#include "wphist/inference.hpp"
#include "wphist/sample_io.hpp"
#include "wphist/sampler.hpp"
#include "wphist/simulation.hpp"
#include "wphist/version.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Exit taxonomy: 2 shape, 3 data, 4 persistence, 5 config, 6 numerical.
constexpr int kExitShape = 2;
constexpr int kExitData = 3;
constexpr int kExitPersistence = 4;
constexpr int kExitConfig = 5;
constexpr int kExitNumerical = 6;

int exit_code_for(const std::exception& e) {
    if (dynamic_cast<const wphist::ShapeError*>(&e)) return kExitShape;
    if (dynamic_cast<const wphist::DataError*>(&e)) return kExitData;
    if (dynamic_cast<const wphist::PersistenceError*>(&e))
        return kExitPersistence;
    if (dynamic_cast<const wphist::InvalidParameterError*>(&e))
        return kExitConfig;
    return kExitNumerical;
}

std::string default_output_dir() {
    const char* env = std::getenv("WPHIST_OUTPUT_DIR");
    return env != nullptr ? std::string(env) : std::string(".");
}

void write_manifest(const fs::path& dir, const std::string& command,
                    const json& config) {
    json manifest;
    manifest["command"] = command;
    manifest["config"] = config;
    manifest["library_version"] = wphist::kVersion;
    manifest["written_at_unix_ms"] =
        std::chrono::duration_cast<std::chrono::milliseconds>(
            std::chrono::system_clock::now().time_since_epoch())
            .count();
    std::ofstream out(dir / "run_manifest.json");
    out << manifest.dump(2) << '\n';
    if (!out)
        throw wphist::PersistenceError("cannot write run manifest in " +
                                       dir.string());
}

std::string format_delta(double delta) {
    std::ostringstream tag;
    tag << delta;
    return tag.str();
}

struct TransformArgs {
    std::string input, output;
    std::string filter = "db3";
    int levels = 3;
    bool inverse = false;
    bool header = false;
};

int cmd_transform(const TransformArgs& args) {
    const wphist::WaveletFilter filter = wphist::make_filter(args.filter);
    const Eigen::MatrixXd in = wphist::read_matrix_csv(args.input, args.header);
    const Eigen::Index n = in.cols();

    const wphist::PacketBasisMatrix basis =
        wphist::build_basis(filter, args.levels, n);
    Eigen::MatrixXd out(in.rows(), n);
    for (Eigen::Index i = 0; i < in.rows(); ++i) {
        if (args.inverse) {
            const wphist::PacketDecomposition decomp(in.row(i).transpose(),
                                                     args.levels);
            out.row(i) = wphist::idwpt(decomp, basis).transpose();
        } else {
            out.row(i) =
                wphist::dwpt_vector(in.row(i).transpose(), filter, args.levels)
                    .transpose();
        }
    }
    wphist::write_matrix_csv(args.output, out);

    if (!args.inverse) {
        // Scale/location sidecar: index,scale,location per coefficient.
        const wphist::PacketDecomposition decomp(out.row(0).transpose(),
                                                 args.levels);
        fs::path sidecar = args.output;
        sidecar.replace_extension(".index.csv");
        std::ofstream side(sidecar);
        for (Eigen::Index i = 0; i < n; ++i)
            side << i << ',' << decomp.scale_of(i) << ','
                 << decomp.location_of(i) << '\n';
        if (!side)
            throw wphist::PersistenceError("cannot write index sidecar: " +
                                           sidecar.string());
    }
    return 0;
}

struct FitArgs {
    std::string y_path, x_path;
    std::string out_dir;
    std::string filter = "db3";
    int levels = 3;
    double retain = 0.25;
    int iterations = 2000;
    int burnin = 1000;
    int thin = 1;
    std::uint64_t seed = 1234;
    std::string bf_exponent = "derived";
    std::string scan_order = "raster";
    bool header = false;
};

wphist::SamplerSettings settings_from(const FitArgs& args) {
    wphist::SamplerSettings settings;
    settings.total_iterations = args.iterations;
    settings.burn_in = args.burnin;
    settings.thinning = args.thin;
    settings.seed = args.seed;
    if (args.bf_exponent == "derived") {
        settings.options.bf_exponent = wphist::BfExponent::derived;
    } else if (args.bf_exponent == "paper_literal") {
        settings.options.bf_exponent = wphist::BfExponent::paper_literal;
    } else {
        throw wphist::InvalidParameterError(
            "--bf-exponent must be derived or paper_literal");
    }
    if (args.scan_order == "raster") {
        settings.options.scan_order = wphist::ScanOrder::raster;
    } else if (args.scan_order == "random") {
        settings.options.scan_order = wphist::ScanOrder::random;
    } else {
        throw wphist::InvalidParameterError(
            "--scan-order must be raster or random");
    }
    return settings;
}

int cmd_fit(const FitArgs& args) {
    const fs::path out_dir = args.out_dir;
    fs::create_directories(out_dir);

    const Eigen::MatrixXd y = wphist::read_matrix_csv(args.y_path, args.header);
    const Eigen::MatrixXd x = wphist::read_matrix_csv(args.x_path, args.header);
    const wphist::FunctionalDataset raw = wphist::make_dataset(y, x);

    auto [standardized, record] = wphist::standardize(raw);
    const wphist::HflmDesign design =
        wphist::build_design(standardized, wphist::make_filter(args.filter),
                             args.levels, args.retain, &record);
    for (const auto& warning : design.warnings())
        std::cerr << "warning: " << warning << '\n';

    std::vector<std::string> eb_warnings;
    const wphist::HyperParameters hyper =
        wphist::empirical_bayes(design, &eb_warnings);
    for (const auto& warning : eb_warnings)
        std::cerr << "warning: " << warning << '\n';

    const wphist::SamplerSettings settings = settings_from(args);
    wphist::Diagnostics diagnostics;
    wphist::PosteriorSamples samples =
        wphist::run_sampler(design, settings, &hyper, &diagnostics);
    wphist::rescale_to_data_units(samples, record);

    wphist::write_samples(out_dir / "samples.wph1", samples);
    wphist::write_matrix_csv(out_dir / "beta_mean.csv",
                             wphist::posterior_mean(samples));

    {
        std::ofstream diag(out_dir / "diagnostics.csv");
        diag << "iteration";
        for (Eigen::Index q = 0; q < diagnostics.sigma2_running_mean.cols(); ++q)
            diag << ",sigma2_mean_" << q;
        for (const auto& cell : diagnostics.tracked_cells)
            diag << ",beta_mean_c" << cell.first << "_q" << cell.second;
        diag << '\n';
        for (std::size_t r = 0; r < diagnostics.checkpoints.size(); ++r) {
            diag << diagnostics.checkpoints[r];
            const auto row = static_cast<Eigen::Index>(r);
            for (Eigen::Index q = 0;
                 q < diagnostics.sigma2_running_mean.cols(); ++q)
                diag << ','
                     << wphist::format_double(
                            diagnostics.sigma2_running_mean(row, q));
            for (Eigen::Index c = 0; c < diagnostics.beta_running_mean.cols();
                 ++c)
                diag << ','
                     << wphist::format_double(
                            diagnostics.beta_running_mean(row, c));
            diag << '\n';
        }
        if (!diag)
            throw wphist::PersistenceError("cannot write diagnostics CSV");
    }

    json config;
    config["y"] = args.y_path;
    config["x"] = args.x_path;
    config["filter"] = args.filter;
    config["levels"] = args.levels;
    config["retain"] = args.retain;
    config["iterations"] = args.iterations;
    config["burnin"] = args.burnin;
    config["thin"] = args.thin;
    config["seed"] = args.seed;
    config["bf_exponent"] = args.bf_exponent;
    config["scan_order"] = args.scan_order;
    config["header"] = args.header;
    config["hyperparameters"] = {
        {"a_tau", hyper.a_tau},       {"b_tau", hyper.b_tau},
        {"a_pi", hyper.a_pi},         {"b_pi", hyper.b_pi},
        {"a_sigma2", hyper.a_sigma2}, {"b_sigma2", hyper.b_sigma2},
        {"mh_proposal_sd", hyper.mh_proposal_sd}};
    write_manifest(out_dir, "fit", config);
    return 0;
}

struct InferArgs {
    std::string samples_path;
    std::string out_dir;
    std::vector<double> deltas{0.5};
    double alpha = 0.05;
    std::string truth_path;
};

int cmd_infer(const InferArgs& args) {
    if (!(args.alpha > 0.0) || !(args.alpha < 1.0))
        throw wphist::InvalidParameterError("--alpha must lie in (0, 1)");
    for (double d : args.deltas)
        if (!(d > 0.0))
            throw wphist::InvalidParameterError("--delta values must be positive");

    const fs::path out_dir = args.out_dir;
    fs::create_directories(out_dir);
    const wphist::PosteriorSamples samples =
        wphist::read_samples(args.samples_path);

    wphist::write_matrix_csv(out_dir / "beta_mean.csv",
                             wphist::posterior_mean(samples));

    const wphist::BandResult joint = wphist::joint_band(samples, args.alpha);
    const wphist::BandResult pointwise =
        wphist::pointwise_band(samples, args.alpha);
    wphist::write_matrix_csv(out_dir / "joint_lower.csv", joint.lower);
    wphist::write_matrix_csv(out_dir / "joint_upper.csv", joint.upper);
    wphist::write_matrix_csv(out_dir / "pointwise_lower.csv", pointwise.lower);
    wphist::write_matrix_csv(out_dir / "pointwise_upper.csv", pointwise.upper);

    for (double delta : args.deltas) {
        const wphist::BfdrResult result =
            wphist::bfdr(samples, delta, args.alpha);
        const std::string tag = format_delta(delta);
        wphist::write_matrix_csv(out_dir / ("pb_" + tag + ".csv"), result.p_b);
        Eigen::MatrixXd flags(result.flag_grid.rows(), result.flag_grid.cols());
        for (Eigen::Index v = 0; v < flags.rows(); ++v)
            for (Eigen::Index t = 0; t < flags.cols(); ++t)
                flags(v, t) = result.flag_grid(v, t) ? 1.0 : 0.0;
        wphist::write_matrix_csv(out_dir / ("flags_" + tag + ".csv"), flags);
    }

    if (!args.truth_path.empty()) {
        wphist::ConstrainedSurface truth;
        truth.beta = wphist::read_matrix_csv(args.truth_path);
        const wphist::FitMetrics fit =
            wphist::metrics(samples, truth, pointwise, joint);
        json metrics_json;
        metrics_json["rmise"] = fit.rmise;
        metrics_json["pointwise_coverage"] = fit.pointwise_coverage;
        metrics_json["joint_coverage"] = fit.joint_coverage;
        std::ofstream out(out_dir / "metrics.json");
        out << metrics_json.dump(2) << '\n';
        if (!out) throw wphist::PersistenceError("cannot write metrics.json");
    }

    json config;
    config["samples"] = args.samples_path;
    config["delta"] = args.deltas;
    config["alpha"] = args.alpha;
    config["truth"] = args.truth_path;
    write_manifest(out_dir, "infer", config);
    return 0;
}

struct SimulateArgs {
    std::string config_path;
    std::string out_dir;
    int jobs = 1;
    bool keep_samples = false;
    bool dry_run = false;
};

int cmd_simulate(const SimulateArgs& args) {
    std::ifstream in(args.config_path);
    if (!in)
        throw wphist::InvalidParameterError("cannot open experiment config: " +
                                            args.config_path);
    std::stringstream buffer;
    buffer << in.rdbuf();

    wphist::ExperimentGrid grid = wphist::parse_experiment_grid(buffer.str());
    if (!args.out_dir.empty()) grid.output_dir = args.out_dir;
    if (grid.output_dir.empty()) grid.output_dir = default_output_dir();
    grid.jobs = args.jobs;
    grid.keep_samples = args.keep_samples;

    if (args.dry_run) {
        std::cout << "cells:\n";
        for (Eigen::Index n : grid.n_list)
            for (Eigen::Index t : grid.t_list)
                for (double retain : grid.retain_list)
                    for (const auto& surface : grid.surfaces)
                        std::cout << "  N=" << n << " T=" << t
                                  << " retain=" << retain << " surface="
                                  << wphist::surface_kind_name(surface.kind)
                                  << '\n';
        std::cout << "replicates per cell: " << grid.replicates << '\n'
                  << "sampler: " << grid.sampler.total_iterations
                  << " iterations, burn-in " << grid.sampler.burn_in
                  << ", thinning " << grid.sampler.thinning << '\n';
        return 0;
    }

    fs::create_directories(grid.output_dir);
    wphist::run_experiment(grid);

    json config;
    config["config_path"] = args.config_path;
    config["jobs"] = args.jobs;
    config["keep_samples"] = args.keep_samples;
    config["master_seed"] = grid.master_seed;
    config["replicates"] = grid.replicates;
    write_manifest(grid.output_dir, "simulate", config);
    std::cout << "summary written to "
              << (fs::path(grid.output_dir) / "summary.csv").string() << '\n';
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Bayesian wavelet-packet historical functional linear models"};
    app.set_version_flag("--version", wphist::kVersion);
    app.require_subcommand(1);

    TransformArgs transform_args;
    CLI::App* transform =
        app.add_subcommand("transform", "wavelet-packet transform CSV signals");
    transform->add_option("--input", transform_args.input, "input CSV, one signal per row")
        ->required();
    transform->add_option("--output", transform_args.output, "output CSV")
        ->required();
    transform->add_option("--filter", transform_args.filter, "wavelet filter (db1..dbN, haar)");
    transform->add_option("--levels", transform_args.levels, "decomposition levels");
    transform->add_flag("--inverse", transform_args.inverse, "apply the inverse transform");
    transform->add_flag("--header", transform_args.header, "skip one header line");

    FitArgs fit_args;
    fit_args.out_dir = default_output_dir();
    CLI::App* fit = app.add_subcommand("fit", "fit the historical model");
    fit->add_option("--y", fit_args.y_path, "outcome CSV (subjects x T)")->required();
    fit->add_option("--x", fit_args.x_path, "exposure CSV (subjects x V)")->required();
    fit->add_option("--out", fit_args.out_dir, "output directory");
    fit->add_option("--filter", fit_args.filter, "wavelet filter");
    fit->add_option("--levels", fit_args.levels, "decomposition levels");
    fit->add_option("--retain", fit_args.retain, "retained coefficient fraction");
    fit->add_option("--iterations", fit_args.iterations, "total Gibbs iterations");
    fit->add_option("--burnin", fit_args.burnin, "burn-in iterations");
    fit->add_option("--thin", fit_args.thin, "thinning interval");
    fit->add_option("--seed", fit_args.seed, "RNG seed");
    fit->add_option("--bf-exponent", fit_args.bf_exponent,
                    "derived or paper_literal");
    fit->add_option("--scan-order", fit_args.scan_order, "raster or random");
    fit->add_flag("--header", fit_args.header, "skip one header line");

    InferArgs infer_args;
    infer_args.out_dir = default_output_dir();
    CLI::App* infer =
        app.add_subcommand("infer", "flags, bands, and metrics from samples");
    infer->add_option("--samples", infer_args.samples_path, "sample file")->required();
    infer->add_option("--out", infer_args.out_dir, "output directory");
    infer->add_option("--delta", infer_args.deltas, "intensity thresholds")
        ->delimiter(',');
    infer->add_option("--alpha", infer_args.alpha, "global error bound");
    infer->add_option("--truth", infer_args.truth_path,
                      "true surface CSV for metrics");

    SimulateArgs sim_args;
    CLI::App* simulate =
        app.add_subcommand("simulate", "run a replicated experiment grid");
    simulate->add_option("--config", sim_args.config_path, "experiment JSON")->required();
    simulate->add_option("--out", sim_args.out_dir, "output directory override");
    simulate->add_option("--jobs", sim_args.jobs, "replicate worker threads");
    simulate->add_flag("--keep-samples", sim_args.keep_samples,
                       "persist per-replicate sample files");
    simulate->add_flag("--dry-run", sim_args.dry_run,
                       "print the resolved grid and exit");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*transform) return cmd_transform(transform_args);
        if (*fit) return cmd_fit(fit_args);
        if (*infer) return cmd_infer(infer_args);
        if (*simulate) return cmd_simulate(sim_args);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return exit_code_for(e);
    }
    return 1;
}
