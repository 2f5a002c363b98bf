#include "wphist/simulation.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iostream>
#include <mutex>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "wphist/csv.hpp"
#include "wphist/errors.hpp"
#include "wphist/inference.hpp"
#include "wphist/sample_io.hpp"

namespace wphist {

Eigen::MatrixXd ar1_curves(const Ar1Spec& spec, Eigen::Index n_curves,
                           Rng& rng) {
    if (!(spec.sigma2 > 0.0))
        throw InvalidParameterError("AR1 marginal variance must be positive");
    if (!(std::abs(spec.rho) < 1.0))
        throw InvalidParameterError("AR1 correlation must lie in (-1, 1)");
    if (spec.length < 1) throw InvalidParameterError("AR1 length must be >= 1");

    const double marginal_sd = std::sqrt(spec.sigma2);
    const double innov_sd =
        std::sqrt(spec.sigma2 * (1.0 - spec.rho * spec.rho));
    Eigen::MatrixXd curves(n_curves, spec.length);
    for (Eigen::Index i = 0; i < n_curves; ++i) {
        curves(i, 0) = rng.normal(0.0, marginal_sd);
        for (Eigen::Index k = 1; k < spec.length; ++k)
            curves(i, k) = spec.rho * curves(i, k - 1) + rng.normal(0.0, innov_sd);
    }
    return curves;
}

const char* surface_kind_name(SurfaceKind kind) {
    switch (kind) {
        case SurfaceKind::lagged: return "lagged";
        case SurfaceKind::cumulative: return "cumulative";
        case SurfaceKind::time_specific: return "time_specific";
        case SurfaceKind::delayed_time_specific: return "delayed_time_specific";
    }
    return "unknown";
}

SurfaceKind parse_surface_kind(const std::string& name) {
    if (name == "lagged") return SurfaceKind::lagged;
    if (name == "cumulative") return SurfaceKind::cumulative;
    if (name == "time_specific") return SurfaceKind::time_specific;
    if (name == "delayed_time_specific")
        return SurfaceKind::delayed_time_specific;
    throw InvalidParameterError("unknown surface kind: " + name);
}

ConstrainedSurface make_surface(const SurfaceSpec& spec) {
    const Eigen::Index t_len = spec.grid_size;
    if (t_len < 2) throw InvalidParameterError("surface grid too small");

    const Eigen::Index lag = spec.lag_width.value_or(t_len / 8);
    const Eigen::Index lo = spec.window_lo.value_or(t_len / 4);
    const Eigen::Index hi = spec.window_hi.value_or(3 * t_len / 8);
    const Eigen::Index delay = spec.delay.value_or(t_len / 4);
    if (lag < 0 || lag >= t_len)
        throw InvalidParameterError("lag width outside the grid");
    if (lo < 0 || hi >= t_len || lo > hi)
        throw InvalidParameterError("window outside the grid");
    if (delay < 0 || delay >= t_len)
        throw InvalidParameterError("delay outside the grid");

    ConstrainedSurface surface;
    surface.beta = Eigen::MatrixXd::Zero(t_len, t_len);
    surface.v_grid =
        Eigen::VectorXd::LinSpaced(t_len, 1.0, static_cast<double>(t_len));
    surface.t_grid = surface.v_grid;

    const double a = spec.amplitude;
    for (Eigen::Index v = 0; v < t_len; ++v) {
        for (Eigen::Index t = v; t < t_len; ++t) {
            switch (spec.kind) {
                case SurfaceKind::lagged:
                    if (t - lag <= v) surface.beta(v, t) = a;
                    break;
                case SurfaceKind::cumulative:
                    surface.beta(v, t) = a;
                    break;
                case SurfaceKind::time_specific:
                    if (v >= lo && v <= hi) surface.beta(v, t) = a;
                    break;
                case SurfaceKind::delayed_time_specific:
                    if (v >= lo && v <= hi && t >= v + delay)
                        surface.beta(v, t) = a;
                    break;
            }
        }
    }
    return surface;
}

FunctionalDataset generate_dataset(const ConstrainedSurface& surface,
                                   Eigen::Index n_subjects,
                                   const Ar1Spec& x_spec,
                                   const Ar1Spec& e_spec, Rng& rng) {
    const Eigen::Index t_len = surface.beta.cols();
    if (surface.beta.rows() != t_len)
        throw ShapeError("surface must be square for the shared grid");
    Ar1Spec xs = x_spec;
    Ar1Spec es = e_spec;
    xs.length = t_len;
    es.length = t_len;
    const Eigen::MatrixXd x = ar1_curves(xs, n_subjects, rng);
    const Eigen::MatrixXd e = ar1_curves(es, n_subjects, rng);
    FunctionalDataset data = make_dataset(x * surface.beta + e, x);
    data.t_grid = surface.t_grid;
    data.v_grid = surface.v_grid;
    return data;
}

namespace {

SurfaceSpec surface_from_json(const nlohmann::json& j, Eigen::Index t_len) {
    SurfaceSpec spec;
    spec.kind = parse_surface_kind(j.at("kind").get<std::string>());
    spec.grid_size = t_len;
    if (j.contains("amplitude")) spec.amplitude = j["amplitude"].get<double>();
    if (j.contains("lag_width"))
        spec.lag_width = j["lag_width"].get<Eigen::Index>();
    if (j.contains("window")) {
        spec.window_lo = j["window"].at(0).get<Eigen::Index>();
        spec.window_hi = j["window"].at(1).get<Eigen::Index>();
    }
    if (j.contains("delay")) spec.delay = j["delay"].get<Eigen::Index>();
    return spec;
}

} // namespace

ExperimentGrid parse_experiment_grid(const std::string& json_text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(json_text);
    } catch (const nlohmann::json::exception& e) {
        throw InvalidParameterError(std::string("bad experiment config: ") +
                                    e.what());
    }
    try {
        ExperimentGrid grid;
        grid.master_seed = j.value("master_seed", std::uint64_t{1});
        grid.replicates = j.value("replicates", 20);
        if (j.contains("N_list"))
            grid.n_list = j["N_list"].get<std::vector<Eigen::Index>>();
        if (j.contains("T_list"))
            grid.t_list = j["T_list"].get<std::vector<Eigen::Index>>();
        if (j.contains("retain_list"))
            grid.retain_list = j["retain_list"].get<std::vector<double>>();
        if (j.contains("sampler")) {
            const auto& s = j["sampler"];
            grid.sampler.total_iterations =
                s.value("total_iterations", grid.sampler.total_iterations);
            grid.sampler.burn_in = s.value("burn_in", grid.sampler.burn_in);
            grid.sampler.thinning = s.value("thinning", grid.sampler.thinning);
        }
        grid.filter = j.value("filter", grid.filter);
        grid.levels = j.value("levels", grid.levels);
        grid.alpha = j.value("alpha", grid.alpha);
        if (j.contains("x_ar1")) {
            grid.x_ar1.sigma2 = j["x_ar1"].value("sigma2", grid.x_ar1.sigma2);
            grid.x_ar1.rho = j["x_ar1"].value("rho", grid.x_ar1.rho);
        }
        if (j.contains("e_ar1")) {
            grid.e_ar1.sigma2 = j["e_ar1"].value("sigma2", grid.e_ar1.sigma2);
            grid.e_ar1.rho = j["e_ar1"].value("rho", grid.e_ar1.rho);
        }
        grid.output_dir = j.value("output_dir", grid.output_dir);
        if (!j.contains("surfaces") || !j["surfaces"].is_array() ||
            j["surfaces"].empty())
            throw InvalidParameterError(
                "experiment config needs a non-empty surfaces list");
        // Surface geometry is grid-relative; specs are re-instantiated per T.
        for (const auto& s : j["surfaces"])
            grid.surfaces.push_back(surface_from_json(s, grid.t_list.front()));
        if (grid.replicates < 1)
            throw InvalidParameterError("replicates must be >= 1");
        return grid;
    } catch (const nlohmann::json::exception& e) {
        throw InvalidParameterError(std::string("bad experiment config: ") +
                                    e.what());
    }
}

std::uint64_t replicate_seed(std::uint64_t master_seed, std::size_t cell_index,
                             int replicate) {
    return substream_seed(master_seed, 0x5eedULL + cell_index,
                          static_cast<std::uint64_t>(replicate));
}

double CellResult::mean(double ReplicateResult::*field) const {
    double acc = 0.0;
    int used = 0;
    for (const auto& r : replicates)
        if (!r.failed) {
            acc += r.*field;
            ++used;
        }
    return used > 0 ? acc / used : std::nan("");
}

int CellResult::n_failed() const {
    int failed = 0;
    for (const auto& r : replicates)
        if (r.failed) ++failed;
    return failed;
}

namespace {

struct CellSpec {
    Eigen::Index n_subjects;
    Eigen::Index t_len;
    double retain;
    SurfaceSpec surface;
    std::size_t index;
    std::filesystem::path dir;
};

std::filesystem::path cell_directory(const ExperimentGrid& grid,
                                     const CellSpec& cell) {
    std::ostringstream name;
    name << "N" << cell.n_subjects << "_T" << cell.t_len << "_r"
         << std::llround(cell.retain * 100) << "_"
         << surface_kind_name(cell.surface.kind);
    return std::filesystem::path(grid.output_dir) / "cells" / name.str();
}

ReplicateResult run_replicate(const ExperimentGrid& grid, const CellSpec& cell,
                              int rep) {
    ReplicateResult result;
    result.replicate = rep;
    result.seed = replicate_seed(grid.master_seed, cell.index, rep);
    const auto start = std::chrono::steady_clock::now();

    SurfaceSpec spec = cell.surface;
    spec.grid_size = cell.t_len;
    const ConstrainedSurface truth = make_surface(spec);

    Rng data_rng(substream_seed(result.seed, 0, 0));
    const FunctionalDataset raw = generate_dataset(
        truth, cell.n_subjects, grid.x_ar1, grid.e_ar1, data_rng);
    auto [standardized, record] = standardize(raw);
    const HflmDesign design =
        build_design(standardized, make_filter(grid.filter), grid.levels,
                     cell.retain, &record);

    SamplerSettings settings = grid.sampler;
    settings.seed = substream_seed(result.seed, 1, 0);
    PosteriorSamples samples = run_sampler(design, settings);
    rescale_to_data_units(samples, record);

    if (grid.keep_samples) {
        std::ostringstream name;
        name << "rep_" << rep << ".wph1";
        write_samples(cell.dir / name.str(), samples);
    }

    const BandResult joint = joint_band(samples, grid.alpha);
    const BandResult pointwise = pointwise_band(samples, grid.alpha);
    const FitMetrics fit = metrics(samples, truth, pointwise, joint, &design);
    result.rmise = fit.rmise;
    result.pe = fit.energy_preserved;
    result.pointwise_cov = fit.pointwise_coverage;
    result.joint_cov = fit.joint_coverage;
    result.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
            .count();
    return result;
}

std::filesystem::path replicate_file(const CellSpec& cell, int rep) {
    std::ostringstream name;
    name << "rep_" << rep << ".json";
    return cell.dir / name.str();
}

void persist_replicate(const CellSpec& cell, const ReplicateResult& r) {
    nlohmann::json j;
    j["replicate"] = r.replicate;
    j["seed"] = r.seed;
    j["failed"] = r.failed;
    if (r.failed) {
        j["error"] = r.error;
    } else {
        j["rmise"] = r.rmise;
        j["pe"] = r.pe;
        j["pointwise_cov"] = r.pointwise_cov;
        j["joint_cov"] = r.joint_cov;
        j["wall_seconds"] = r.wall_seconds;
    }
    const std::filesystem::path final_path = replicate_file(cell, r.replicate);
    const std::filesystem::path tmp = final_path.string() + ".tmp";
    {
        std::ofstream out(tmp);
        out << j.dump(2) << '\n';
        if (!out)
            throw PersistenceError("cannot persist replicate result: " +
                                   final_path.string());
    }
    std::filesystem::rename(tmp, final_path);
}

bool load_replicate(const CellSpec& cell, int rep, ReplicateResult& out) {
    const std::filesystem::path path = replicate_file(cell, rep);
    std::ifstream in(path);
    if (!in) return false;
    try {
        nlohmann::json j = nlohmann::json::parse(in);
        out.replicate = j.at("replicate").get<int>();
        out.seed = j.at("seed").get<std::uint64_t>();
        out.failed = j.at("failed").get<bool>();
        if (out.failed) {
            out.error = j.value("error", "");
        } else {
            out.rmise = j.at("rmise").get<double>();
            out.pe = j.at("pe").get<double>();
            out.pointwise_cov = j.at("pointwise_cov").get<double>();
            out.joint_cov = j.at("joint_cov").get<double>();
            out.wall_seconds = j.at("wall_seconds").get<double>();
        }
        return true;
    } catch (const nlohmann::json::exception&) {
        return false; // unreadable partial file: recompute
    }
}

} // namespace

std::vector<CellResult> run_experiment(const ExperimentGrid& grid) {
    if (grid.output_dir.empty())
        throw InvalidParameterError("experiment needs an output directory");
    if (grid.surfaces.empty())
        throw InvalidParameterError("experiment needs at least one surface");

    std::vector<CellSpec> cells;
    std::size_t index = 0;
    for (Eigen::Index n : grid.n_list)
        for (Eigen::Index t : grid.t_list)
            for (double retain : grid.retain_list)
                for (const auto& surface : grid.surfaces) {
                    CellSpec cell{n, t, retain, surface, index++, {}};
                    cell.dir = cell_directory(grid, cell);
                    std::filesystem::create_directories(cell.dir);
                    cells.push_back(cell);
                }

    struct Task {
        std::size_t cell;
        int rep;
    };
    std::vector<Task> tasks;
    std::vector<CellResult> results(cells.size());
    for (std::size_t ci = 0; ci < cells.size(); ++ci) {
        results[ci].n_subjects = cells[ci].n_subjects;
        results[ci].n_t = cells[ci].t_len;
        results[ci].retain = cells[ci].retain;
        results[ci].surface = cells[ci].surface.kind;
        results[ci].replicates.resize(static_cast<std::size_t>(grid.replicates));
        for (int rep = 0; rep < grid.replicates; ++rep) {
            ReplicateResult cached;
            if (load_replicate(cells[ci], rep, cached)) {
                results[ci].replicates[static_cast<std::size_t>(rep)] = cached;
            } else {
                tasks.push_back({ci, rep});
            }
        }
    }

    std::atomic<std::size_t> next{0};
    std::mutex io_mutex;
    auto worker = [&]() {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= tasks.size()) return;
            const Task& task = tasks[i];
            ReplicateResult r;
            try {
                r = run_replicate(grid, cells[task.cell], task.rep);
            } catch (const std::exception& e) {
                r.replicate = task.rep;
                r.seed = replicate_seed(grid.master_seed, task.cell, task.rep);
                r.failed = true;
                r.error = e.what();
                std::lock_guard<std::mutex> lock(io_mutex);
                std::cerr << "warning: replicate " << task.rep << " of cell "
                          << task.cell << " failed: " << e.what() << '\n';
            }
            persist_replicate(cells[task.cell], r);
            results[task.cell].replicates[static_cast<std::size_t>(task.rep)] = r;
        }
    };

    const int jobs = std::max(1, grid.jobs);
    if (jobs == 1 || tasks.size() <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int i = 0; i < jobs; ++i) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }

    for (std::size_t ci = 0; ci < cells.size(); ++ci) {
        const int failed = results[ci].n_failed();
        if (failed * 5 > grid.replicates) {
            std::ostringstream msg;
            msg << "cell " << ci << " failed " << failed << " of "
                << grid.replicates << " replicates";
            throw NumericalError(msg.str());
        }
    }

    std::ofstream summary(std::filesystem::path(grid.output_dir) /
                          "summary.csv");
    summary << "N,T,retain,surface,rmise,pe,pointwise_cov,joint_cov,"
               "wall_seconds\n";
    for (const auto& cell : results) {
        summary << cell.n_subjects << ',' << cell.n_t << ','
                << format_double(cell.retain) << ','
                << surface_kind_name(cell.surface) << ','
                << format_double(cell.mean(&ReplicateResult::rmise)) << ','
                << format_double(cell.mean(&ReplicateResult::pe)) << ','
                << format_double(cell.mean(&ReplicateResult::pointwise_cov))
                << ','
                << format_double(cell.mean(&ReplicateResult::joint_cov)) << ','
                << format_double(cell.mean(&ReplicateResult::wall_seconds))
                << '\n';
    }
    if (!summary) throw PersistenceError("cannot write experiment summary");
    return results;
}

} // namespace wphist
