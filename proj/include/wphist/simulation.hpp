#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "wphist/dataset.hpp"
#include "wphist/design.hpp"
#include "wphist/rng.hpp"
#include "wphist/sampler.hpp"

namespace wphist {

/// Stationary AR(1) law: marginal variance sigma2, lag-one correlation
/// rho, on `length` grid points.
struct Ar1Spec {
    double sigma2 = 1.0;
    double rho = 0.0;
    Eigen::Index length = 0;
};

/// Independent rows drawn by the stationary recursion
/// x_1 ~ N(0, s2), x_{k+1} = rho x_k + N(0, s2 (1 - rho^2)).
Eigen::MatrixXd ar1_curves(const Ar1Spec& spec, Eigen::Index n_curves,
                           Rng& rng);

enum class SurfaceKind { lagged, cumulative, time_specific, delayed_time_specific };

const char* surface_kind_name(SurfaceKind kind);
SurfaceKind parse_surface_kind(const std::string& name);

/// Piecewise-constant historical surface archetypes on a T x T grid,
/// amplitude A (max |beta| = A), always zero below the diagonal.
/// Unset geometry fields take the defaults lag_width = T/8,
/// window = [T/4, 3T/8], delay = T/4 (inclusive index windows).
struct SurfaceSpec {
    SurfaceKind kind = SurfaceKind::cumulative;
    Eigen::Index grid_size = 64;
    double amplitude = 1.0;
    std::optional<Eigen::Index> lag_width;
    std::optional<Eigen::Index> window_lo;
    std::optional<Eigen::Index> window_hi;
    std::optional<Eigen::Index> delay;
};

ConstrainedSurface make_surface(const SurfaceSpec& spec);

/// Y = X beta + E with AR(1) exposure and error curves.
FunctionalDataset generate_dataset(const ConstrainedSurface& surface,
                                   Eigen::Index n_subjects,
                                   const Ar1Spec& x_spec,
                                   const Ar1Spec& e_spec, Rng& rng);

/// Full factorial experiment specification.
struct ExperimentGrid {
    std::uint64_t master_seed = 1;
    int replicates = 20;
    std::vector<Eigen::Index> n_list{50};
    std::vector<Eigen::Index> t_list{64};
    std::vector<double> retain_list{0.25};
    std::vector<SurfaceSpec> surfaces;
    SamplerSettings sampler;
    std::string filter = "db3";
    int levels = 3;
    double alpha = 0.05;
    Ar1Spec x_ar1{3.5, 0.75, 0};
    Ar1Spec e_ar1{0.1, 0.5, 0};
    std::string output_dir;
    int jobs = 1;
    bool keep_samples = false;
};

/// Parses the JSON config (keys master_seed, replicates, N_list, T_list,
/// retain_list, surfaces, sampler.{total_iterations,burn_in,thinning},
/// output_dir, plus optional filter/levels/alpha/x_ar1/e_ar1).
ExperimentGrid parse_experiment_grid(const std::string& json_text);

struct ReplicateResult {
    int replicate = 0;
    std::uint64_t seed = 0;
    double rmise = 0.0;
    double pe = 0.0;
    double pointwise_cov = 0.0;
    double joint_cov = 0.0;
    double wall_seconds = 0.0;
    bool failed = false;
    std::string error;
};

struct CellResult {
    Eigen::Index n_subjects = 0;
    Eigen::Index n_t = 0;
    double retain = 0.0;
    SurfaceKind surface = SurfaceKind::cumulative;
    std::vector<ReplicateResult> replicates;

    double mean(double ReplicateResult::*field) const;
    int n_failed() const;
};

/// Runs every (N, T, retain, surface) cell for `replicates` seeded
/// datasets each, persisting one JSON per replicate so interrupted grids
/// resume where they left off, and writes summary.csv. Replicates run
/// on `jobs` worker threads; per-replicate results do not depend on the
/// thread count.
std::vector<CellResult> run_experiment(const ExperimentGrid& grid);

/// Deterministic replicate seed for a cell/replicate pair.
std::uint64_t replicate_seed(std::uint64_t master_seed, std::size_t cell_index,
                             int replicate);

} // namespace wphist
