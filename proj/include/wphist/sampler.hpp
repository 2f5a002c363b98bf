#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "wphist/design.hpp"
#include "wphist/rng.hpp"

namespace wphist {

/// Fixed prior hyperparameters, normally set from the data by
/// empirical_bayes().
struct HyperParameters {
    double a_tau = 2.0, b_tau = 1.0;       // IG prior on slab variances
    double a_pi = 1.0, b_pi = 1.0;         // Beta prior on inclusion rates
    double a_sigma2 = 2.0, b_sigma2 = 1.0; // IG prior on noise variances
    double mh_proposal_sd = 0.1;           // sd of the truncated proposals
};

/// Which exponent the inclusion Bayes factor uses. `derived` is the
/// standard spike-and-slab marginal-likelihood form; `paper_literal`
/// keeps the reciprocal factor as printed in the source formula.
enum class BfExponent { derived, paper_literal };

enum class ScanOrder { raster, random };

struct SamplerOptions {
    BfExponent bf_exponent = BfExponent::derived;
    ScanOrder scan_order = ScanOrder::raster;
    bool keep_packet_draws = false;
};

struct SamplerSettings {
    int total_iterations = 2000;
    int burn_in = 1000;
    int thinning = 1;
    std::uint64_t seed = 1;
    SamplerOptions options;
};

/// Mutable Gibbs state. beta_wp is exactly zero wherever gamma is zero
/// or the mask is false.
struct SamplerState {
    Eigen::MatrixXd beta_wp;                 // V' x T
    Eigen::Matrix<int, Eigen::Dynamic, Eigen::Dynamic> gamma; // V' x T
    Eigen::VectorXd sigma2;                  // T, one per outcome packet
    Eigen::MatrixXd tau;                     // V' x n_scales (smooths over k)
    Eigen::MatrixXd pi;                      // V' x n_scales
    int iteration = 0;
};

/// Per-outcome multi-column OLS over the mask-allowed columns; feeds the
/// empirical Bayes fits and the sampler initialization.
struct OlsSummary {
    Eigen::MatrixXd coef;      // V' x T, zero outside the mask
    Eigen::MatrixXd se;        // V' x T
    Eigen::VectorXd resid_var; // T
};

OlsSummary design_ols(const HflmDesign& design);

/// Moment-based empirical Bayes fits: inverse-gamma to the OLS residual
/// variances (sigma^2) and to the screened squared coefficients (tau),
/// beta to per-block exceedance proportions (pi). Degenerate fits fall
/// back to documented defaults with a warning, never an error.
HyperParameters empirical_bayes(const HflmDesign& design,
                                std::vector<std::string>* warnings = nullptr);

/// State initialized at 3-standard-error thresholded OLS values.
SamplerState initial_state(const HflmDesign& design,
                           const HyperParameters& hyper);

/// Single-site partial-residual estimates for cell (column c, outcome q):
/// beta_hat = x'r / x'x and Lambda = sigma2_q / x'x.
std::pair<double, double> ols_partial(const HflmDesign& design,
                                      const SamplerState& state,
                                      Eigen::Index c, Eigen::Index q);

/// Closed-form pieces of the spike-and-slab update for one cell.
struct SpikeSlabDecision {
    double inclusion_prob = 0.0; // alpha
    double post_mean = 0.0;      // mu
    double post_var = 0.0;       // epsilon
};

SpikeSlabDecision spike_slab_decision(double beta_hat, double lambda,
                                      double tau, double pi,
                                      BfExponent exponent);

/// Log acceptance ratio of the positive-truncated Gaussian random-walk
/// step for one noise variance, given the residual sum of squares over n
/// observations. Includes the truncation normalization correction.
double mh_log_accept_sigma2(double current, double proposal, double ssr,
                            Eigen::Index n, const HyperParameters& hyper);

/// One sweep of the spike-and-slab updates over all mask-allowed cells,
/// outcome-major scan. Uses a substream per outcome coefficient derived
/// from (seed, outcome index, state.iteration).
void sample_beta_gamma(SamplerState& state, const HflmDesign& design,
                       const SamplerOptions& options, std::uint64_t seed);

/// One Metropolis-Hastings sweep over the noise variances.
void sample_sigma2(SamplerState& state, const HflmDesign& design,
                   const HyperParameters& hyper, std::uint64_t seed);

/// Conjugate updates of the slab variances and inclusion rates, pooled
/// over locations within each (retained column, outcome scale) block.
void sample_tau_pi(SamplerState& state, const HflmDesign& design,
                   const HyperParameters& hyper, std::uint64_t seed);

struct SampleMeta {
    std::uint64_t seed = 0;
    int total_iterations = 0;
    int burn_in = 0;
    int thinning = 0;
    Eigen::Index n_v = 0;
    Eigen::Index n_t = 0;
    Eigen::Index n_retained = 0;
    int levels = 0;
    std::string filter_name;
    double retain_fraction = 1.0;
    std::string bf_exponent = "derived";
    std::string scan_order = "raster";
    std::uint64_t design_fingerprint = 0;
};

/// Stored posterior: data-space surface draws, optional packet draws,
/// and inclusion frequencies over the stored iterations.
struct PosteriorSamples {
    std::vector<Eigen::MatrixXd> draws;        // each V x T
    std::vector<Eigen::MatrixXd> packet_draws; // each V' x T, optional
    Eigen::MatrixXd gamma_means;               // V' x T
    SampleMeta meta;

    Eigen::Index count() const {
        return static_cast<Eigen::Index>(draws.size());
    }
};

/// Running means recorded every 100 iterations: one column per noise
/// variance plus five tracked coefficient cells.
struct Diagnostics {
    std::vector<int> checkpoints;
    Eigen::MatrixXd sigma2_running_mean; // checkpoints x T
    Eigen::MatrixXd beta_running_mean;   // checkpoints x tracked cells
    std::vector<std::pair<Eigen::Index, Eigen::Index>> tracked_cells;
};

/// Full Gibbs run: beta/gamma, sigma2, tau/pi sweeps per iteration,
/// thinned storage after burn-in, data-space reconstruction of each
/// stored draw. Deterministic for a fixed seed.
PosteriorSamples run_sampler(const HflmDesign& design,
                             const SamplerSettings& settings,
                             const HyperParameters* hyper = nullptr,
                             Diagnostics* diagnostics = nullptr);

/// Rescales data-space draws from standardized units back to the units
/// of the original data: beta(v,t) *= sd_y(t) / sd_x(v).
void rescale_to_data_units(PosteriorSamples& samples,
                           const Standardization& standardization);

} // namespace wphist
