#pragma once

#include <Eigen/Dense>
#include <utility>
#include <vector>

#include "wphist/design.hpp"
#include "wphist/sampler.hpp"

namespace wphist {

/// Ranked-cutoff false discovery result over the constrained region.
struct BfdrResult {
    Eigen::MatrixXd p_b;  // V x T, zero outside v <= t
    double phi_alpha = 1.0;
    Eigen::Index lambda_rank = 0; // 0 when no rank satisfies the bound
    std::vector<std::pair<Eigen::Index, Eigen::Index>> flagged;
    BoolGrid flag_grid;
    double delta = 0.0;
    double alpha = 0.0;
};

struct BfdrCutoff {
    Eigen::Index lambda = 0;
    double phi = 1.0;
};

/// Cutoff rule on probabilities already sorted in descending order:
/// lambda = max r such that the running mean of (1 - P) through rank r
/// stays within alpha; phi is the probability at that rank (sentinel 1
/// when no rank qualifies).
BfdrCutoff bfdr_cutoff(const std::vector<double>& sorted_desc, double alpha);

/// Exceedance probabilities P(|beta(v,t)| > delta | data) from the stored
/// draws, ranked cutoff at level alpha, and the flagged cell set.
BfdrResult bfdr(const PosteriorSamples& samples, double delta, double alpha);

enum class BandKind { pointwise, joint };

struct BandResult {
    Eigen::MatrixXd lower, upper; // V x T
    BandKind kind = BandKind::pointwise;
    double alpha = 0.0;
    double q_quantile = 0.0; // joint bands only
};

/// Elementwise posterior mean surface.
Eigen::MatrixXd posterior_mean(const PosteriorSamples& samples);

/// Simultaneous band mean +/- q * sd over the constrained region, where q
/// is the empirical (1-alpha) quantile (nearest rank) of each draw's
/// maximum standardized deviation. Cells with sd below 1e-12 get
/// zero-width bands and are excluded from the maximum.
BandResult joint_band(const PosteriorSamples& samples, double alpha);

/// Elementwise nearest-rank alpha/2 and 1-alpha/2 quantile band.
BandResult pointwise_band(const PosteriorSamples& samples, double alpha);

/// Fraction of stored draws lying entirely inside the band over the
/// cells the band's maximum ranged over. By construction >= 1 - alpha
/// for joint bands.
double band_content(const PosteriorSamples& samples, const BandResult& band);

struct FitMetrics {
    double rmise = 0.0;
    double pointwise_coverage = 0.0;
    double joint_coverage = 0.0;
    double energy_preserved = 1.0; // fraction in [0, 1]
};

/// Per-cell root mean square error of the posterior mean against the true
/// surface and band coverage fractions, all over the constrained region;
/// energy preserved is read from the design when one is supplied.
FitMetrics metrics(const PosteriorSamples& samples,
                   const ConstrainedSurface& truth,
                   const BandResult& pointwise, const BandResult& joint,
                   const HflmDesign* design = nullptr);

} // namespace wphist
