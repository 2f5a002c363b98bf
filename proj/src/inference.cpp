#include "wphist/inference.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "wphist/errors.hpp"

namespace wphist {

namespace {

constexpr double kSdFloor = 1e-12;

// Nearest-rank (type 1) empirical quantile of an ascending-sorted sample.
double nearest_rank(const std::vector<double>& sorted_asc, double p) {
    const std::size_t n = sorted_asc.size();
    std::size_t rank = static_cast<std::size_t>(
        std::ceil(p * static_cast<double>(n)));
    rank = std::clamp<std::size_t>(rank, 1, n);
    return sorted_asc[rank - 1];
}

void check_alpha(double alpha) {
    if (!(alpha > 0.0) || !(alpha < 1.0))
        throw InvalidParameterError("alpha must lie in (0, 1)");
}

struct MeanSd {
    Eigen::MatrixXd mean, sd;
};

MeanSd draw_moments(const PosteriorSamples& samples) {
    const Eigen::Index m = samples.count();
    MeanSd out;
    out.mean = Eigen::MatrixXd::Zero(samples.draws[0].rows(),
                                     samples.draws[0].cols());
    for (const auto& d : samples.draws) out.mean += d;
    out.mean /= static_cast<double>(m);
    Eigen::MatrixXd ss = Eigen::MatrixXd::Zero(out.mean.rows(), out.mean.cols());
    for (const auto& d : samples.draws) {
        const Eigen::MatrixXd diff = d - out.mean;
        ss += diff.cwiseProduct(diff);
    }
    out.sd = (ss / static_cast<double>(m - 1)).cwiseSqrt();
    return out;
}

} // namespace

BfdrCutoff bfdr_cutoff(const std::vector<double>& sorted_desc, double alpha) {
    BfdrCutoff cut;
    double running = 0.0;
    for (std::size_t r = 0; r < sorted_desc.size(); ++r) {
        running += 1.0 - sorted_desc[r];
        if (running / static_cast<double>(r + 1) <= alpha)
            cut.lambda = static_cast<Eigen::Index>(r + 1);
    }
    cut.phi = cut.lambda > 0
                  ? sorted_desc[static_cast<std::size_t>(cut.lambda - 1)]
                  : 1.0;
    return cut;
}

BfdrResult bfdr(const PosteriorSamples& samples, double delta, double alpha) {
    if (!(delta > 0.0)) throw InvalidParameterError("delta must be positive");
    check_alpha(alpha);
    if (samples.count() < 1) throw InvalidParameterError("no stored draws");

    const Eigen::Index v_len = samples.draws[0].rows();
    const Eigen::Index t_len = samples.draws[0].cols();
    const double m = static_cast<double>(samples.count());

    BfdrResult out;
    out.delta = delta;
    out.alpha = alpha;
    out.p_b = Eigen::MatrixXd::Zero(v_len, t_len);
    out.flag_grid = BoolGrid::Constant(v_len, t_len, false);

    for (const auto& draw : samples.draws)
        for (Eigen::Index v = 0; v < v_len; ++v)
            for (Eigen::Index t = v; t < t_len; ++t)
                if (std::abs(draw(v, t)) > delta) out.p_b(v, t) += 1.0;

    std::vector<double> probs;
    probs.reserve(static_cast<std::size_t>(v_len * t_len));
    for (Eigen::Index v = 0; v < v_len; ++v)
        for (Eigen::Index t = v; t < t_len; ++t) {
            out.p_b(v, t) /= m;
            probs.push_back(out.p_b(v, t));
        }

    // Descending stable sort keeps raster order between ties.
    std::stable_sort(probs.begin(), probs.end(), std::greater<double>());
    const BfdrCutoff cut = bfdr_cutoff(probs, alpha);
    out.lambda_rank = cut.lambda;
    out.phi_alpha = cut.phi;

    if (cut.lambda > 0) {
        for (Eigen::Index v = 0; v < v_len; ++v)
            for (Eigen::Index t = v; t < t_len; ++t)
                if (out.p_b(v, t) >= out.phi_alpha) {
                    out.flag_grid(v, t) = true;
                    out.flagged.emplace_back(v, t);
                }
    }
    return out;
}

Eigen::MatrixXd posterior_mean(const PosteriorSamples& samples) {
    if (samples.count() < 1) throw InvalidParameterError("no stored draws");
    Eigen::MatrixXd mean = Eigen::MatrixXd::Zero(samples.draws[0].rows(),
                                                 samples.draws[0].cols());
    for (const auto& d : samples.draws) mean += d;
    return mean / static_cast<double>(samples.count());
}

BandResult joint_band(const PosteriorSamples& samples, double alpha) {
    check_alpha(alpha);
    if (samples.count() < 2)
        throw InvalidParameterError("joint band needs at least two draws");

    const MeanSd mom = draw_moments(samples);
    const Eigen::Index v_len = mom.mean.rows();
    const Eigen::Index t_len = mom.mean.cols();

    bool any_variable = false;
    for (Eigen::Index v = 0; v < v_len && !any_variable; ++v)
        for (Eigen::Index t = v; t < t_len; ++t)
            if (mom.sd(v, t) >= kSdFloor) {
                any_variable = true;
                break;
            }
    if (!any_variable)
        throw DataError("degenerate posterior: every constrained cell is constant");

    std::vector<double> max_devs;
    max_devs.reserve(static_cast<std::size_t>(samples.count()));
    for (const auto& draw : samples.draws) {
        double worst = 0.0;
        for (Eigen::Index v = 0; v < v_len; ++v)
            for (Eigen::Index t = v; t < t_len; ++t) {
                if (mom.sd(v, t) < kSdFloor) continue;
                worst = std::max(
                    worst, std::abs((draw(v, t) - mom.mean(v, t)) / mom.sd(v, t)));
            }
        max_devs.push_back(worst);
    }
    std::sort(max_devs.begin(), max_devs.end());
    const double q = nearest_rank(max_devs, 1.0 - alpha);

    BandResult band;
    band.kind = BandKind::joint;
    band.alpha = alpha;
    band.q_quantile = q;
    band.lower = mom.mean;
    band.upper = mom.mean;
    for (Eigen::Index v = 0; v < v_len; ++v)
        for (Eigen::Index t = 0; t < t_len; ++t) {
            if (mom.sd(v, t) < kSdFloor) continue;
            band.lower(v, t) -= q * mom.sd(v, t);
            band.upper(v, t) += q * mom.sd(v, t);
        }
    return band;
}

BandResult pointwise_band(const PosteriorSamples& samples, double alpha) {
    check_alpha(alpha);
    if (samples.count() < 2)
        throw InvalidParameterError("pointwise band needs at least two draws");

    const Eigen::Index v_len = samples.draws[0].rows();
    const Eigen::Index t_len = samples.draws[0].cols();
    BandResult band;
    band.kind = BandKind::pointwise;
    band.alpha = alpha;
    band.lower = Eigen::MatrixXd::Zero(v_len, t_len);
    band.upper = Eigen::MatrixXd::Zero(v_len, t_len);

    std::vector<double> cell(static_cast<std::size_t>(samples.count()));
    for (Eigen::Index v = 0; v < v_len; ++v)
        for (Eigen::Index t = 0; t < t_len; ++t) {
            for (Eigen::Index m = 0; m < samples.count(); ++m)
                cell[static_cast<std::size_t>(m)] =
                    samples.draws[static_cast<std::size_t>(m)](v, t);
            std::sort(cell.begin(), cell.end());
            band.lower(v, t) = nearest_rank(cell, alpha / 2.0);
            band.upper(v, t) = nearest_rank(cell, 1.0 - alpha / 2.0);
        }
    return band;
}

double band_content(const PosteriorSamples& samples, const BandResult& band) {
    const Eigen::Index v_len = band.lower.rows();
    const Eigen::Index t_len = band.lower.cols();
    Eigen::Index inside = 0;
    for (const auto& draw : samples.draws) {
        bool ok = true;
        for (Eigen::Index v = 0; v < v_len && ok; ++v)
            for (Eigen::Index t = v; t < t_len; ++t) {
                // Zero-width cells are the ones a joint band excluded
                // from its maximum; skip them for the content check.
                if (band.upper(v, t) - band.lower(v, t) < kSdFloor) continue;
                if (draw(v, t) < band.lower(v, t) ||
                    draw(v, t) > band.upper(v, t)) {
                    ok = false;
                    break;
                }
            }
        if (ok) ++inside;
    }
    return static_cast<double>(inside) / static_cast<double>(samples.count());
}

FitMetrics metrics(const PosteriorSamples& samples,
                   const ConstrainedSurface& truth,
                   const BandResult& pointwise, const BandResult& joint,
                   const HflmDesign* design) {
    const Eigen::MatrixXd mean = posterior_mean(samples);
    if (truth.beta.rows() != mean.rows() || truth.beta.cols() != mean.cols())
        throw ShapeError("true surface dimensions do not match the draws");
    if (pointwise.lower.rows() != mean.rows() ||
        joint.lower.rows() != mean.rows())
        throw ShapeError("band dimensions do not match the draws");

    FitMetrics out;
    double sq_sum = 0.0;
    Eigen::Index cells = 0, pw_cov = 0, joint_cov = 0;
    for (Eigen::Index v = 0; v < mean.rows(); ++v)
        for (Eigen::Index t = v; t < mean.cols(); ++t) {
            const double err = mean(v, t) - truth.beta(v, t);
            sq_sum += err * err;
            ++cells;
            const double b = truth.beta(v, t);
            if (b >= pointwise.lower(v, t) && b <= pointwise.upper(v, t))
                ++pw_cov;
            if (b >= joint.lower(v, t) && b <= joint.upper(v, t)) ++joint_cov;
        }
    out.rmise = std::sqrt(sq_sum / static_cast<double>(cells));
    out.pointwise_coverage =
        static_cast<double>(pw_cov) / static_cast<double>(cells);
    out.joint_coverage =
        static_cast<double>(joint_cov) / static_cast<double>(cells);
    out.energy_preserved = design != nullptr ? design->energy_preserved() : 1.0;
    return out;
}

} // namespace wphist
