#include "wphist/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>
#include <vector>

#include "wphist/errors.hpp"

namespace wphist {

namespace {

// Substream kinds so every (sweep, unit, iteration) triple seeds its own
// generator; parallel and serial executions then agree.
constexpr std::uint64_t kStreamBeta = 1;
constexpr std::uint64_t kStreamSigma = 2;
constexpr std::uint64_t kStreamTauPi = 3;

std::uint64_t stream_id(std::uint64_t kind, std::uint64_t unit) {
    return (kind << 40) ^ unit;
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x * M_SQRT1_2); }

struct MomentInverseGamma {
    double a = 0.0, b = 0.0;
    bool ok = false;
};

// a = m^2/s^2 + 2, b = m (a - 1) reproduces mean m and variance s^2.
MomentInverseGamma fit_inverse_gamma(const std::vector<double>& values) {
    MomentInverseGamma fit;
    if (values.size() < 2) return fit;
    const double n = static_cast<double>(values.size());
    const double mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
    double var = 0.0;
    for (double v : values) var += (v - mean) * (v - mean);
    var /= (n - 1.0);
    if (!(mean > 1e-300) || !(var > 1e-300)) return fit;
    fit.a = mean * mean / var + 2.0;
    fit.b = mean * (fit.a - 1.0);
    fit.ok = std::isfinite(fit.a) && std::isfinite(fit.b) && fit.b > 0.0;
    return fit;
}

} // namespace

OlsSummary design_ols(const HflmDesign& design) {
    const Eigen::Index n = design.n_subjects();
    const Eigen::Index t_len = design.n_outcome();
    const Eigen::Index v_ret = design.n_retained();
    const Eigen::MatrixXd& x = design.x_packets_retained();

    OlsSummary out;
    out.coef = Eigen::MatrixXd::Zero(v_ret, t_len);
    out.se = Eigen::MatrixXd::Constant(v_ret, t_len,
                                       std::numeric_limits<double>::infinity());
    out.resid_var.resize(t_len);

    for (Eigen::Index q = 0; q < t_len; ++q) {
        std::vector<Eigen::Index> cols;
        for (Eigen::Index c = 0; c < v_ret; ++c)
            if (design.mask(c, q)) cols.push_back(c);
        const Eigen::Index p = static_cast<Eigen::Index>(cols.size());

        Eigen::MatrixXd a(n, p);
        for (Eigen::Index j = 0; j < p; ++j)
            a.col(j) = x.col(cols[static_cast<std::size_t>(j)]);
        const Eigen::VectorXd y = design.y_packets().col(q);

        Eigen::MatrixXd gram = a.transpose() * a;
        const Eigen::VectorXd aty = a.transpose() * y;
        Eigen::LDLT<Eigen::MatrixXd> ldlt(gram);
        Eigen::VectorXd coef = ldlt.solve(aty);
        if (!coef.allFinite() ||
            (gram * coef - aty).norm() > 1e-6 * (aty.norm() + 1.0)) {
            // Rank-deficient block: a small ridge keeps things finite.
            gram.diagonal().array() +=
                1e-10 * gram.trace() / static_cast<double>(p) + 1e-300;
            ldlt.compute(gram);
            coef = ldlt.solve(aty);
        }

        const Eigen::VectorXd resid = y - a * coef;
        const double dof =
            static_cast<double>(std::max<Eigen::Index>(1, n - p));
        const double var = resid.squaredNorm() / dof;
        out.resid_var(q) = var;

        const Eigen::MatrixXd inv_gram =
            ldlt.solve(Eigen::MatrixXd::Identity(p, p));
        for (Eigen::Index j = 0; j < p; ++j) {
            const Eigen::Index c = cols[static_cast<std::size_t>(j)];
            out.coef(c, q) = coef(j);
            const double d = inv_gram(j, j);
            if (d > 0.0 && std::isfinite(d))
                out.se(c, q) = std::sqrt(var * d);
        }
    }
    return out;
}

HyperParameters empirical_bayes(const HflmDesign& design,
                                std::vector<std::string>* warnings) {
    auto warn = [warnings](const std::string& msg) {
        if (warnings != nullptr) warnings->push_back(msg);
    };
    const OlsSummary ols = design_ols(design);
    HyperParameters hyper;

    std::vector<double> resid(ols.resid_var.data(),
                              ols.resid_var.data() + ols.resid_var.size());
    const MomentInverseGamma sig_fit = fit_inverse_gamma(resid);
    if (sig_fit.ok) {
        hyper.a_sigma2 = sig_fit.a;
        hyper.b_sigma2 = sig_fit.b;
    } else {
        hyper.a_sigma2 = 2.0;
        hyper.b_sigma2 = 1.0;
        warn("degenerate residual variances; using default sigma^2 prior");
    }

    std::vector<double> screened, all_sq;
    for (Eigen::Index c = 0; c < design.n_retained(); ++c)
        for (Eigen::Index q = 0; q < design.n_outcome(); ++q) {
            if (!design.mask(c, q)) continue;
            const double b = ols.coef(c, q);
            all_sq.push_back(b * b);
            if (std::abs(b) > 3.0 * ols.se(c, q)) screened.push_back(b * b);
        }
    if (screened.size() < 5) screened = all_sq;
    const MomentInverseGamma tau_fit = fit_inverse_gamma(screened);
    if (tau_fit.ok) {
        hyper.a_tau = tau_fit.a;
        hyper.b_tau = tau_fit.b;
    } else {
        hyper.a_tau = 2.0;
        hyper.b_tau = 1.0;
        warn("degenerate coefficient screen; using default tau prior");
    }

    // Per (column, outcome scale) exceedance proportions, clipped away
    // from {0, 1} before the beta moment fit.
    std::vector<double> props;
    const Eigen::Index scale_size = design.scale_size();
    for (Eigen::Index c = 0; c < design.n_retained(); ++c) {
        for (Eigen::Index j = 0; j < design.n_scales(); ++j) {
            int total = 0, exceed = 0;
            for (Eigen::Index k = 0; k < scale_size; ++k) {
                const Eigen::Index q = j * scale_size + k;
                if (!design.mask(c, q)) continue;
                ++total;
                if (std::abs(ols.coef(c, q)) > 3.0 * ols.se(c, q)) ++exceed;
            }
            if (total > 0)
                props.push_back(std::clamp(
                    static_cast<double>(exceed) / total, 0.01, 0.99));
        }
    }
    bool pi_ok = false;
    if (props.size() >= 2) {
        const double n = static_cast<double>(props.size());
        const double mean = std::accumulate(props.begin(), props.end(), 0.0) / n;
        double var = 0.0;
        for (double v : props) var += (v - mean) * (v - mean);
        var /= (n - 1.0);
        if (var > 1e-300) {
            const double nu = mean * (1.0 - mean) / var - 1.0;
            if (nu > 0.0) {
                hyper.a_pi = mean * nu;
                hyper.b_pi = (1.0 - mean) * nu;
                pi_ok = hyper.a_pi > 0.0 && hyper.b_pi > 0.0;
            }
        }
    }
    if (!pi_ok) {
        hyper.a_pi = 1.0;
        hyper.b_pi = 1.0;
        warn("degenerate exceedance proportions; using flat pi prior");
    }

    std::vector<double> sorted = resid;
    std::sort(sorted.begin(), sorted.end());
    const double median = sorted[sorted.size() / 2];
    hyper.mh_proposal_sd = 0.2 * median;
    if (!(hyper.mh_proposal_sd > 0.0)) {
        hyper.mh_proposal_sd = 0.1;
        warn("zero median residual variance; using default proposal sd");
    }
    return hyper;
}

SamplerState initial_state(const HflmDesign& design,
                           const HyperParameters& hyper) {
    const OlsSummary ols = design_ols(design);
    SamplerState state;
    state.beta_wp = Eigen::MatrixXd::Zero(design.n_retained(), design.n_outcome());
    state.gamma = Eigen::Matrix<int, Eigen::Dynamic, Eigen::Dynamic>::Zero(
        design.n_retained(), design.n_outcome());
    for (Eigen::Index c = 0; c < design.n_retained(); ++c)
        for (Eigen::Index q = 0; q < design.n_outcome(); ++q)
            if (design.mask(c, q) &&
                std::abs(ols.coef(c, q)) > 3.0 * ols.se(c, q)) {
                state.beta_wp(c, q) = ols.coef(c, q);
                state.gamma(c, q) = 1;
            }
    state.sigma2 = ols.resid_var.cwiseMax(1e-10);
    const double tau_mean =
        hyper.a_tau > 1.0 ? hyper.b_tau / (hyper.a_tau - 1.0) : hyper.b_tau;
    state.tau = Eigen::MatrixXd::Constant(design.n_retained(),
                                          design.n_scales(), tau_mean);
    state.pi = Eigen::MatrixXd::Constant(design.n_retained(), design.n_scales(),
                                         hyper.a_pi / (hyper.a_pi + hyper.b_pi));
    state.iteration = 0;
    return state;
}

std::pair<double, double> ols_partial(const HflmDesign& design,
                                      const SamplerState& state,
                                      Eigen::Index c, Eigen::Index q) {
    if (!design.mask(c, q))
        throw ContractViolationError("ols_partial called on a masked-out cell");
    const Eigen::MatrixXd& x = design.x_packets_retained();
    Eigen::VectorXd residual =
        design.y_packets().col(q) - x * state.beta_wp.col(q);
    residual += x.col(c) * state.beta_wp(c, q);
    const double xtx = design.column_norms_sq()(c);
    const double beta_hat = x.col(c).dot(residual) / xtx;
    const double lambda = state.sigma2(q) / xtx;
    return {beta_hat, lambda};
}

SpikeSlabDecision spike_slab_decision(double beta_hat, double lambda,
                                      double tau, double pi,
                                      BfExponent exponent) {
    SpikeSlabDecision d;
    const double shrink = 1.0 / (1.0 + lambda / tau);
    d.post_mean = beta_hat * shrink;
    d.post_var = lambda * shrink;

    if (pi <= 0.0) {
        d.inclusion_prob = 0.0;
        return d;
    }
    if (pi >= 1.0) {
        d.inclusion_prob = 1.0;
        return d;
    }
    const double zeta2 = beta_hat * beta_hat / lambda;
    const double factor = exponent == BfExponent::derived
                              ? shrink
                              : (1.0 + lambda / tau);
    const double log_bf = -0.5 * std::log1p(tau / lambda) + 0.5 * zeta2 * factor;
    const double log_odds = std::log(pi) - std::log1p(-pi) + log_bf;
    if (log_odds > 30.0) {
        d.inclusion_prob = 1.0;
    } else if (log_odds < -30.0) {
        d.inclusion_prob = 0.0;
    } else {
        d.inclusion_prob = 1.0 / (1.0 + std::exp(-log_odds));
    }
    return d;
}

double mh_log_accept_sigma2(double current, double proposal, double ssr,
                            Eigen::Index n, const HyperParameters& hyper) {
    auto log_target = [&](double s2) {
        return -(hyper.a_sigma2 + 1.0 + 0.5 * static_cast<double>(n)) *
                   std::log(s2) -
               (hyper.b_sigma2 + 0.5 * ssr) / s2;
    };
    // Truncated proposals are not symmetric in their normalizers.
    const double sd = hyper.mh_proposal_sd;
    return log_target(proposal) - log_target(current) +
           std::log(normal_cdf(current / sd)) -
           std::log(normal_cdf(proposal / sd));
}

void sample_beta_gamma(SamplerState& state, const HflmDesign& design,
                       const SamplerOptions& options, std::uint64_t seed) {
    const Eigen::MatrixXd& x = design.x_packets_retained();
    const Eigen::Index v_ret = design.n_retained();
    const Eigen::Index scale_size = design.scale_size();

    for (Eigen::Index q = 0; q < design.n_outcome(); ++q) {
        Rng rng(substream_seed(seed, stream_id(kStreamBeta, static_cast<std::uint64_t>(q)),
                               static_cast<std::uint64_t>(state.iteration)));
        const Eigen::Index j = q / scale_size;

        Eigen::VectorXd residual =
            design.y_packets().col(q) - x * state.beta_wp.col(q);

        std::vector<Eigen::Index> order;
        order.reserve(static_cast<std::size_t>(v_ret));
        for (Eigen::Index c = 0; c < v_ret; ++c)
            if (design.mask(c, q)) order.push_back(c);
        if (options.scan_order == ScanOrder::random)
            std::shuffle(order.begin(), order.end(), rng.engine());

        for (Eigen::Index c : order) {
            const double old_beta = state.beta_wp(c, q);
            if (old_beta != 0.0) residual += x.col(c) * old_beta;

            const double xtx = design.column_norms_sq()(c);
            const double beta_hat = x.col(c).dot(residual) / xtx;
            const double lambda = state.sigma2(q) / xtx;
            if (!std::isfinite(beta_hat) || !std::isfinite(lambda)) {
                std::ostringstream msg;
                msg << "non-finite single-site estimate at column " << c
                    << ", outcome " << q;
                throw NumericalError(msg.str());
            }

            const SpikeSlabDecision d = spike_slab_decision(
                beta_hat, lambda, state.tau(c, j), state.pi(c, j),
                options.bf_exponent);
            if (rng.bernoulli(d.inclusion_prob)) {
                const double draw = rng.normal(d.post_mean, std::sqrt(d.post_var));
                state.gamma(c, q) = 1;
                state.beta_wp(c, q) = draw;
                residual -= x.col(c) * draw;
            } else {
                state.gamma(c, q) = 0;
                state.beta_wp(c, q) = 0.0;
            }
        }
    }
}

void sample_sigma2(SamplerState& state, const HflmDesign& design,
                   const HyperParameters& hyper, std::uint64_t seed) {
    const Eigen::MatrixXd residual =
        design.y_packets() - design.x_packets_retained() * state.beta_wp;
    for (Eigen::Index q = 0; q < design.n_outcome(); ++q) {
        Rng rng(substream_seed(seed, stream_id(kStreamSigma, static_cast<std::uint64_t>(q)),
                               static_cast<std::uint64_t>(state.iteration)));
        const double ssr = residual.col(q).squaredNorm();
        const double proposal = rng.truncated_normal_positive(
            state.sigma2(q), hyper.mh_proposal_sd);
        const double log_accept = mh_log_accept_sigma2(
            state.sigma2(q), proposal, ssr, design.n_subjects(), hyper);
        if (std::log(rng.uniform()) < log_accept) state.sigma2(q) = proposal;
    }
}

void sample_tau_pi(SamplerState& state, const HflmDesign& design,
                   const HyperParameters& hyper, std::uint64_t seed) {
    const Eigen::Index scale_size = design.scale_size();
    for (Eigen::Index c = 0; c < design.n_retained(); ++c) {
        for (Eigen::Index j = 0; j < design.n_scales(); ++j) {
            Rng rng(substream_seed(
                seed,
                stream_id(kStreamTauPi,
                          static_cast<std::uint64_t>(c * design.n_scales() + j)),
                static_cast<std::uint64_t>(state.iteration)));
            double included = 0.0, included_sq = 0.0;
            double cells = 0.0;
            for (Eigen::Index k = 0; k < scale_size; ++k) {
                const Eigen::Index q = j * scale_size + k;
                if (!design.mask(c, q)) continue;
                cells += 1.0;
                if (state.gamma(c, q) == 1) {
                    included += 1.0;
                    included_sq += state.beta_wp(c, q) * state.beta_wp(c, q);
                }
            }
            state.tau(c, j) = rng.inverse_gamma(hyper.a_tau + 0.5 * included,
                                                hyper.b_tau + 0.5 * included_sq);
            state.pi(c, j) =
                rng.beta(hyper.a_pi + included, hyper.b_pi + (cells - included));
        }
    }
}

PosteriorSamples run_sampler(const HflmDesign& design,
                             const SamplerSettings& settings,
                             const HyperParameters* hyper,
                             Diagnostics* diagnostics) {
    if (settings.total_iterations <= settings.burn_in || settings.burn_in < 0)
        throw InvalidParameterError(
            "total_iterations must exceed burn_in, burn_in must be >= 0");
    if (settings.thinning < 1)
        throw InvalidParameterError("thinning must be >= 1");

    const HyperParameters hp =
        hyper != nullptr ? *hyper : empirical_bayes(design);
    SamplerState state = initial_state(design, hp);

    PosteriorSamples samples;
    samples.gamma_means =
        Eigen::MatrixXd::Zero(design.n_retained(), design.n_outcome());
    const int kept = (settings.total_iterations - settings.burn_in) /
                     settings.thinning;
    samples.draws.reserve(static_cast<std::size_t>(std::max(kept, 0)));

    // Diagnostics track running means of every noise variance and of five
    // coefficient cells spread over the masked region.
    std::vector<std::pair<Eigen::Index, Eigen::Index>> tracked;
    {
        std::vector<std::pair<Eigen::Index, Eigen::Index>> masked;
        for (Eigen::Index q = 0; q < design.n_outcome(); ++q)
            for (Eigen::Index c = 0; c < design.n_retained(); ++c)
                if (design.mask(c, q)) masked.emplace_back(c, q);
        const std::size_t want = std::min<std::size_t>(5, masked.size());
        for (std::size_t i = 0; i < want; ++i) {
            const std::size_t pos =
                want == 1 ? 0 : i * (masked.size() - 1) / (want - 1);
            if (tracked.empty() || tracked.back() != masked[pos])
                tracked.push_back(masked[pos]);
        }
    }
    Eigen::VectorXd sigma2_sum = Eigen::VectorXd::Zero(design.n_outcome());
    Eigen::VectorXd beta_sum =
        Eigen::VectorXd::Zero(static_cast<Eigen::Index>(tracked.size()));
    std::vector<int> checkpoints;
    std::vector<Eigen::VectorXd> sigma2_rows, beta_rows;

    for (int it = 1; it <= settings.total_iterations; ++it) {
        state.iteration = it;
        sample_beta_gamma(state, design, settings.options, settings.seed);
        sample_sigma2(state, design, hp, settings.seed);
        sample_tau_pi(state, design, hp, settings.seed);

        sigma2_sum += state.sigma2;
        for (std::size_t i = 0; i < tracked.size(); ++i)
            beta_sum(static_cast<Eigen::Index>(i)) +=
                state.beta_wp(tracked[i].first, tracked[i].second);
        if (it % 100 == 0) {
            checkpoints.push_back(it);
            sigma2_rows.push_back(sigma2_sum / static_cast<double>(it));
            beta_rows.push_back(beta_sum / static_cast<double>(it));
        }

        if (it > settings.burn_in &&
            (it - settings.burn_in) % settings.thinning == 0) {
            samples.draws.push_back(
                reconstruct_surface(state.beta_wp, design).beta);
            if (settings.options.keep_packet_draws)
                samples.packet_draws.push_back(state.beta_wp);
            samples.gamma_means += state.gamma.cast<double>();
        }
    }
    if (!samples.draws.empty())
        samples.gamma_means /= static_cast<double>(samples.draws.size());

    samples.meta.seed = settings.seed;
    samples.meta.total_iterations = settings.total_iterations;
    samples.meta.burn_in = settings.burn_in;
    samples.meta.thinning = settings.thinning;
    samples.meta.n_v = design.n_v();
    samples.meta.n_t = design.n_outcome();
    samples.meta.n_retained = design.n_retained();
    samples.meta.levels = design.levels();
    samples.meta.filter_name = design.basis_x().filter().name;
    samples.meta.retain_fraction = design.retain_fraction();
    samples.meta.bf_exponent =
        settings.options.bf_exponent == BfExponent::derived ? "derived"
                                                            : "paper_literal";
    samples.meta.scan_order =
        settings.options.scan_order == ScanOrder::raster ? "raster" : "random";
    samples.meta.design_fingerprint = design.fingerprint();

    if (diagnostics != nullptr) {
        diagnostics->checkpoints = checkpoints;
        diagnostics->tracked_cells = tracked;
        diagnostics->sigma2_running_mean.resize(
            static_cast<Eigen::Index>(checkpoints.size()), design.n_outcome());
        diagnostics->beta_running_mean.resize(
            static_cast<Eigen::Index>(checkpoints.size()),
            static_cast<Eigen::Index>(tracked.size()));
        for (std::size_t r = 0; r < checkpoints.size(); ++r) {
            diagnostics->sigma2_running_mean.row(static_cast<Eigen::Index>(r)) =
                sigma2_rows[r].transpose();
            diagnostics->beta_running_mean.row(static_cast<Eigen::Index>(r)) =
                beta_rows[r].transpose();
        }
    }
    return samples;
}

void rescale_to_data_units(PosteriorSamples& samples,
                           const Standardization& standardization) {
    const Eigen::Index v_len = samples.meta.n_v;
    const Eigen::Index t_len = samples.meta.n_t;
    Eigen::MatrixXd scale(v_len, t_len);
    for (Eigen::Index v = 0; v < v_len; ++v)
        for (Eigen::Index t = 0; t < t_len; ++t)
            scale(v, t) = standardization.y_sd(t) / standardization.x_sd(v);
    for (auto& draw : samples.draws) draw = draw.cwiseProduct(scale);
}

} // namespace wphist
