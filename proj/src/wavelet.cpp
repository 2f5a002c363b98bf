#include "wphist/wavelet.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/LU>
#include <cmath>
#include <complex>
#include <sstream>

#include "wphist/errors.hpp"

namespace wphist {

namespace {

constexpr double kSqrt2 = 1.4142135623730951;

// Polynomial product, ascending coefficient order.
std::vector<std::complex<double>>
poly_multiply(const std::vector<std::complex<double>>& a,
              const std::vector<std::complex<double>>& b) {
    std::vector<std::complex<double>> out(a.size() + b.size() - 1);
    for (std::size_t i = 0; i < a.size(); ++i)
        for (std::size_t j = 0; j < b.size(); ++j) out[i + j] += a[i] * b[j];
    return out;
}

// Roots via the companion matrix of a monic-normalized polynomial
// (ascending coefficients, nonzero leading term).
std::vector<std::complex<double>> poly_roots(const std::vector<double>& coeffs) {
    const std::size_t degree = coeffs.size() - 1;
    Eigen::MatrixXd companion = Eigen::MatrixXd::Zero(
        static_cast<Eigen::Index>(degree), static_cast<Eigen::Index>(degree));
    const double lead = coeffs.back();
    for (std::size_t i = 0; i < degree; ++i) {
        companion(static_cast<Eigen::Index>(i),
                  static_cast<Eigen::Index>(degree - 1)) = -coeffs[i] / lead;
        if (i + 1 < degree)
            companion(static_cast<Eigen::Index>(i + 1),
                      static_cast<Eigen::Index>(i)) = 1.0;
    }
    Eigen::EigenSolver<Eigen::MatrixXd> solver(companion, false);
    std::vector<std::complex<double>> roots;
    for (Eigen::Index i = 0; i < solver.eigenvalues().size(); ++i)
        roots.push_back(solver.eigenvalues()(i));
    return roots;
}

std::vector<double> daubechies_low_pass(int p) {
    if (p == 1) return {1.0 / kSqrt2, 1.0 / kSqrt2};

    // Half-band remainder P(y) = sum_k C(p-1+k, k) y^k.
    std::vector<double> half_band(static_cast<std::size_t>(p));
    half_band[0] = 1.0;
    for (int k = 1; k < p; ++k)
        half_band[static_cast<std::size_t>(k)] =
            half_band[static_cast<std::size_t>(k - 1)] *
            static_cast<double>(p - 1 + k) / static_cast<double>(k);

    // Each root y maps to a conjugate/reciprocal quadruple in z through
    // y = (2 - z - 1/z)/4; keeping |z| < 1 gives the minimum-phase factor.
    std::vector<std::complex<double>> poly{1.0};
    for (const auto& y : poly_roots(half_band)) {
        const std::complex<double> b = 4.0 * y - 2.0;
        const std::complex<double> disc = std::sqrt(b * b - 4.0);
        const std::complex<double> z1 = (-b + disc) / 2.0;
        const std::complex<double> z2 = (-b - disc) / 2.0;
        const std::complex<double> z = std::abs(z1) < 1.0 ? z1 : z2;
        poly = poly_multiply(poly, {1.0, -z});
    }
    for (int i = 0; i < p; ++i) poly = poly_multiply(poly, {1.0, 1.0});

    std::vector<double> taps(poly.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < poly.size(); ++i) {
        taps[i] = poly[i].real();
        sum += taps[i];
    }
    for (double& t : taps) t *= kSqrt2 / sum;
    return taps;
}

void check_filter(const WaveletFilter& f) {
    const std::size_t L = f.length();
    double sum = 0.0, norm = 0.0;
    for (double t : f.low_pass) {
        sum += t;
        norm += t * t;
    }
    double shift = 0.0;
    for (std::size_t m = 1; 2 * m < L; ++m) {
        double dot = 0.0;
        for (std::size_t l = 0; l + 2 * m < L; ++l)
            dot += f.low_pass[l] * f.low_pass[l + 2 * m];
        shift = std::max(shift, std::abs(dot));
    }
    if (std::abs(sum - kSqrt2) > 1e-8 || std::abs(norm - 1.0) > 1e-8 ||
        shift > 1e-8) {
        std::ostringstream msg;
        msg << "filter construction failed invariants for " << f.name
            << " (sum err " << std::abs(sum - kSqrt2) << ", norm err "
            << std::abs(norm - 1.0) << ", shift orthogonality " << shift << ")";
        throw NumericalError(msg.str());
    }
}

// Convolve one node with a filter, downsample by two on the odd phase,
// and keep the centered m/2 outputs. The odd phase keeps the Haar basis
// exactly orthogonal; centering keeps the stacked transform matrix well
// conditioned (the fully causal window is numerically singular).
Eigen::VectorXd analyze_node(const Eigen::VectorXd& node,
                             const std::vector<double>& taps) {
    const Eigen::Index m = node.size();
    const Eigen::Index L = static_cast<Eigen::Index>(taps.size());
    const Eigen::Index half = m / 2;
    const Eigen::Index down_count = (m + L - 2) / 2; // odd indices in full conv
    const Eigen::Index start = (down_count - half) / 2;

    Eigen::VectorXd out(half);
    for (Eigen::Index i = 0; i < half; ++i) {
        const Eigen::Index k = 2 * (start + i) + 1;
        double acc = 0.0;
        const Eigen::Index l_lo = std::max<Eigen::Index>(0, k - m + 1);
        const Eigen::Index l_hi = std::min<Eigen::Index>(L - 1, k);
        for (Eigen::Index l = l_lo; l <= l_hi; ++l)
            acc += taps[static_cast<std::size_t>(l)] * node(k - l);
        out(i) = acc;
    }
    return out;
}

} // namespace

WaveletFilter make_filter(WaveletFamily family, int vanishing_moments) {
    if (family != WaveletFamily::daubechies)
        throw InvalidParameterError("unknown wavelet family");
    if (vanishing_moments < 1)
        throw InvalidParameterError(
            "vanishing_moments must be a positive integer");

    WaveletFilter f;
    f.vanishing_moments = vanishing_moments;
    f.name = "db" + std::to_string(vanishing_moments);
    f.low_pass = daubechies_low_pass(vanishing_moments);
    const std::size_t L = f.low_pass.size();
    f.high_pass.resize(L);
    for (std::size_t l = 0; l < L; ++l) {
        const double sign = (l % 2 == 0) ? 1.0 : -1.0;
        f.high_pass[l] = sign * f.low_pass[L - 1 - l];
    }
    check_filter(f);
    return f;
}

WaveletFilter make_filter(const std::string& name) {
    if (name == "haar") return make_filter(WaveletFamily::daubechies, 1);
    if (name.size() > 2 && name.compare(0, 2, "db") == 0) {
        int p = 0;
        try {
            p = std::stoi(name.substr(2));
        } catch (...) {
            throw InvalidParameterError("unrecognized filter name: " + name);
        }
        return make_filter(WaveletFamily::daubechies, p);
    }
    throw InvalidParameterError("unrecognized filter name: " + name);
}

PacketDecomposition::PacketDecomposition(Eigen::VectorXd coefficients,
                                         int levels)
    : coefficients_(std::move(coefficients)), levels_(levels) {
    if (levels_ < 0) throw InvalidParameterError("levels must be >= 0");
    if (coefficients_.size() == 0) throw ShapeError("empty coefficient vector");
    if (coefficients_.size() % (Eigen::Index(1) << levels_) != 0)
        throw ShapeError("coefficient count not divisible by 2^levels");
}

Eigen::VectorXd dwpt_vector(const Eigen::VectorXd& signal,
                            const WaveletFilter& filter, int levels) {
    if (levels < 0) throw InvalidParameterError("levels must be >= 0");
    const Eigen::Index n = signal.size();
    if (n == 0) throw ShapeError("cannot transform an empty signal");
    if (n % (Eigen::Index(1) << levels) != 0) {
        std::ostringstream msg;
        msg << "signal length " << n << " is not divisible by 2^" << levels;
        throw ShapeError(msg.str());
    }

    std::vector<Eigen::VectorXd> nodes{signal};
    for (int j = 0; j < levels; ++j) {
        std::vector<Eigen::VectorXd> next;
        next.reserve(nodes.size() * 2);
        for (std::size_t s = 0; s < nodes.size(); ++s) {
            // Approximation-type nodes (even index) put the low-pass child
            // on the left; detail-type nodes swap, which produces the
            // frequency-ordered bins at the final level.
            const bool approx_type = (s % 2 == 0);
            const auto& first = approx_type ? filter.low_pass : filter.high_pass;
            const auto& second = approx_type ? filter.high_pass : filter.low_pass;
            next.push_back(analyze_node(nodes[s], first));
            next.push_back(analyze_node(nodes[s], second));
        }
        nodes = std::move(next);
    }

    Eigen::VectorXd out(n);
    Eigen::Index offset = 0;
    for (const auto& node : nodes) {
        out.segment(offset, node.size()) = node;
        offset += node.size();
    }
    return out;
}

PacketDecomposition dwpt(const Eigen::VectorXd& signal,
                         const WaveletFilter& filter, int levels) {
    return PacketDecomposition(dwpt_vector(signal, filter, levels), levels);
}

PacketBasisMatrix::PacketBasisMatrix(Eigen::MatrixXd analysis,
                                     Eigen::MatrixXd synthesis,
                                     WaveletFilter filter, int levels)
    : analysis_(std::move(analysis)),
      synthesis_(std::move(synthesis)),
      filter_(std::move(filter)),
      levels_(levels) {}

PacketBasisMatrix build_basis(const WaveletFilter& filter, int levels,
                              Eigen::Index n) {
    Eigen::MatrixXd analysis(n, n);
    Eigen::VectorXd unit = Eigen::VectorXd::Zero(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        unit(i) = 1.0;
        analysis.col(i) = dwpt_vector(unit, filter, levels);
        unit(i) = 0.0;
    }

    Eigen::PartialPivLU<Eigen::MatrixXd> lu(analysis);
    Eigen::MatrixXd synthesis = lu.inverse();
    const double residual =
        (analysis * synthesis - Eigen::MatrixXd::Identity(n, n))
            .cwiseAbs()
            .maxCoeff();
    if (!std::isfinite(residual) || residual > 1e-8)
        throw NumericalError(
            "packet basis matrix is numerically singular (inverse residual " +
            std::to_string(residual) + ")");
    return PacketBasisMatrix(std::move(analysis), std::move(synthesis), filter,
                             levels);
}

Eigen::VectorXd idwpt(const PacketDecomposition& decomposition,
                      const PacketBasisMatrix& basis) {
    if (decomposition.signal_length() != basis.size())
        throw ShapeError("coefficient length does not match basis dimension");
    return basis.inverse() * decomposition.coefficients();
}

} // namespace wphist
