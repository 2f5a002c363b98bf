#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

namespace wphist {

enum class WaveletFamily { daubechies };

/// Quadrature-mirror filter pair for an orthogonal mother wavelet.
///
/// The low-pass taps sum to sqrt(2), have unit squared norm, and are
/// orthogonal to their own even shifts; the high-pass taps are the
/// alternating-sign reversal high[l] = (-1)^l low[L-1-l].
struct WaveletFilter {
    std::vector<double> low_pass;
    std::vector<double> high_pass;
    int vanishing_moments = 0;
    std::string name;

    std::size_t length() const { return low_pass.size(); }
};

/// Builds a Daubechies filter with the given number of vanishing moments
/// by spectral factorization (roots inside the unit circle, i.e. the
/// minimum-phase convention). db1 is the Haar filter.
WaveletFilter make_filter(WaveletFamily family, int vanishing_moments);

/// Parses names like "haar", "db1", "db3".
WaveletFilter make_filter(const std::string& name);

/// Wavelet-packet coefficients of one signal: 2^levels frequency bins
/// ("scales") of n/2^levels coefficients each, concatenated lowest scale
/// first. Within a scale the coefficients keep the time order of the
/// input.
class PacketDecomposition {
public:
    PacketDecomposition(Eigen::VectorXd coefficients, int levels);

    const Eigen::VectorXd& coefficients() const { return coefficients_; }
    int levels() const { return levels_; }
    Eigen::Index signal_length() const { return coefficients_.size(); }

    /// Coefficients per scale, n / 2^levels.
    Eigen::Index scale_size() const {
        return coefficients_.size() >> levels_;
    }
    Eigen::Index n_scales() const { return Eigen::Index(1) << levels_; }

    int scale_of(Eigen::Index i) const {
        return static_cast<int>(i / scale_size());
    }
    int location_of(Eigen::Index i) const {
        return static_cast<int>(i % scale_size());
    }

private:
    Eigen::VectorXd coefficients_;
    int levels_;
};

/// Partial discrete wavelet-packet transform with zero padding.
///
/// Every node at each level is split by convolve-then-downsample-by-two;
/// approximation-type nodes apply the low-pass filter to the left child
/// and the high-pass to the right, detail-type nodes swap the two, which
/// yields the frequency-ordered bins at the final level. Each child keeps
/// exactly half its parent's length, so the output has the length of the
/// input.
PacketDecomposition dwpt(const Eigen::VectorXd& signal,
                         const WaveletFilter& filter, int levels);

/// Raw coefficient vector of dwpt() without the index wrapper.
Eigen::VectorXd dwpt_vector(const Eigen::VectorXd& signal,
                            const WaveletFilter& filter, int levels);

/// Explicit matrix form of the transform: coefficients = matrix() * x.
/// Zero padding makes the matrix only approximately orthogonal for
/// filters longer than Haar, so inverse() holds the exactly solved
/// inverse rather than the transpose.
class PacketBasisMatrix {
public:
    PacketBasisMatrix(Eigen::MatrixXd analysis, Eigen::MatrixXd synthesis,
                      WaveletFilter filter, int levels);

    const Eigen::MatrixXd& matrix() const { return analysis_; }
    const Eigen::MatrixXd& inverse() const { return synthesis_; }
    Eigen::Index size() const { return analysis_.rows(); }
    int levels() const { return levels_; }
    const WaveletFilter& filter() const { return filter_; }

private:
    Eigen::MatrixXd analysis_;
    Eigen::MatrixXd synthesis_;
    WaveletFilter filter_;
    int levels_;
};

PacketBasisMatrix build_basis(const WaveletFilter& filter, int levels,
                              Eigen::Index n);

/// Inverse transform through the basis matrix's solved inverse.
Eigen::VectorXd idwpt(const PacketDecomposition& decomposition,
                      const PacketBasisMatrix& basis);

} // namespace wphist
