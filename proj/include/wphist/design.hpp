#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "wphist/dataset.hpp"
#include "wphist/wavelet.hpp"

namespace wphist {

struct ScaleLocation {
    int scale = 0;
    int location = 0;
};

using BoolGrid = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>;

/// Coefficient surface on the data-space grid. Entries below the
/// historical region are zero (exactly for Haar at block granularity,
/// approximately otherwise).
struct ConstrainedSurface {
    Eigen::MatrixXd beta; // V x T
    Eigen::VectorXd v_grid;
    Eigen::VectorXd t_grid;
};

/// Packet-space regression design for the historical model: both sides
/// transformed with the same filter and depth, exposure columns
/// thresholded to the lowest whole scales, and the location constraint
/// mask l <= k over retained columns. Immutable once built.
class HflmDesign {
public:
    const Eigen::MatrixXd& y_packets() const { return y_packets_; }
    const Eigen::MatrixXd& x_packets_retained() const { return x_retained_; }

    Eigen::Index n_subjects() const { return y_packets_.rows(); }
    Eigen::Index n_outcome() const { return y_packets_.cols(); }   // T
    Eigen::Index n_retained() const { return x_retained_.cols(); } // V'
    Eigen::Index n_v() const { return basis_->size(); }            // V

    int levels() const { return levels_; }
    double retain_fraction() const { return retain_fraction_; }
    Eigen::Index scale_size() const { return n_outcome() >> levels_; }
    Eigen::Index n_scales() const { return Eigen::Index(1) << levels_; }

    ScaleLocation y_index(Eigen::Index q) const;
    ScaleLocation x_index(Eigen::Index c) const;
    const std::vector<ScaleLocation>& retained_columns() const {
        return retained_columns_;
    }

    bool mask(Eigen::Index c, Eigen::Index q) const { return mask_(c, q); }
    const BoolGrid& mask_grid() const { return mask_; }

    /// Shared basis for both decompositions (T == V is enforced).
    const PacketBasisMatrix& basis_x() const { return *basis_; }
    const PacketBasisMatrix& basis_y() const { return *basis_; }

    /// Squared column norms of the retained exposure packets.
    const Eigen::VectorXd& column_norms_sq() const { return xtx_; }

    const Standardization& standardization() const { return standardization_; }

    /// Mean over subjects of ||retained packets||^2 / ||all packets||^2.
    double energy_preserved() const;

    const std::vector<std::string>& warnings() const { return warnings_; }

    const Eigen::VectorXd& v_grid() const { return v_grid_; }
    const Eigen::VectorXd& t_grid() const { return t_grid_; }

    /// Digest of the design configuration, embedded in sample files.
    std::uint64_t fingerprint() const;

    friend HflmDesign build_design(const FunctionalDataset&,
                                   const WaveletFilter&, int, double,
                                   const Standardization*);

private:
    HflmDesign() = default;

    Eigen::MatrixXd y_packets_;
    Eigen::MatrixXd x_retained_;
    std::vector<ScaleLocation> retained_columns_;
    BoolGrid mask_;
    std::shared_ptr<const PacketBasisMatrix> basis_;
    Eigen::VectorXd xtx_;
    Eigen::VectorXd energy_full_;
    Eigen::VectorXd energy_retained_;
    Standardization standardization_;
    Eigen::VectorXd v_grid_, t_grid_;
    int levels_ = 0;
    double retain_fraction_ = 1.0;
    std::vector<std::string> warnings_;
};

/// Transforms each row of Y and X, drops exposure scales above the
/// retained fraction (whole scales only; non-integral fractions round
/// down with a warning), and builds the location mask. The data should
/// already be standardized; pass the record so fits can be rescaled to
/// the original units.
HflmDesign build_design(const FunctionalDataset& data,
                        const WaveletFilter& filter, int levels,
                        double retain_fraction,
                        const Standardization* standardization = nullptr);

/// Maps a mask-respecting packet surface (V' x T) back to the data
/// space. Rows of dropped scales are zero-filled before applying the
/// two-sided inverse transform.
ConstrainedSurface reconstruct_surface(const Eigen::MatrixXd& beta_wp,
                                       const HflmDesign& design);

} // namespace wphist
