#include "wphist/design.hpp"

#include <cmath>
#include <sstream>

#include "wphist/errors.hpp"
#include "wphist/rng.hpp"

namespace wphist {

ScaleLocation HflmDesign::y_index(Eigen::Index q) const {
    return {static_cast<int>(q / scale_size()),
            static_cast<int>(q % scale_size())};
}

ScaleLocation HflmDesign::x_index(Eigen::Index c) const {
    return retained_columns_[static_cast<std::size_t>(c)];
}

double HflmDesign::energy_preserved() const {
    double acc = 0.0;
    Eigen::Index used = 0;
    for (Eigen::Index i = 0; i < energy_full_.size(); ++i) {
        if (energy_full_(i) > 1e-300) {
            acc += energy_retained_(i) / energy_full_(i);
            ++used;
        }
    }
    return used > 0 ? acc / static_cast<double>(used) : 1.0;
}

std::uint64_t HflmDesign::fingerprint() const {
    std::uint64_t h = 0x9e3779b97f4a7c15ULL;
    auto fold = [&h](std::uint64_t v) { h = mix64(h ^ v); };
    fold(static_cast<std::uint64_t>(n_subjects()));
    fold(static_cast<std::uint64_t>(n_outcome()));
    fold(static_cast<std::uint64_t>(n_retained()));
    fold(static_cast<std::uint64_t>(levels_));
    fold(static_cast<std::uint64_t>(std::llround(retain_fraction_ * 1e6)));
    for (char ch : basis_->filter().name)
        fold(static_cast<std::uint64_t>(ch));
    return h;
}

HflmDesign build_design(const FunctionalDataset& data,
                        const WaveletFilter& filter, int levels,
                        double retain_fraction,
                        const Standardization* standardization) {
    validate(data);
    if (levels < 0) throw InvalidParameterError("levels must be >= 0");
    const Eigen::Index t_len = data.n_t();
    const Eigen::Index n_scales = Eigen::Index(1) << levels;
    if (t_len % n_scales != 0) {
        std::ostringstream msg;
        msg << "grid length " << t_len << " is not divisible by 2^" << levels;
        throw ShapeError(msg.str());
    }
    if (!(retain_fraction > 0.0) || retain_fraction > 1.0)
        throw InvalidParameterError("retain_fraction must lie in (0, 1]");

    HflmDesign design;
    const double exact = retain_fraction * static_cast<double>(n_scales);
    Eigen::Index keep_scales = static_cast<Eigen::Index>(std::floor(exact + 1e-9));
    if (std::abs(exact - std::round(exact)) > 1e-9) {
        std::ostringstream msg;
        msg << "retain_fraction " << retain_fraction
            << " does not select whole scales; rounding down to "
            << keep_scales << " of " << n_scales;
        design.warnings_.push_back(msg.str());
    }
    if (keep_scales < 1)
        throw InvalidParameterError(
            "retain_fraction keeps no whole scale at this decomposition depth");

    design.levels_ = levels;
    design.retain_fraction_ = retain_fraction;
    design.basis_ = std::make_shared<const PacketBasisMatrix>(
        build_basis(filter, levels, t_len));
    if (standardization != nullptr) {
        design.standardization_ = *standardization;
    } else {
        design.standardization_.y_mean = Eigen::VectorXd::Zero(t_len);
        design.standardization_.y_sd = Eigen::VectorXd::Ones(t_len);
        design.standardization_.x_mean = Eigen::VectorXd::Zero(t_len);
        design.standardization_.x_sd = Eigen::VectorXd::Ones(t_len);
    }
    design.v_grid_ = data.v_grid;
    design.t_grid_ = data.t_grid;

    const Eigen::Index n = data.n_subjects();
    const Eigen::Index scale_size = t_len / n_scales;
    const Eigen::Index v_retained = keep_scales * scale_size;

    const Eigen::MatrixXd& analysis = design.basis_->matrix();
    // Row-wise transforms: packet rows are (analysis * column)^T.
    design.y_packets_ = data.Y * analysis.transpose();
    Eigen::MatrixXd x_packets = data.X * analysis.transpose();

    design.energy_full_.resize(n);
    design.energy_retained_.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        design.energy_full_(i) = x_packets.row(i).squaredNorm();
        design.energy_retained_(i) =
            x_packets.row(i).head(v_retained).squaredNorm();
    }

    design.x_retained_ = x_packets.leftCols(v_retained);
    design.retained_columns_.reserve(static_cast<std::size_t>(v_retained));
    for (Eigen::Index c = 0; c < v_retained; ++c)
        design.retained_columns_.push_back(
            {static_cast<int>(c / scale_size), static_cast<int>(c % scale_size)});

    design.mask_ = BoolGrid(v_retained, t_len);
    for (Eigen::Index c = 0; c < v_retained; ++c) {
        const int loc = design.retained_columns_[static_cast<std::size_t>(c)].location;
        for (Eigen::Index q = 0; q < t_len; ++q)
            design.mask_(c, q) = loc <= static_cast<int>(q % scale_size);
    }

    design.xtx_.resize(v_retained);
    for (Eigen::Index c = 0; c < v_retained; ++c) {
        design.xtx_(c) = design.x_retained_.col(c).squaredNorm();
        if (!(design.xtx_(c) > 1e-12)) {
            std::ostringstream msg;
            msg << "retained exposure packet column " << c
                << " has zero norm; design is degenerate";
            throw DataError(msg.str());
        }
    }
    return design;
}

ConstrainedSurface reconstruct_surface(const Eigen::MatrixXd& beta_wp,
                                       const HflmDesign& design) {
    if (beta_wp.rows() != design.n_retained() ||
        beta_wp.cols() != design.n_outcome())
        throw ShapeError("packet surface dimensions do not match the design");
    for (Eigen::Index c = 0; c < beta_wp.rows(); ++c)
        for (Eigen::Index q = 0; q < beta_wp.cols(); ++q)
            if (!design.mask(c, q) && beta_wp(c, q) != 0.0) {
                std::ostringstream msg;
                msg << "packet surface violates the historical mask at ("
                    << c << ", " << q << ")";
                throw ContractViolationError(msg.str());
            }

    const Eigen::Index v_len = design.n_v();
    Eigen::MatrixXd full = Eigen::MatrixXd::Zero(v_len, design.n_outcome());
    full.topRows(design.n_retained()) = beta_wp;

    // The packet model Yw = Xw B implies the data-space surface
    // A_x' B inv(A_y)', with A the analysis operator; for orthogonal
    // bases this is the usual two-sided back-transform.
    ConstrainedSurface surface;
    surface.beta = design.basis_x().matrix().transpose() * full *
                   design.basis_y().inverse().transpose();
    surface.v_grid = design.v_grid();
    surface.t_grid = design.t_grid();
    return surface;
}

} // namespace wphist
