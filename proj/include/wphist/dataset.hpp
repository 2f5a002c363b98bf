#pragma once

#include <Eigen/Dense>
#include <utility>

namespace wphist {

/// Paired functional observations: outcome curves Y (subjects x T) and
/// exposure curves X (subjects x V) on shared, equal grids.
struct FunctionalDataset {
    Eigen::MatrixXd Y;
    Eigen::MatrixXd X;
    Eigen::VectorXd t_grid;
    Eigen::VectorXd v_grid;

    Eigen::Index n_subjects() const { return Y.rows(); }
    Eigen::Index n_t() const { return Y.cols(); }
    Eigen::Index n_v() const { return X.cols(); }
};

/// Convenience constructor with grids 1..T.
FunctionalDataset make_dataset(Eigen::MatrixXd Y, Eigen::MatrixXd X);

/// Throws unless the dataset satisfies the model requirements:
/// at least two subjects, T == V with elementwise equal increasing grids,
/// and all entries finite.
void validate(const FunctionalDataset& data);

/// Per-column centering/scaling record (divisor N-1), kept so fits can be
/// mapped back to the original units.
struct Standardization {
    Eigen::VectorXd y_mean, y_sd;
    Eigen::VectorXd x_mean, x_sd;
};

/// Centers and scales every column of Y and X to mean 0, sd 1.
/// A column with (numerically) zero variance is a degenerate-data error.
std::pair<FunctionalDataset, Standardization>
standardize(const FunctionalDataset& data);

} // namespace wphist
