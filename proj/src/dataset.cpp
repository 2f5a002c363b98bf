#include "wphist/dataset.hpp"

#include <cmath>
#include <sstream>

#include "wphist/errors.hpp"

namespace wphist {

FunctionalDataset make_dataset(Eigen::MatrixXd Y, Eigen::MatrixXd X) {
    FunctionalDataset data;
    data.t_grid = Eigen::VectorXd::LinSpaced(Y.cols(), 1.0,
                                             static_cast<double>(Y.cols()));
    data.v_grid = Eigen::VectorXd::LinSpaced(X.cols(), 1.0,
                                             static_cast<double>(X.cols()));
    data.Y = std::move(Y);
    data.X = std::move(X);
    return data;
}

void validate(const FunctionalDataset& data) {
    if (data.Y.rows() < 2)
        throw ShapeError("need at least two subjects");
    if (data.X.rows() != data.Y.rows())
        throw ShapeError("Y and X have different subject counts");
    if (data.Y.cols() != data.X.cols())
        throw ShapeError(
            "historical constraint requires equally sized grids (T == V)");
    if (data.t_grid.size() != data.Y.cols() ||
        data.v_grid.size() != data.X.cols())
        throw ShapeError("grid lengths do not match the data");
    for (Eigen::Index i = 0; i < data.t_grid.size(); ++i) {
        if (data.t_grid(i) != data.v_grid(i))
            throw ShapeError("t and v grids must match elementwise");
        if (i > 0 && data.t_grid(i) <= data.t_grid(i - 1))
            throw ShapeError("grids must be strictly increasing");
    }
    if (!data.Y.allFinite() || !data.X.allFinite())
        throw DataError("dataset contains non-finite entries");
}

std::pair<FunctionalDataset, Standardization>
standardize(const FunctionalDataset& data) {
    validate(data);
    const Eigen::Index n = data.n_subjects();
    const double denom = static_cast<double>(n - 1);

    auto standardize_matrix = [&](const Eigen::MatrixXd& m, const char* label,
                                  Eigen::VectorXd& means, Eigen::VectorXd& sds) {
        Eigen::MatrixXd out(m.rows(), m.cols());
        means.resize(m.cols());
        sds.resize(m.cols());
        for (Eigen::Index j = 0; j < m.cols(); ++j) {
            const double mean = m.col(j).mean();
            const double var = (m.col(j).array() - mean).square().sum() / denom;
            const double sd = std::sqrt(var);
            if (!(sd > 1e-12)) {
                std::ostringstream msg;
                msg << label << " column " << j + 1
                    << " has zero sample variance";
                throw DataError(msg.str());
            }
            means(j) = mean;
            sds(j) = sd;
            out.col(j) = (m.col(j).array() - mean) / sd;
        }
        return out;
    };

    FunctionalDataset out;
    Standardization record;
    out.Y = standardize_matrix(data.Y, "Y", record.y_mean, record.y_sd);
    out.X = standardize_matrix(data.X, "X", record.x_mean, record.x_sd);
    out.t_grid = data.t_grid;
    out.v_grid = data.v_grid;
    return {std::move(out), std::move(record)};
}

} // namespace wphist
