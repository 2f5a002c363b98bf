#pragma once

#include <Eigen/Dense>
#include <filesystem>
#include <string>

namespace wphist {

/// Reads a comma-separated numeric matrix. All rows must have the same
/// number of fields. Parse failures report the 1-based row and column.
Eigen::MatrixXd read_matrix_csv(const std::filesystem::path& path,
                                bool skip_header = false);

/// Writes a matrix as CSV with locale-independent, 17-significant-digit
/// floats (round-trip safe for doubles).
void write_matrix_csv(const std::filesystem::path& path,
                      const Eigen::MatrixXd& m);

/// Formats one double the same way write_matrix_csv does.
std::string format_double(double value);

} // namespace wphist
