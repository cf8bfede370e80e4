#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <string>

#include "kangc/granger.hpp"

namespace kangc {

/// Shortest decimal string that round-trips to exactly this double.
std::string format_double(double value);

/// Headerless CSV, one row per matrix row, LF line endings.
void write_matrix_csv(const std::filesystem::path& path, const Eigen::MatrixXd& matrix);
Eigen::MatrixXd read_matrix_csv(const std::filesystem::path& path);

/// 0/1 matrix in the same layout as write_matrix_csv.
void write_truth_csv(const std::filesystem::path& path, const Eigen::MatrixXi& truth);
Eigen::MatrixXi read_truth_csv(const std::filesystem::path& path);

/// Header row of series names, then T x p values.
void write_panel_csv(const std::filesystem::path& path, const TimeSeriesPanel& panel);

/// FNV-1a 64-bit digest of the file bytes, as 16 hex characters.
std::string file_digest(const std::filesystem::path& path);

}  // namespace kangc
