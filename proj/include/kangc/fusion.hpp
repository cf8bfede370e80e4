#pragma once

#include <Eigen/Dense>
#include <span>
#include <vector>

#include "kangc/granger.hpp"

namespace kangc {

struct FusionConfig {
    double theta = 0.05;             // elementwise average-vs-max cutoff
    bool transpose_reversed = false; // compare against the transpose of the reversed-fit matrix
};

enum class FusionBranch { kOriginal, kReversed, kElementwise };

enum class FuseRule : std::uint8_t { kAverage = 0, kMax = 1 };

struct FusionLosses {
    double predict_original = 0.0;
    double predict_reversed = 0.0;
    double sparsity_original = 0.0;
    double sparsity_reversed = 0.0;
};

struct FusionOutcome {
    Eigen::MatrixXd fused;
    FusionBranch branch = FusionBranch::kOriginal;
    /// Per-entry rule taken; only filled when branch == kElementwise.
    Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic> rules;
    FusionLosses losses;
};

/// Reverses the row (time) order. Replicated datasets reverse each panel
/// independently; panel order is preserved.
TimeSeriesPanel reverse_panel(const TimeSeriesPanel& panel);
std::vector<TimeSeriesPanel> reverse_panels(std::span<const TimeSeriesPanel> panels);

/// Selects or merges the two direction matrices:
///   both original losses strictly lower  -> take the original matrix;
///   both strictly higher                 -> take the reversed one;
///   otherwise, per entry: average when |G_ij - G~_ij| < theta, else max.
/// Ties in a loss comparison fall through to the elementwise branch.
FusionOutcome fuse_gc(const Eigen::MatrixXd& original, const Eigen::MatrixXd& reversed,
                      const FusionLosses& losses, const FusionConfig& cfg);

struct InferenceRun {
    GcResult original;
    GcResult reversed;
    FusionOutcome outcome;
};

/// Full two-direction inference: fits the original panels and their time
/// reversal with independently derived seeds, then fuses on the aggregate
/// prediction and sparsity losses.
InferenceRun infer_with_fusion(std::span<const TimeSeriesPanel> panels, const FitOptions& opts,
                               const FusionConfig& fusion);
InferenceRun infer_with_fusion(const TimeSeriesPanel& panel, const FitOptions& opts,
                               const FusionConfig& fusion);

}  // namespace kangc
