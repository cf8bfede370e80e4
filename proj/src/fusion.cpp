#include "kangc/fusion.hpp"

#include <cmath>
#include <stdexcept>

#include "kangc/rng.hpp"

namespace kangc {

namespace {
constexpr std::uint64_t kReversedSeedTag = 0x7265767273ULL;
}

TimeSeriesPanel reverse_panel(const TimeSeriesPanel& panel) {
    validate_panel(panel);
    TimeSeriesPanel out = panel;
    out.values = panel.values.colwise().reverse();
    return out;
}

std::vector<TimeSeriesPanel> reverse_panels(std::span<const TimeSeriesPanel> panels) {
    std::vector<TimeSeriesPanel> out;
    out.reserve(panels.size());
    for (const auto& panel : panels) out.push_back(reverse_panel(panel));
    return out;
}

FusionOutcome fuse_gc(const Eigen::MatrixXd& original, const Eigen::MatrixXd& reversed,
                      const FusionLosses& losses, const FusionConfig& cfg) {
    if (original.rows() != original.cols()) {
        throw std::invalid_argument("fuse_gc: matrices must be square");
    }
    Eigen::MatrixXd rev = reversed;
    if (cfg.transpose_reversed) rev.transposeInPlace();
    if (rev.rows() != original.rows() || rev.cols() != original.cols()) {
        throw std::invalid_argument("fuse_gc: shape mismatch between the two matrices");
    }
    if (!std::isfinite(losses.predict_original) || !std::isfinite(losses.predict_reversed) ||
        !std::isfinite(losses.sparsity_original) || !std::isfinite(losses.sparsity_reversed)) {
        throw std::invalid_argument("fuse_gc: losses must be finite");
    }
    if (!original.allFinite() || !rev.allFinite()) {
        throw std::invalid_argument("fuse_gc: matrices must be finite");
    }
    if (cfg.theta < 0.0) throw std::invalid_argument("fuse_gc: theta must be >= 0");

    FusionOutcome out;
    out.losses = losses;
    const bool original_better = losses.predict_original < losses.predict_reversed &&
                                 losses.sparsity_original < losses.sparsity_reversed;
    const bool reversed_better = losses.predict_original > losses.predict_reversed &&
                                 losses.sparsity_original > losses.sparsity_reversed;
    if (original_better) {
        out.branch = FusionBranch::kOriginal;
        out.fused = original;
    } else if (reversed_better) {
        out.branch = FusionBranch::kReversed;
        out.fused = rev;
    } else {
        out.branch = FusionBranch::kElementwise;
        out.fused.resize(original.rows(), original.cols());
        out.rules.resize(original.rows(), original.cols());
        for (Eigen::Index i = 0; i < original.rows(); ++i) {
            for (Eigen::Index j = 0; j < original.cols(); ++j) {
                const double a = original(i, j);
                const double b = rev(i, j);
                if (std::abs(a - b) < cfg.theta) {
                    out.fused(i, j) = 0.5 * (a + b);
                    out.rules(i, j) = static_cast<std::uint8_t>(FuseRule::kAverage);
                } else {
                    out.fused(i, j) = std::max(a, b);
                    out.rules(i, j) = static_cast<std::uint8_t>(FuseRule::kMax);
                }
            }
        }
    }
    return out;
}

InferenceRun infer_with_fusion(const TimeSeriesPanel& panel, const FitOptions& opts,
                               const FusionConfig& fusion) {
    return infer_with_fusion(std::span<const TimeSeriesPanel>(&panel, 1), opts, fusion);
}

InferenceRun infer_with_fusion(std::span<const TimeSeriesPanel> panels, const FitOptions& opts,
                               const FusionConfig& fusion) {
    InferenceRun run;
    run.original = fit_gckan(panels, opts);

    FitOptions reversed_opts = opts;
    reversed_opts.train.seed = derive_seed(opts.train.seed, kReversedSeedTag);
    const std::vector<TimeSeriesPanel> reversed = reverse_panels(panels);
    run.reversed = fit_gckan(std::span<const TimeSeriesPanel>(reversed), reversed_opts);

    const FusionLosses losses{run.original.aggregate.predict, run.reversed.aggregate.predict,
                              run.original.aggregate.sparsity, run.reversed.aggregate.sparsity};
    run.outcome = fuse_gc(run.original.gc, run.reversed.gc, losses, fusion);
    return run;
}

}  // namespace kangc
