#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "kangc/kan.hpp"
#include "kangc/trainer.hpp"

namespace kangc {

/// A (T x p) multivariate series. Replicated datasets are vectors of panels.
struct TimeSeriesPanel {
    Eigen::MatrixXd values;  // T x p
    std::optional<int> replicate_id;
    std::vector<std::string> series_names;  // empty or exactly p labels
};

/// Throws unless T >= 2, p >= 2, all values finite, names consistent.
void validate_panel(const TimeSeriesPanel& panel);

/// Per-series z-scoring. Constant series map to zero.
TimeSeriesPanel zscore_panel(const TimeSeriesPanel& panel);

/// Lagged windowing. Row r of inputs concatenates x_{t-1}, ..., x_{t-K}
/// (all p series per lag; column = (k-1)*p + j for 0-based series j), the
/// matching target row is x_t, for t = K .. T-1. Exactly T-K rows.
struct WindowedDataset {
    Eigen::MatrixXd inputs;   // (T-K) x (p*K)
    Eigen::MatrixXd targets;  // (T-K) x p
    int lag = 0;
    GroupIndex groups;
    std::vector<Eigen::Index> replicate_row_counts;  // rows contributed per panel
};

WindowedDataset build_windowed(const TimeSeriesPanel& panel, int lag);

/// Multi-replicate variant: windows each panel independently (windows never
/// span replicate boundaries) and concatenates the rows.
WindowedDataset build_windowed(std::span<const TimeSeriesPanel> panels, int lag);

/// Everything that defines one inference fit apart from the data.
struct FitOptions {
    int lag = 5;                      // K, window depth
    std::vector<int> hidden = {32};   // hidden layer sizes; network is p*K -> hidden... -> 1
    InitOptions init;                 // grid, order, base activation
    TrainConfig train;                // optimizer settings + base seed
    std::optional<double> lambda;     // unset: select from sweep
    std::optional<double> gamma;      // unset: tied to the selected lambda
    std::vector<double> sweep = {0.01, 0.05, 0.1};
    double holdout_fraction = 0.1;    // held-out tail used by the sweep
    int workers = 1;                  // concurrent component trainings
};

struct GcResult {
    Eigen::MatrixXd gc;                          // p x p, row = effect, col = cause
    std::vector<LossBreakdown> per_component;    // p entries
    LossBreakdown aggregate;                     // summed over components
    std::vector<Eigen::MatrixXd> lag_profiles;   // p matrices of shape p x K
    std::vector<KanNetwork> models;              // p trained component models
    double lambda_used = 0.0;
    double gamma_used = 0.0;
};

/// Trains the p component models (model i predicts series i one step ahead)
/// and assembles the Granger-causality matrix from their first-layer group
/// norms. Panels are z-scored per replicate, then windowed. Component i's
/// seed is derive_seed(opts.train.seed, i); results do not depend on
/// opts.workers.
GcResult fit_gckan(std::span<const TimeSeriesPanel> panels, const FitOptions& opts);
GcResult fit_gckan(const TimeSeriesPanel& panel, const FitOptions& opts);

/// Entry (i, j) = Frobenius norm of model i's first-layer base-weight
/// columns in series group j. Expects exactly groups.num_series models.
Eigen::MatrixXd extract_gc_matrix(std::span<const KanNetwork> models, const GroupIndex& groups);

/// Per-(series, lag) first-layer norms of one component model: entry (j, k)
/// is the norm of the single column for series j at lag k+1. Summing a row
/// in quadrature recovers that series' group norm.
Eigen::MatrixXd lag_profile(const KanNetwork& model, const GroupIndex& groups);

}  // namespace kangc
