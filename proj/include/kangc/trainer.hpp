#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "kangc/kan.hpp"

namespace kangc {

/// Maps first-layer input columns to (series, lag). Windowed inputs are laid
/// out as column = lag0 * num_series + series0 (0-based), i.e. all p series
/// of lag 1 first, then lag 2, and so on. Group j collects the num_lags
/// columns belonging to series j.
struct GroupIndex {
    int num_series = 0;  // p
    int num_lags = 0;    // K

    int in_dim() const { return num_series * num_lags; }
    int series_of(int col) const { return col % num_series; }
    int lag_of(int col) const { return col / num_series + 1; }  // 1-based
    int column(int series0, int lag0) const { return lag0 * num_series + series0; }
};

struct TrainConfig {
    double lambda = 0.05;          // group-lasso strength
    double gamma = 0.05;           // ridge strength on deeper base weights
    double learning_rate = 1e-3;
    int max_epochs = 2000;
    int batch_size = 0;            // 0 = full batch
    int early_stop_patience = 100; // epochs without total-loss improvement
    std::uint64_t seed = 0;
    double group_norm_epsilon = 1e-8;
};

struct LossBreakdown {
    double predict = 0.0;   // mean squared prediction error
    double sparsity = 0.0;  // lambda * sum of group norms
    double ridge = 0.0;     // gamma * sum of deeper-layer Frobenius norms
    double total = 0.0;     // predict + sparsity + ridge, exactly

    static LossBreakdown make(double predict, double sparsity, double ridge) {
        return {predict, sparsity, ridge, predict + sparsity + ridge};
    }
    LossBreakdown& operator+=(const LossBreakdown& o) {
        predict += o.predict;
        sparsity += o.sparsity;
        ridge += o.ridge;
        total += o.total;
        return *this;
    }
};

/// Frobenius norm of the first-layer base-weight columns of each series
/// group (all lags of that series together). Row i of the GC matrix.
Eigen::VectorXd group_norms(const KanLayer& first_layer, const GroupIndex& groups);

/// Full composite loss on one batch: predict is the batch MSE, sparsity the
/// group lasso on the first layer, ridge the Frobenius penalty on every
/// deeper layer's base weights.
LossBreakdown compute_losses(const KanNetwork& net, const Eigen::MatrixXd& inputs,
                             const Eigen::VectorXd& targets, const TrainConfig& cfg,
                             const GroupIndex& groups);

/// Adam state for a list of parameter tensors, updated in lockstep.
struct AdamState {
    std::vector<Eigen::MatrixXd> m;
    std::vector<Eigen::MatrixXd> v;
    long step = 0;

    static AdamState init_like(const std::vector<const Eigen::MatrixXd*>& params);
};

/// One bias-corrected Adam update (beta1 = 0.9, beta2 = 0.999, eps = 1e-8).
void adam_step(const std::vector<Eigen::MatrixXd*>& params,
               const std::vector<const Eigen::MatrixXd*>& grads, AdamState& state,
               double learning_rate);

struct TrainResult {
    KanNetwork network;
    LossBreakdown final_losses;  // on the full training data
    int epochs_run = 0;
};

/// Trains one component model on (inputs, targets). Gradients of the
/// penalties use the epsilon-smoothed norm sqrt(sum w^2 + eps); the reported
/// loss values use the exact norms. Stops on max_epochs or when the total
/// loss has not improved for early_stop_patience epochs.
TrainResult train_component(const Eigen::MatrixXd& inputs, const Eigen::VectorXd& targets,
                            const std::vector<int>& dims, const TrainConfig& cfg,
                            const GroupIndex& groups, const InitOptions& init_opts);

}  // namespace kangc
