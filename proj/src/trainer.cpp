#include "kangc/trainer.hpp"

#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>

#include "kangc/rng.hpp"

namespace kangc {

namespace {

void check_groups(const KanLayer& first_layer, const GroupIndex& groups) {
    if (groups.num_series < 1 || groups.num_lags < 1 ||
        groups.in_dim() != first_layer.in_dim()) {
        throw std::invalid_argument("group index covers " + std::to_string(groups.in_dim()) +
                                    " columns, first layer has " +
                                    std::to_string(first_layer.in_dim()));
    }
}

double frobenius(const Eigen::MatrixXd& w) { return std::sqrt(w.squaredNorm()); }

}  // namespace

Eigen::VectorXd group_norms(const KanLayer& first_layer, const GroupIndex& groups) {
    check_groups(first_layer, groups);
    Eigen::VectorXd sq = Eigen::VectorXd::Zero(groups.num_series);
    for (int c = 0; c < first_layer.in_dim(); ++c) {
        sq(groups.series_of(c)) += first_layer.base_weights.col(c).squaredNorm();
    }
    return sq.array().sqrt();
}

LossBreakdown compute_losses(const KanNetwork& net, const Eigen::MatrixXd& inputs,
                             const Eigen::VectorXd& targets, const TrainConfig& cfg,
                             const GroupIndex& groups) {
    if (inputs.rows() == 0) throw std::invalid_argument("compute_losses: empty batch");
    if (inputs.rows() != targets.size()) {
        throw std::invalid_argument("compute_losses: inputs/targets misaligned");
    }
    const Eigen::MatrixXd pred = network_forward(net, inputs);
    const double mse = (pred.col(0) - targets).squaredNorm() / static_cast<double>(inputs.rows());
    const double sparsity = cfg.lambda * group_norms(net.layers.front(), groups).sum();
    double ridge = 0.0;
    for (std::size_t l = 1; l < net.layers.size(); ++l) {
        ridge += cfg.gamma * frobenius(net.layers[l].base_weights);
    }
    return LossBreakdown::make(mse, sparsity, ridge);
}

AdamState AdamState::init_like(const std::vector<const Eigen::MatrixXd*>& params) {
    AdamState s;
    s.m.reserve(params.size());
    s.v.reserve(params.size());
    for (const auto* p : params) {
        s.m.emplace_back(Eigen::MatrixXd::Zero(p->rows(), p->cols()));
        s.v.emplace_back(Eigen::MatrixXd::Zero(p->rows(), p->cols()));
    }
    return s;
}

void adam_step(const std::vector<Eigen::MatrixXd*>& params,
               const std::vector<const Eigen::MatrixXd*>& grads, AdamState& state,
               double learning_rate) {
    constexpr double kBeta1 = 0.9;
    constexpr double kBeta2 = 0.999;
    constexpr double kEps = 1e-8;
    if (params.size() != grads.size() || params.size() != state.m.size()) {
        throw std::invalid_argument("adam_step: tensor count mismatch");
    }
    state.step += 1;
    const double c1 = 1.0 / (1.0 - std::pow(kBeta1, static_cast<double>(state.step)));
    const double c2 = 1.0 / (1.0 - std::pow(kBeta2, static_cast<double>(state.step)));
    for (std::size_t i = 0; i < params.size(); ++i) {
        Eigen::MatrixXd& p = *params[i];
        const Eigen::MatrixXd& g = *grads[i];
        if (p.rows() != g.rows() || p.cols() != g.cols() || p.rows() != state.m[i].rows() ||
            p.cols() != state.m[i].cols()) {
            throw std::invalid_argument("adam_step: shape mismatch at tensor " + std::to_string(i));
        }
        state.m[i] = kBeta1 * state.m[i] + (1.0 - kBeta1) * g;
        state.v[i].array() = kBeta2 * state.v[i].array() + (1.0 - kBeta2) * g.array().square();
        p.array() -= learning_rate * (c1 * state.m[i].array()) /
                     ((c2 * state.v[i].array()).sqrt() + kEps);
    }
}

TrainResult train_component(const Eigen::MatrixXd& inputs, const Eigen::VectorXd& targets,
                            const std::vector<int>& dims, const TrainConfig& cfg,
                            const GroupIndex& groups, const InitOptions& init_opts) {
    if (inputs.rows() < 1) throw std::invalid_argument("train_component: no training rows");
    if (inputs.rows() != targets.size()) {
        throw std::invalid_argument("train_component: inputs/targets misaligned");
    }
    if (dims.empty() || dims.front() != inputs.cols()) {
        throw std::invalid_argument("train_component: dims[0] must equal the input dimension");
    }
    if (cfg.lambda < 0.0 || cfg.gamma < 0.0 || cfg.learning_rate <= 0.0 || cfg.max_epochs < 1) {
        throw std::invalid_argument("train_component: invalid TrainConfig");
    }

    InitOptions init = init_opts;
    if (groups.in_dim() == dims.front()) init.first_layer_tie_width = groups.num_series;
    KanNetwork net = init_network(dims, init, cfg.seed);

    std::vector<Eigen::MatrixXd*> params;
    for (auto& layer : net.layers) {
        params.push_back(&layer.base_weights);
        params.push_back(&layer.spline_weights);
    }
    AdamState adam = AdamState::init_like(
        std::vector<const Eigen::MatrixXd*>(params.begin(), params.end()));

    const Eigen::Index rows = inputs.rows();
    const int batch = cfg.batch_size > 0 ? std::min<int>(cfg.batch_size, static_cast<int>(rows))
                                         : static_cast<int>(rows);
    const bool full_batch = batch == static_cast<int>(rows);
    Rng shuffle_rng(derive_seed(cfg.seed, 0x51affe11ULL));

    const double eps = cfg.group_norm_epsilon;
    double best_total = std::numeric_limits<double>::infinity();
    int stale = 0;
    int epochs_run = 0;
    ForwardCache cache;
    std::vector<Eigen::Index> perm(static_cast<std::size_t>(rows));
    std::iota(perm.begin(), perm.end(), 0);

    for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
        epochs_run = epoch + 1;
        double epoch_mse = 0.0;
        if (!full_batch) {
            for (std::size_t i = perm.size(); i > 1; --i) {
                std::swap(perm[i - 1], perm[shuffle_rng.next_u64() % i]);
            }
        }
        for (Eigen::Index start = 0; start < rows; start += batch) {
            const Eigen::Index n = std::min<Eigen::Index>(batch, rows - start);
            Eigen::MatrixXd bx;
            Eigen::VectorXd by;
            if (full_batch) {
                bx = inputs;
                by = targets;
            } else {
                bx.resize(n, inputs.cols());
                by.resize(n);
                for (Eigen::Index r = 0; r < n; ++r) {
                    bx.row(r) = inputs.row(perm[static_cast<std::size_t>(start + r)]);
                    by(r) = targets(perm[static_cast<std::size_t>(start + r)]);
                }
            }
            const Eigen::MatrixXd pred = network_forward(net, bx, &cache);
            const Eigen::VectorXd resid = pred.col(0) - by;
            epoch_mse += resid.squaredNorm();
            const Eigen::MatrixXd grad_out = (2.0 / static_cast<double>(n)) * resid;
            NetworkGrads grads = network_backward(net, cache, grad_out);

            // Smoothed group-lasso gradient on the first layer's base weights.
            KanLayer& first = net.layers.front();
            Eigen::VectorXd sq = Eigen::VectorXd::Zero(groups.num_series);
            for (int c = 0; c < first.in_dim(); ++c) {
                sq(groups.series_of(c)) += first.base_weights.col(c).squaredNorm();
            }
            for (int c = 0; c < first.in_dim(); ++c) {
                const double denom = std::sqrt(sq(groups.series_of(c)) + eps);
                grads.layers.front().base_weights.col(c) +=
                    (cfg.lambda / denom) * first.base_weights.col(c);
            }
            // Smoothed ridge gradient on every deeper layer's base weights.
            for (std::size_t l = 1; l < net.layers.size(); ++l) {
                const double denom = std::sqrt(net.layers[l].base_weights.squaredNorm() + eps);
                grads.layers[l].base_weights += (cfg.gamma / denom) * net.layers[l].base_weights;
            }

            std::vector<const Eigen::MatrixXd*> grad_ptrs;
            grad_ptrs.reserve(params.size());
            for (auto& lg : grads.layers) {
                grad_ptrs.push_back(&lg.base_weights);
                grad_ptrs.push_back(&lg.spline_weights);
            }
            adam_step(params, grad_ptrs, adam, cfg.learning_rate);
        }

        double total;
        if (full_batch) {
            // Stop rule uses the pre-update prediction error plus current
            // penalty terms; avoids a second forward pass per epoch.
            const double mse = epoch_mse / static_cast<double>(rows);
            double sparsity = cfg.lambda * group_norms(net.layers.front(), groups).sum();
            double ridge = 0.0;
            for (std::size_t l = 1; l < net.layers.size(); ++l) {
                ridge += cfg.gamma * frobenius(net.layers[l].base_weights);
            }
            total = mse + sparsity + ridge;
        } else {
            total = compute_losses(net, inputs, targets, cfg, groups).total;
        }
        if (!std::isfinite(total)) {
            throw std::runtime_error("train_component: non-finite loss at epoch " +
                                     std::to_string(epoch));
        }
        if (total < best_total) {
            best_total = total;
            stale = 0;
        } else {
            ++stale;
            if (cfg.early_stop_patience > 0 && stale >= cfg.early_stop_patience) break;
        }
    }

    TrainResult result{std::move(net), {}, epochs_run};
    result.final_losses = compute_losses(result.network, inputs, targets, cfg, groups);
    return result;
}

}  // namespace kangc
