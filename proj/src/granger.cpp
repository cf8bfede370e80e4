#include "kangc/granger.hpp"

#include <atomic>
#include <cmath>
#include <exception>
#include <functional>
#include <limits>
#include <mutex>
#include <stdexcept>
#include <string>
#include <thread>

#include "kangc/rng.hpp"

namespace kangc {

void validate_panel(const TimeSeriesPanel& panel) {
    if (panel.values.rows() < 2) throw std::invalid_argument("panel needs at least 2 time points");
    if (panel.values.cols() < 2) throw std::invalid_argument("panel needs at least 2 series");
    if (!panel.values.allFinite()) throw std::invalid_argument("panel contains non-finite values");
    if (!panel.series_names.empty() &&
        static_cast<Eigen::Index>(panel.series_names.size()) != panel.values.cols()) {
        throw std::invalid_argument("series_names size does not match panel width");
    }
}

TimeSeriesPanel zscore_panel(const TimeSeriesPanel& panel) {
    validate_panel(panel);
    TimeSeriesPanel out = panel;
    const Eigen::Index t = panel.values.rows();
    for (Eigen::Index j = 0; j < panel.values.cols(); ++j) {
        const double mean = panel.values.col(j).mean();
        const double var =
            (panel.values.col(j).array() - mean).square().sum() / static_cast<double>(t);
        const double sd = std::sqrt(var);
        if (sd < 1e-12) {
            out.values.col(j).setZero();
        } else {
            out.values.col(j) = (panel.values.col(j).array() - mean) / sd;
        }
    }
    return out;
}

WindowedDataset build_windowed(const TimeSeriesPanel& panel, int lag) {
    return build_windowed(std::span<const TimeSeriesPanel>(&panel, 1), lag);
}

WindowedDataset build_windowed(std::span<const TimeSeriesPanel> panels, int lag) {
    if (panels.empty()) throw std::invalid_argument("build_windowed: no panels");
    if (lag < 1) throw std::invalid_argument("build_windowed: lag must be >= 1");
    const Eigen::Index p = panels.front().values.cols();
    Eigen::Index total_rows = 0;
    for (const auto& panel : panels) {
        validate_panel(panel);
        if (panel.values.cols() != p) {
            throw std::invalid_argument("build_windowed: panels have differing widths");
        }
        if (panel.values.rows() <= lag) {
            throw std::invalid_argument("build_windowed: panel length " +
                                        std::to_string(panel.values.rows()) +
                                        " must exceed lag " + std::to_string(lag));
        }
        total_rows += panel.values.rows() - lag;
    }

    WindowedDataset ds;
    ds.lag = lag;
    ds.groups = GroupIndex{static_cast<int>(p), lag};
    ds.inputs.resize(total_rows, p * lag);
    ds.targets.resize(total_rows, p);
    ds.replicate_row_counts.reserve(panels.size());
    Eigen::Index row = 0;
    for (const auto& panel : panels) {
        const Eigen::Index t_len = panel.values.rows();
        const Eigen::Index rows_here = t_len - lag;
        for (Eigen::Index t = lag; t < t_len; ++t) {
            for (int k = 0; k < lag; ++k) {
                ds.inputs.block(row + t - lag, static_cast<Eigen::Index>(k) * p, 1, p) =
                    panel.values.row(t - 1 - k);
            }
            ds.targets.row(row + t - lag) = panel.values.row(t);
        }
        ds.replicate_row_counts.push_back(rows_here);
        row += rows_here;
    }
    return ds;
}

Eigen::MatrixXd extract_gc_matrix(std::span<const KanNetwork> models, const GroupIndex& groups) {
    const int p = groups.num_series;
    if (static_cast<int>(models.size()) != p) {
        throw std::invalid_argument("extract_gc_matrix: expected " + std::to_string(p) +
                                    " models, got " + std::to_string(models.size()));
    }
    Eigen::MatrixXd gc(p, p);
    for (int i = 0; i < p; ++i) {
        gc.row(i) = group_norms(models[static_cast<std::size_t>(i)].layers.front(), groups)
                        .transpose();
    }
    return gc;
}

Eigen::MatrixXd lag_profile(const KanNetwork& model, const GroupIndex& groups) {
    const KanLayer& first = model.layers.front();
    if (first.in_dim() != groups.in_dim()) {
        throw std::invalid_argument("lag_profile: model input layout does not match groups");
    }
    Eigen::MatrixXd profile(groups.num_series, groups.num_lags);
    for (int j = 0; j < groups.num_series; ++j) {
        for (int k = 0; k < groups.num_lags; ++k) {
            profile(j, k) = first.base_weights.col(groups.column(j, k)).norm();
        }
    }
    return profile;
}

namespace {

// Runs fn(i) for i in [0, n) on up to `workers` threads. Each index is
// processed exactly once; outputs must go to per-index slots so the result
// is identical for any worker count. The first exception wins.
void parallel_for(int n, int workers, const std::function<void(int)>& fn) {
    workers = std::max(1, std::min(workers, n));
    if (workers == 1) {
        for (int i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<int> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    auto body = [&]() {
        for (;;) {
            const int i = next.fetch_add(1);
            if (i >= n) return;
            try {
                fn(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!error) error = std::current_exception();
                return;
            }
        }
    };
    std::vector<std::thread> threads;
    threads.reserve(static_cast<std::size_t>(workers));
    for (int w = 0; w < workers; ++w) threads.emplace_back(body);
    for (auto& t : threads) t.join();
    if (error) std::rethrow_exception(error);
}

// Trains all p components at fixed lambda/gamma on (inputs, targets).
std::vector<TrainResult> train_all_components(const WindowedDataset& ds,
                                              const Eigen::MatrixXd& inputs,
                                              const Eigen::MatrixXd& targets,
                                              const FitOptions& opts, double lambda,
                                              double gamma) {
    const int p = ds.groups.num_series;
    std::vector<int> dims;
    dims.push_back(static_cast<int>(inputs.cols()));
    for (int h : opts.hidden) dims.push_back(h);
    dims.push_back(1);

    std::vector<TrainResult> results(static_cast<std::size_t>(p));
    parallel_for(p, opts.workers, [&](int i) {
        TrainConfig cfg = opts.train;
        cfg.lambda = lambda;
        cfg.gamma = gamma;
        cfg.seed = derive_seed(opts.train.seed, static_cast<std::uint64_t>(i));
        try {
            results[static_cast<std::size_t>(i)] =
                train_component(inputs, targets.col(i), dims, cfg, ds.groups, opts.init);
        } catch (const std::exception& e) {
            throw std::runtime_error("component " + std::to_string(i) + ": " + e.what());
        }
    });
    return results;
}

// Splits the windowed rows into a training head and a held-out tail,
// per replicate so the tail never mixes replicates.
void split_holdout(const WindowedDataset& ds, double fraction, Eigen::MatrixXd& train_in,
                   Eigen::MatrixXd& train_tg, Eigen::MatrixXd& val_in, Eigen::MatrixXd& val_tg) {
    Eigen::Index train_rows = 0;
    Eigen::Index val_rows = 0;
    std::vector<Eigen::Index> head_counts;
    head_counts.reserve(ds.replicate_row_counts.size());
    for (Eigen::Index rows : ds.replicate_row_counts) {
        Eigen::Index tail = static_cast<Eigen::Index>(std::ceil(fraction * static_cast<double>(rows)));
        if (tail < 1) tail = 1;
        if (tail >= rows) {
            throw std::invalid_argument(
                "lambda sweep needs enough rows for a held-out tail; set lambda explicitly");
        }
        head_counts.push_back(rows - tail);
        train_rows += rows - tail;
        val_rows += tail;
    }
    train_in.resize(train_rows, ds.inputs.cols());
    train_tg.resize(train_rows, ds.targets.cols());
    val_in.resize(val_rows, ds.inputs.cols());
    val_tg.resize(val_rows, ds.targets.cols());
    Eigen::Index src = 0;
    Eigen::Index t_at = 0;
    Eigen::Index v_at = 0;
    for (std::size_t r = 0; r < ds.replicate_row_counts.size(); ++r) {
        const Eigen::Index rows = ds.replicate_row_counts[r];
        const Eigen::Index head = head_counts[r];
        train_in.middleRows(t_at, head) = ds.inputs.middleRows(src, head);
        train_tg.middleRows(t_at, head) = ds.targets.middleRows(src, head);
        val_in.middleRows(v_at, rows - head) = ds.inputs.middleRows(src + head, rows - head);
        val_tg.middleRows(v_at, rows - head) = ds.targets.middleRows(src + head, rows - head);
        t_at += head;
        v_at += rows - head;
        src += rows;
    }
}

}  // namespace

GcResult fit_gckan(const TimeSeriesPanel& panel, const FitOptions& opts) {
    return fit_gckan(std::span<const TimeSeriesPanel>(&panel, 1), opts);
}

GcResult fit_gckan(std::span<const TimeSeriesPanel> panels, const FitOptions& opts) {
    if (panels.empty()) throw std::invalid_argument("fit_gckan: no panels");
    if (opts.hidden.empty()) throw std::invalid_argument("fit_gckan: hidden layers missing");
    std::vector<TimeSeriesPanel> scored;
    scored.reserve(panels.size());
    for (const auto& panel : panels) scored.push_back(zscore_panel(panel));
    const WindowedDataset ds = build_windowed(std::span<const TimeSeriesPanel>(scored), opts.lag);
    const int p = ds.groups.num_series;

    double lambda = opts.lambda.value_or(0.0);
    double gamma = opts.gamma.value_or(lambda);
    if (!opts.lambda.has_value()) {
        // Select one penalty strength for the whole fit: train on the head,
        // score total loss on the held-out tail, keep the argmin.
        if (opts.sweep.empty()) {
            throw std::invalid_argument("fit_gckan: no lambda given and empty sweep");
        }
        Eigen::MatrixXd train_in, train_tg, val_in, val_tg;
        split_holdout(ds, opts.holdout_fraction, train_in, train_tg, val_in, val_tg);
        double best_score = std::numeric_limits<double>::infinity();
        double best_value = opts.sweep.front();
        for (double candidate : opts.sweep) {
            const double cand_gamma = opts.gamma.value_or(candidate);
            auto fits = train_all_components(ds, train_in, train_tg, opts, candidate, cand_gamma);
            double score = 0.0;
            for (int i = 0; i < p; ++i) {
                TrainConfig cfg = opts.train;
                cfg.lambda = candidate;
                cfg.gamma = cand_gamma;
                score += compute_losses(fits[static_cast<std::size_t>(i)].network, val_in,
                                        val_tg.col(i), cfg, ds.groups)
                             .total;
            }
            if (score < best_score) {
                best_score = score;
                best_value = candidate;
            }
        }
        lambda = best_value;
        gamma = opts.gamma.value_or(best_value);
    }

    auto fits = train_all_components(ds, ds.inputs, ds.targets, opts, lambda, gamma);

    GcResult result;
    result.lambda_used = lambda;
    result.gamma_used = gamma;
    result.models.reserve(static_cast<std::size_t>(p));
    result.per_component.reserve(static_cast<std::size_t>(p));
    result.lag_profiles.reserve(static_cast<std::size_t>(p));
    for (auto& fit : fits) {
        result.per_component.push_back(fit.final_losses);
        result.aggregate += fit.final_losses;
        result.models.push_back(std::move(fit.network));
    }
    result.gc = extract_gc_matrix(std::span<const KanNetwork>(result.models), ds.groups);
    for (const auto& model : result.models) {
        result.lag_profiles.push_back(lag_profile(model, ds.groups));
    }
    return result;
}

}  // namespace kangc
