#include "kangc/evalmetrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

namespace kangc {

double auroc(std::span<const double> scores, std::span<const int> labels) {
    if (scores.size() != labels.size()) {
        throw std::invalid_argument("auroc: scores and labels differ in length");
    }
    if (scores.empty()) throw std::invalid_argument("auroc: empty input");

    std::size_t positives = 0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        if (!std::isfinite(scores[i])) {
            throw std::invalid_argument("auroc: non-finite score at index " + std::to_string(i));
        }
        if (labels[i] != 0 && labels[i] != 1) {
            throw std::invalid_argument("auroc: label at index " + std::to_string(i) +
                                        " is not 0/1");
        }
        positives += static_cast<std::size_t>(labels[i]);
    }
    const std::size_t negatives = scores.size() - positives;
    if (positives == 0 || negatives == 0) {
        throw std::invalid_argument("auroc: labels contain a single class");
    }

    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

    // Midranks: every member of a tie run gets the average rank of the run.
    double positive_rank_sum = 0.0;
    std::size_t i = 0;
    while (i < order.size()) {
        std::size_t j = i + 1;
        while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
        const double midrank = 0.5 * static_cast<double>(i + 1 + j);  // ranks are 1-based
        for (std::size_t k = i; k < j; ++k) {
            if (labels[order[k]] == 1) positive_rank_sum += midrank;
        }
        i = j;
    }

    const double np = static_cast<double>(positives);
    const double nn = static_cast<double>(negatives);
    const double u = positive_rank_sum - np * (np + 1.0) / 2.0;
    return u / (np * nn);
}

double gc_auroc(const Eigen::MatrixXd& gc, const Eigen::MatrixXi& truth, const EvalSpec& spec) {
    if (gc.rows() != truth.rows() || gc.cols() != truth.cols()) {
        throw std::invalid_argument("gc_auroc: score and truth shapes differ");
    }
    if (gc.rows() == 0) throw std::invalid_argument("gc_auroc: empty matrices");
    if (!spec.include_diagonal && gc.rows() != gc.cols()) {
        throw std::invalid_argument("gc_auroc: diagonal masking needs a square matrix");
    }

    std::vector<double> scores;
    std::vector<int> labels;
    scores.reserve(static_cast<std::size_t>(gc.size()));
    labels.reserve(static_cast<std::size_t>(gc.size()));
    for (Eigen::Index r = 0; r < gc.rows(); ++r) {
        for (Eigen::Index c = 0; c < gc.cols(); ++c) {
            if (!spec.include_diagonal && r == c) continue;
            const int t = truth(r, c);
            if (t != 0 && t != 1) {
                throw std::invalid_argument("gc_auroc: truth entry (" + std::to_string(r) + ", " +
                                            std::to_string(c) + ") is not 0/1");
            }
            scores.push_back(gc(r, c));
            labels.push_back(t);
        }
    }
    return auroc(scores, labels);
}

ScoreSummary aggregate(std::span<const double> values) {
    if (values.empty()) throw std::invalid_argument("aggregate: empty input");
    ScoreSummary summary;
    summary.n = static_cast<int>(values.size());
    summary.values.assign(values.begin(), values.end());
    summary.mean = std::accumulate(values.begin(), values.end(), 0.0) /
                   static_cast<double>(values.size());
    if (values.size() > 1) {
        double ss = 0.0;
        for (double v : values) {
            const double d = v - summary.mean;
            ss += d * d;
        }
        summary.std_dev = std::sqrt(ss / static_cast<double>(values.size() - 1));
    }
    return summary;
}

}  // namespace kangc
