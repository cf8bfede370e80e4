#pragma once

#include <Eigen/Dense>
#include <span>
#include <vector>

namespace kangc {

struct EvalSpec {
    /// false masks the diagonal (gene-network rule); true scores all entries.
    bool include_diagonal = true;
};

struct ScoreSummary {
    double mean = 0.0;
    double std_dev = 0.0;  // sample std, n-1 denominator; 0 when n = 1
    int n = 0;
    std::vector<double> values;
};

/// Mann-Whitney AUROC with midrank tie handling:
/// P(score+ > score-) + 0.5 * P(score+ = score-).
/// Throws if sizes mismatch, labels are not 0/1, a score is non-finite,
/// or only one class is present.
double auroc(std::span<const double> scores, std::span<const int> labels);

/// Flattens G against truth (diagonal masked iff !include_diagonal) and
/// scores with auroc. Masked entries are never read.
double gc_auroc(const Eigen::MatrixXd& gc, const Eigen::MatrixXi& truth, const EvalSpec& spec);

ScoreSummary aggregate(std::span<const double> values);

}  // namespace kangc
