#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <utility>
#include <vector>

#include "kangc/granger.hpp"

namespace kangc {

/// Binary ground-truth graph; adjacency(i, j) = 1 iff series j drives
/// series i (row = effect, column = cause).
struct GroundTruthGraph {
    Eigen::MatrixXi adjacency;
};

// ---------------------------------------------------------------------------
// Lorenz-96

struct Lorenz96Config {
    int p = 10;
    double forcing = 10.0;
    int length = 1000;            // recorded samples, one per integration step
    double dt = 0.05;
    int burn_in = 1000;           // discarded leading steps
    double obs_noise_std = 0.01;  // additive observation noise
    std::uint64_t seed = 0;
};

/// d x_i/dt = (x_{i+1} - x_{i-2}) * x_{i-1} - x_i + F with cyclic indices.
Eigen::VectorXd lorenz96_derivative(const Eigen::VectorXd& state, double forcing);

/// Classical 4th-order Runge-Kutta step of the Lorenz-96 field.
Eigen::VectorXd rk4_step(const Eigen::VectorXd& state, double forcing, double dt);

struct LorenzDataset {
    TimeSeriesPanel panel;
    GroundTruthGraph truth;  // row i: ones at columns {i-2, i-1, i, i+1} mod p
};

LorenzDataset simulate_lorenz96(const Lorenz96Config& cfg);

// ---------------------------------------------------------------------------
// Sparse VAR

struct VarConfig {
    int p = 10;
    int length = 1000;
    int lag = 3;
    double sparsity = 0.2;          // fraction of nonzero entries in the union support
    double coeff_scale = 0.1;       // |coefficient| before spectral rescaling
    double noise_std = 1.0;
    double spectral_target = 0.95;  // companion-matrix spectral radius after rescaling
    std::uint64_t seed = 0;
    int burn_in = 200;
    /// When set, every support edge is active at exactly this lag (1-based);
    /// otherwise each edge gets a random nonempty subset of lags.
    std::optional<int> single_lag;
};

struct VarDataset {
    TimeSeriesPanel panel;
    GroundTruthGraph truth;                     // union of the per-lag supports
    std::vector<Eigen::MatrixXd> coefficients;  // A^(1) ... A^(lag), after rescaling
};

VarDataset generate_var(const VarConfig& cfg);

/// Simulates x_t = sum_m A^(m) x_{t-m} + noise from given coefficients.
/// Exposed for tests that need hand-built processes.
TimeSeriesPanel simulate_var(const std::vector<Eigen::MatrixXd>& coefficients, int length,
                             double noise_std, int burn_in, std::uint64_t seed);

/// Spectral radius of the VAR companion matrix built from `coefficients`.
double var_spectral_radius(const std::vector<Eigen::MatrixXd>& coefficients);

// ---------------------------------------------------------------------------
// External panel files

enum class PanelFormat {
    kSingle,           // header + T rows of p values -> one panel
    kReplicateColumn,  // first column is a replicate id; contiguous runs split panels
    kBlocks,           // header + R*T rows; every block_length rows is one replicate
};

struct LoadSpec {
    PanelFormat format = PanelFormat::kSingle;
    int block_length = 0;  // required for kBlocks
};

/// Parses a panel CSV. Errors carry the 1-based row/column location.
std::vector<TimeSeriesPanel> load_panel(const std::filesystem::path& path, const LoadSpec& spec);

}  // namespace kangc
