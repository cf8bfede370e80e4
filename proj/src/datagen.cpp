#include "kangc/datagen.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>

#include "kangc/rng.hpp"

namespace kangc {

namespace {

std::vector<std::string> default_names(int p) {
    std::vector<std::string> names(static_cast<std::size_t>(p));
    for (int j = 0; j < p; ++j) names[static_cast<std::size_t>(j)] = "x" + std::to_string(j + 1);
    return names;
}

}  // namespace

// ---------------------------------------------------------------------------
// Lorenz-96

Eigen::VectorXd lorenz96_derivative(const Eigen::VectorXd& state, double forcing) {
    const int p = static_cast<int>(state.size());
    if (p < 4) {
        throw std::invalid_argument("lorenz96_derivative: need p >= 4, got " + std::to_string(p));
    }
    Eigen::VectorXd deriv(p);
    for (int i = 0; i < p; ++i) {
        const double xm1 = state((i - 1 + p) % p);
        const double xm2 = state((i - 2 + p) % p);
        const double xp1 = state((i + 1) % p);
        deriv(i) = -xm1 * (xm2 - xp1) - state(i) + forcing;
    }
    return deriv;
}

Eigen::VectorXd rk4_step(const Eigen::VectorXd& state, double forcing, double dt) {
    if (!(dt > 0.0)) throw std::invalid_argument("rk4_step: dt must be positive");
    const Eigen::VectorXd k1 = lorenz96_derivative(state, forcing);
    const Eigen::VectorXd k2 = lorenz96_derivative(state + 0.5 * dt * k1, forcing);
    const Eigen::VectorXd k3 = lorenz96_derivative(state + 0.5 * dt * k2, forcing);
    const Eigen::VectorXd k4 = lorenz96_derivative(state + dt * k3, forcing);
    return state + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

LorenzDataset simulate_lorenz96(const Lorenz96Config& cfg) {
    if (cfg.p < 4) throw std::invalid_argument("simulate_lorenz96: need p >= 4");
    if (cfg.length < 1) throw std::invalid_argument("simulate_lorenz96: length must be positive");
    if (!(cfg.dt > 0.0)) throw std::invalid_argument("simulate_lorenz96: dt must be positive");
    if (cfg.burn_in < 0) throw std::invalid_argument("simulate_lorenz96: burn_in must be >= 0");
    if (cfg.obs_noise_std < 0.0) {
        throw std::invalid_argument("simulate_lorenz96: obs_noise_std must be >= 0");
    }

    Rng init_rng(derive_seed(cfg.seed, 1));
    Rng noise_rng(derive_seed(cfg.seed, 2));

    Eigen::VectorXd state(cfg.p);
    for (int i = 0; i < cfg.p; ++i) state(i) = cfg.forcing + 0.01 * init_rng.normal();

    const long total_steps = static_cast<long>(cfg.burn_in) + cfg.length;
    LorenzDataset out;
    out.panel.values.resize(cfg.length, cfg.p);
    for (long step = 0; step < total_steps; ++step) {
        state = rk4_step(state, cfg.forcing, cfg.dt);
        if (!state.allFinite()) {
            throw std::runtime_error("simulate_lorenz96: state blew up at step " +
                                     std::to_string(step));
        }
        if (step >= cfg.burn_in) out.panel.values.row(step - cfg.burn_in) = state.transpose();
    }
    if (cfg.obs_noise_std > 0.0) {
        for (int t = 0; t < cfg.length; ++t) {
            for (int j = 0; j < cfg.p; ++j) {
                out.panel.values(t, j) += noise_rng.normal(0.0, cfg.obs_noise_std);
            }
        }
    }
    out.panel.series_names = default_names(cfg.p);

    out.truth.adjacency = Eigen::MatrixXi::Zero(cfg.p, cfg.p);
    for (int i = 0; i < cfg.p; ++i) {
        for (int off : {-2, -1, 0, 1}) {
            out.truth.adjacency(i, (i + off + cfg.p) % cfg.p) = 1;
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Sparse VAR

namespace {

// Radix-2 balancing (Parlett-Reinsch). Companion matrices mix entries of
// very different magnitudes, which costs the unbalanced QR iteration several
// digits; the diagonal similarity leaves the eigenvalues untouched.
void balance_in_place(Eigen::MatrixXd& a) {
    const Eigen::Index n = a.rows();
    const double radix = 2.0;
    const double sqrdx = radix * radix;
    for (bool converged = false; !converged;) {
        converged = true;
        for (Eigen::Index i = 0; i < n; ++i) {
            const double r = a.row(i).lpNorm<1>() - std::abs(a(i, i));
            double c = a.col(i).lpNorm<1>() - std::abs(a(i, i));
            if (r == 0.0 || c == 0.0) continue;
            const double s = c + r;
            double g = r / radix;
            double f = 1.0;
            while (c < g) {
                f *= radix;
                c *= sqrdx;
            }
            g = r * radix;
            while (c > g) {
                f /= radix;
                c /= sqrdx;
            }
            // Only scale when the combined norm actually drops; without this
            // guard the sweep can cycle between two scalings forever.
            if ((c + r) / f < 0.95 * s) {
                a.row(i) /= f;
                a.col(i) *= f;
                converged = false;
            }
        }
    }
}

}  // namespace

double var_spectral_radius(const std::vector<Eigen::MatrixXd>& coefficients) {
    if (coefficients.empty()) throw std::invalid_argument("var_spectral_radius: no coefficients");
    const int p = static_cast<int>(coefficients.front().rows());
    const int lag = static_cast<int>(coefficients.size());
    for (const auto& a : coefficients) {
        if (a.rows() != p || a.cols() != p) {
            throw std::invalid_argument("var_spectral_radius: coefficient matrices must be p x p");
        }
    }
    // With a single nonzero lag m the companion's nonzero eigenvalues are the
    // m-th roots of eig(A^(m)): det reduces to lambda^(p(K-m)) det(lambda^m I
    // - A^(m)). The reduced solve avoids the defective full companion, whose
    // dominant eigenvalue the QR iteration only locates to ~1e-4.
    int only_lag = -1;
    int nonzero_lags = 0;
    for (int m = 0; m < lag; ++m) {
        if ((coefficients[static_cast<std::size_t>(m)].array() != 0.0).any()) {
            only_lag = m;
            ++nonzero_lags;
        }
    }
    if (nonzero_lags == 0) return 0.0;
    if (nonzero_lags == 1) {
        Eigen::MatrixXd a = coefficients[static_cast<std::size_t>(only_lag)];
        balance_in_place(a);
        Eigen::EigenSolver<Eigen::MatrixXd> solver(a, /*computeEigenvectors=*/false);
        if (solver.info() != Eigen::Success) {
            throw std::runtime_error("var_spectral_radius: eigensolver failed");
        }
        const double rho = solver.eigenvalues().cwiseAbs().maxCoeff();
        return std::pow(rho, 1.0 / (only_lag + 1));
    }

    Eigen::MatrixXd companion = Eigen::MatrixXd::Zero(p * lag, p * lag);
    for (int m = 0; m < lag; ++m) {
        companion.block(0, m * p, p, p) = coefficients[static_cast<std::size_t>(m)];
    }
    for (int m = 1; m < lag; ++m) {
        companion.block(m * p, (m - 1) * p, p, p) = Eigen::MatrixXd::Identity(p, p);
    }
    balance_in_place(companion);
    Eigen::EigenSolver<Eigen::MatrixXd> solver(companion, /*computeEigenvectors=*/false);
    if (solver.info() != Eigen::Success) {
        throw std::runtime_error("var_spectral_radius: eigensolver failed");
    }
    return solver.eigenvalues().cwiseAbs().maxCoeff();
}

TimeSeriesPanel simulate_var(const std::vector<Eigen::MatrixXd>& coefficients, int length,
                             double noise_std, int burn_in, std::uint64_t seed) {
    if (coefficients.empty()) throw std::invalid_argument("simulate_var: no coefficients");
    const int p = static_cast<int>(coefficients.front().rows());
    const int lag = static_cast<int>(coefficients.size());
    for (const auto& a : coefficients) {
        if (a.rows() != p || a.cols() != p) {
            throw std::invalid_argument("simulate_var: coefficient matrices must be p x p");
        }
        if (!a.allFinite()) throw std::invalid_argument("simulate_var: non-finite coefficient");
    }
    if (length < 1) throw std::invalid_argument("simulate_var: length must be positive");
    if (burn_in < 0) throw std::invalid_argument("simulate_var: burn_in must be >= 0");
    if (noise_std < 0.0) throw std::invalid_argument("simulate_var: noise_std must be >= 0");

    Rng rng(derive_seed(seed, 3));
    // history[0] is x_{t-1}, history[1] is x_{t-2}, ...
    std::vector<Eigen::VectorXd> history(static_cast<std::size_t>(lag),
                                         Eigen::VectorXd::Zero(p));
    TimeSeriesPanel panel;
    panel.values.resize(length, p);
    const long total = static_cast<long>(burn_in) + length;
    Eigen::VectorXd x(p);
    for (long t = 0; t < total; ++t) {
        x.setZero();
        for (int m = 0; m < lag; ++m) {
            x.noalias() += coefficients[static_cast<std::size_t>(m)] *
                           history[static_cast<std::size_t>(m)];
        }
        for (int i = 0; i < p; ++i) x(i) += rng.normal(0.0, noise_std);
        if (!x.allFinite()) {
            throw std::runtime_error("simulate_var: state blew up at step " + std::to_string(t));
        }
        for (int m = lag - 1; m > 0; --m) {
            history[static_cast<std::size_t>(m)] = history[static_cast<std::size_t>(m - 1)];
        }
        history[0] = x;
        if (t >= burn_in) panel.values.row(t - burn_in) = x.transpose();
    }
    panel.series_names = default_names(p);
    return panel;
}

VarDataset generate_var(const VarConfig& cfg) {
    if (cfg.p < 2) throw std::invalid_argument("generate_var: need p >= 2");
    if (cfg.length < 1) throw std::invalid_argument("generate_var: length must be positive");
    if (cfg.lag < 1) throw std::invalid_argument("generate_var: lag must be positive");
    if (!(cfg.sparsity > 0.0) || cfg.sparsity > 1.0) {
        throw std::invalid_argument("generate_var: sparsity must be in (0, 1]");
    }
    if (!(cfg.coeff_scale > 0.0)) {
        throw std::invalid_argument("generate_var: coeff_scale must be positive");
    }
    if (!(cfg.noise_std > 0.0)) {
        throw std::invalid_argument("generate_var: noise_std must be positive");
    }
    if (!(cfg.spectral_target > 0.0) || !(cfg.spectral_target < 1.0)) {
        throw std::invalid_argument("generate_var: spectral_target must be in (0, 1)");
    }
    if (cfg.burn_in < 0) throw std::invalid_argument("generate_var: burn_in must be >= 0");
    if (cfg.single_lag && (*cfg.single_lag < 1 || *cfg.single_lag > cfg.lag)) {
        throw std::invalid_argument("generate_var: single_lag must lie in [1, lag]");
    }
    const int total_edges =
        static_cast<int>(std::lround(cfg.sparsity * static_cast<double>(cfg.p) * cfg.p));
    if (total_edges < cfg.p) {
        throw std::invalid_argument(
            "generate_var: sparsity * p^2 must be >= p (diagonal is always present)");
    }

    Rng rng(derive_seed(cfg.seed, 4));

    // Union support: all p diagonal entries plus a uniform sample of
    // off-diagonal positions, total_edges entries in total.
    VarDataset out;
    out.truth.adjacency = Eigen::MatrixXi::Identity(cfg.p, cfg.p);
    std::vector<std::pair<int, int>> off_diag;
    off_diag.reserve(static_cast<std::size_t>(cfg.p) * (cfg.p - 1));
    for (int i = 0; i < cfg.p; ++i) {
        for (int j = 0; j < cfg.p; ++j) {
            if (i != j) off_diag.emplace_back(i, j);
        }
    }
    const int extra = total_edges - cfg.p;
    for (int k = 0; k < extra; ++k) {
        const std::size_t pick = static_cast<std::size_t>(
            rng.uniform_int(k, static_cast<int>(off_diag.size()) - 1));
        std::swap(off_diag[static_cast<std::size_t>(k)], off_diag[pick]);
        out.truth.adjacency(off_diag[static_cast<std::size_t>(k)].first,
                            off_diag[static_cast<std::size_t>(k)].second) = 1;
    }

    out.coefficients.assign(static_cast<std::size_t>(cfg.lag),
                            Eigen::MatrixXd::Zero(cfg.p, cfg.p));
    for (int i = 0; i < cfg.p; ++i) {
        for (int j = 0; j < cfg.p; ++j) {
            if (out.truth.adjacency(i, j) == 0) continue;
            std::vector<int> active;
            if (cfg.single_lag) {
                active.push_back(*cfg.single_lag - 1);
            } else {
                for (int m = 0; m < cfg.lag; ++m) {
                    if (rng.uniform01() < 0.5) active.push_back(m);
                }
                if (active.empty()) {
                    active.push_back(rng.uniform_int(0, cfg.lag - 1));
                }
            }
            for (int m : active) {
                const double sign = rng.uniform01() < 0.5 ? -1.0 : 1.0;
                out.coefficients[static_cast<std::size_t>(m)](i, j) = sign * cfg.coeff_scale;
            }
        }
    }

    // Scaling A^(m) by s^(m+1) scales every companion eigenvalue by s. The
    // eigensolve itself is only good to ~1e-5 on badly conditioned companion
    // spectra, so iterate the pass until the measured radius sits on the
    // target; the composed scales keep magnitudes shared within each lag.
    double rescaled = var_spectral_radius(out.coefficients);
    for (int pass = 0; pass < 8 && std::abs(rescaled - cfg.spectral_target) > 1e-9; ++pass) {
        if (!(rescaled > 1e-12)) {
            throw std::runtime_error(
                "generate_var: companion spectral radius is zero, cannot rescale");
        }
        const double s = cfg.spectral_target / rescaled;
        for (int m = 0; m < cfg.lag; ++m) {
            out.coefficients[static_cast<std::size_t>(m)] *= std::pow(s, m + 1);
        }
        rescaled = var_spectral_radius(out.coefficients);
    }
    if (std::abs(rescaled - cfg.spectral_target) > 1e-6) {
        throw std::runtime_error("generate_var: spectral rescaling did not converge (radius " +
                                 std::to_string(rescaled) + ")");
    }

    out.panel = simulate_var(out.coefficients, cfg.length, cfg.noise_std, cfg.burn_in,
                             derive_seed(cfg.seed, 5));
    out.panel.series_names = default_names(cfg.p);
    return out;
}

// ---------------------------------------------------------------------------
// Panel files

namespace {

struct RawCsv {
    std::vector<std::vector<std::string>> rows;  // nonempty lines, split on ','
    std::vector<int> line_numbers;               // 1-based source line per row
};

RawCsv read_csv_rows(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("load_panel: cannot open " + path.string());
    RawCsv raw;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::vector<std::string> cells;
        std::size_t start = 0;
        while (true) {
            const std::size_t comma = line.find(',', start);
            std::string cell = line.substr(start, comma == std::string::npos ? std::string::npos
                                                                             : comma - start);
            const auto is_space = [](unsigned char c) { return std::isspace(c) != 0; };
            while (!cell.empty() && is_space(static_cast<unsigned char>(cell.front()))) {
                cell.erase(cell.begin());
            }
            while (!cell.empty() && is_space(static_cast<unsigned char>(cell.back()))) {
                cell.pop_back();
            }
            cells.push_back(std::move(cell));
            if (comma == std::string::npos) break;
            start = comma + 1;
        }
        raw.rows.push_back(std::move(cells));
        raw.line_numbers.push_back(line_no);
    }
    if (raw.rows.empty()) throw std::runtime_error("load_panel: " + path.string() + " is empty");
    return raw;
}

bool parse_double(const std::string& cell, double& out) {
    const char* begin = cell.data();
    const char* end = begin + cell.size();
    const auto result = std::from_chars(begin, end, out);
    return result.ec == std::errc() && result.ptr == end;
}

[[noreturn]] void cell_error(const std::filesystem::path& path, int line, int column,
                             const std::string& what) {
    throw std::runtime_error("load_panel: " + path.string() + ": row " + std::to_string(line) +
                             ", column " + std::to_string(column) + ": " + what);
}

double numeric_cell(const std::filesystem::path& path, const RawCsv& raw, std::size_t row,
                    std::size_t col) {
    const std::string& cell = raw.rows[row][col];
    double value = 0.0;
    if (cell.empty() || !parse_double(cell, value)) {
        cell_error(path, raw.line_numbers[row], static_cast<int>(col) + 1,
                   "expected a number, got \"" + cell + "\"");
    }
    if (!std::isfinite(value)) {
        cell_error(path, raw.line_numbers[row], static_cast<int>(col) + 1,
                   "non-finite value \"" + cell + "\"");
    }
    return value;
}

bool row_is_numeric(const std::vector<std::string>& cells) {
    double ignored = 0.0;
    for (const auto& c : cells) {
        if (c.empty() || !parse_double(c, ignored)) return false;
    }
    return true;
}

}  // namespace

std::vector<TimeSeriesPanel> load_panel(const std::filesystem::path& path, const LoadSpec& spec) {
    const RawCsv raw = read_csv_rows(path);

    const std::size_t width = raw.rows.front().size();
    for (std::size_t r = 0; r < raw.rows.size(); ++r) {
        if (raw.rows[r].size() != width) {
            cell_error(path, raw.line_numbers[r], static_cast<int>(raw.rows[r].size()),
                       "ragged row: expected " + std::to_string(width) + " columns, got " +
                           std::to_string(raw.rows[r].size()));
        }
    }

    // A fully numeric first row means the file has no header.
    const bool has_header = !row_is_numeric(raw.rows.front());
    const std::size_t data_begin = has_header ? 1 : 0;
    const std::size_t data_rows = raw.rows.size() - data_begin;
    if (data_rows == 0) {
        throw std::runtime_error("load_panel: " + path.string() + " has no data rows");
    }

    const std::size_t id_cols = spec.format == PanelFormat::kReplicateColumn ? 1 : 0;
    if (width <= id_cols) {
        throw std::runtime_error("load_panel: " + path.string() + " has no series columns");
    }
    const int p = static_cast<int>(width - id_cols);

    std::vector<std::string> names;
    if (has_header) {
        names.assign(raw.rows.front().begin() + static_cast<std::ptrdiff_t>(id_cols),
                     raw.rows.front().end());
    } else {
        names = default_names(p);
    }

    Eigen::MatrixXd values(static_cast<Eigen::Index>(data_rows), p);
    std::vector<long> rep_ids(data_rows, 0);
    for (std::size_t r = 0; r < data_rows; ++r) {
        const std::size_t row = data_begin + r;
        if (id_cols == 1) {
            const std::string& cell = raw.rows[row][0];
            long id = 0;
            const auto res = std::from_chars(cell.data(), cell.data() + cell.size(), id);
            if (res.ec != std::errc() || res.ptr != cell.data() + cell.size()) {
                cell_error(path, raw.line_numbers[row], 1,
                           "expected an integer replicate id, got \"" + cell + "\"");
            }
            rep_ids[r] = id;
        }
        for (int j = 0; j < p; ++j) {
            values(static_cast<Eigen::Index>(r), j) = numeric_cell(path, raw, row, id_cols + j);
        }
    }

    std::vector<TimeSeriesPanel> panels;
    switch (spec.format) {
        case PanelFormat::kSingle: {
            TimeSeriesPanel panel;
            panel.values = std::move(values);
            panel.series_names = names;
            panels.push_back(std::move(panel));
            break;
        }
        case PanelFormat::kReplicateColumn: {
            std::size_t start = 0;
            while (start < data_rows) {
                std::size_t stop = start + 1;
                while (stop < data_rows && rep_ids[stop] == rep_ids[start]) ++stop;
                for (const auto& prev : panels) {
                    if (prev.replicate_id && *prev.replicate_id == rep_ids[start]) {
                        cell_error(path, raw.line_numbers[data_begin + start], 1,
                                   "replicate id " + std::to_string(rep_ids[start]) +
                                       " appears in two separate runs");
                    }
                }
                TimeSeriesPanel panel;
                panel.values = values.middleRows(static_cast<Eigen::Index>(start),
                                                 static_cast<Eigen::Index>(stop - start));
                panel.replicate_id = static_cast<int>(rep_ids[start]);
                panel.series_names = names;
                panels.push_back(std::move(panel));
                start = stop;
            }
            break;
        }
        case PanelFormat::kBlocks: {
            if (spec.block_length < 2) {
                throw std::invalid_argument("load_panel: blocks format needs block_length >= 2");
            }
            if (data_rows % static_cast<std::size_t>(spec.block_length) != 0) {
                throw std::runtime_error(
                    "load_panel: " + path.string() + ": " + std::to_string(data_rows) +
                    " data rows is not a multiple of block length " +
                    std::to_string(spec.block_length));
            }
            const std::size_t blocks = data_rows / static_cast<std::size_t>(spec.block_length);
            for (std::size_t b = 0; b < blocks; ++b) {
                TimeSeriesPanel panel;
                panel.values =
                    values.middleRows(static_cast<Eigen::Index>(b) * spec.block_length,
                                      spec.block_length);
                panel.replicate_id = static_cast<int>(b);
                panel.series_names = names;
                panels.push_back(std::move(panel));
            }
            break;
        }
    }
    return panels;
}

}  // namespace kangc
