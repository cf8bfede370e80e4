#include <doctest.h>

#include <kangc/csvio.hpp>
#include <kangc/datagen.hpp>
#include <kangc/rng.hpp>

#include <Eigen/Dense>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

using namespace kangc;
namespace fs = std::filesystem;

namespace {

fs::path temp_file(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("kangc_datagen_" + name);
    std::error_code ec;
    fs::remove(p, ec);
    return p;
}

void write_text(const fs::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::binary);
    out << text;
}

// Euler integration with many micro-steps, as an independent reference.
Eigen::VectorXd euler_many(const Eigen::VectorXd& state, double forcing, double dt, int steps) {
    Eigen::VectorXd x = state;
    const double h = dt / steps;
    for (int s = 0; s < steps; ++s) x += h * lorenz96_derivative(x, forcing);
    return x;
}

}  // namespace

TEST_CASE("lorenz96_derivative closed-form cases") {
    const Eigen::VectorXd zeros = Eigen::VectorXd::Zero(6);
    const Eigen::VectorXd d0 = lorenz96_derivative(zeros, 8.0);
    for (int i = 0; i < 6; ++i) CHECK(d0(i) == 8.0);

    // At x = 1: (1 - 1) * 1 - 1 + F = F - 1 for every component.
    const Eigen::VectorXd ones = Eigen::VectorXd::Ones(6);
    const Eigen::VectorXd d1 = lorenz96_derivative(ones, 8.0);
    for (int i = 0; i < 6; ++i) CHECK(d1(i) == doctest::Approx(7.0).epsilon(1e-14));
}

TEST_CASE("lorenz96_derivative matches a scalar loop with explicit wrapping") {
    Rng rng(51);
    Eigen::VectorXd x(5);
    for (int i = 0; i < 5; ++i) x(i) = rng.normal();
    const double f = 3.5;
    const Eigen::VectorXd got = lorenz96_derivative(x, f);
    auto wrap = [](int i) { return ((i % 5) + 5) % 5; };
    for (int i = 0; i < 5; ++i) {
        const double want = (x(wrap(i + 1)) - x(wrap(i - 2))) * x(wrap(i - 1)) - x(i) + f;
        CHECK(got(i) == doctest::Approx(want).epsilon(1e-14));
    }
}

TEST_CASE("lorenz96_derivative requires p >= 4") {
    CHECK_THROWS_AS(lorenz96_derivative(Eigen::VectorXd::Zero(3), 8.0), std::invalid_argument);
    CHECK_NOTHROW(lorenz96_derivative(Eigen::VectorXd::Zero(4), 8.0));
}

TEST_CASE("rk4_step agrees with refined Euler integration") {
    Rng rng(52);
    Eigen::VectorXd x(6);
    for (int i = 0; i < 6; ++i) x(i) = rng.uniform(-2.0, 2.0);
    const Eigen::VectorXd got = rk4_step(x, 8.0, 0.01);
    const Eigen::VectorXd want = euler_many(x, 8.0, 0.01, 10000);
    CHECK((got - want).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("rk4 measured convergence order is about 4") {
    Rng rng(53);
    Eigen::VectorXd x(8);
    for (int i = 0; i < 8; ++i) x(i) = rng.uniform(-3.0, 3.0);
    const double f = 8.0;

    // Reference solution over one interval via very fine RK4 substeps.
    const double dt = 0.1;
    auto integrate = [&](double h, int steps) {
        Eigen::VectorXd s = x;
        for (int i = 0; i < steps; ++i) s = rk4_step(s, f, h);
        return s;
    };
    const Eigen::VectorXd ref = integrate(dt / 1024, 1024);
    const double e1 = (integrate(dt, 1) - ref).norm();
    const double e2 = (integrate(dt / 2, 2) - ref).norm();
    const double order = std::log2(e1 / e2);
    CHECK(order > 3.5);
    CHECK(order < 4.5);
}

TEST_CASE("simulate_lorenz96 shapes, truth, determinism, boundedness") {
    Lorenz96Config cfg;
    cfg.p = 10;
    cfg.forcing = 10.0;
    cfg.length = 1000;
    cfg.seed = 77;
    const LorenzDataset ds = simulate_lorenz96(cfg);
    REQUIRE(ds.panel.values.rows() == 1000);
    REQUIRE(ds.panel.values.cols() == 10);
    REQUIRE(ds.truth.adjacency.rows() == 10);

    // Row i has ones exactly at {i-2, i-1, i, i+1} mod p.
    for (int i = 0; i < 10; ++i) {
        int count = 0;
        for (int j = 0; j < 10; ++j) count += ds.truth.adjacency(i, j);
        CHECK(count == 4);
        for (int off : {-2, -1, 0, 1}) {
            const int j = ((i + off) % 10 + 10) % 10;
            CHECK(ds.truth.adjacency(i, j) == 1);
        }
    }

    // The attractor for F = 10 stays well inside +-20.
    CHECK(ds.panel.values.cwiseAbs().maxCoeff() < 20.0);

    const LorenzDataset again = simulate_lorenz96(cfg);
    CHECK(again.panel.values == ds.panel.values);

    Lorenz96Config other = cfg;
    other.seed = 78;
    CHECK(simulate_lorenz96(other).panel.values != ds.panel.values);

    Lorenz96Config noiseless = cfg;
    noiseless.obs_noise_std = 0.0;
    noiseless.length = 50;
    const LorenzDataset clean = simulate_lorenz96(noiseless);
    // Consecutive recorded states are one RK4 step apart.
    const Eigen::VectorXd step =
        rk4_step(clean.panel.values.row(0).transpose(), cfg.forcing, cfg.dt);
    CHECK((clean.panel.values.row(1).transpose() - step).norm() == 0.0);
}

TEST_CASE("simulate_lorenz96 validates its config") {
    Lorenz96Config cfg;
    cfg.p = 3;
    CHECK_THROWS_AS(simulate_lorenz96(cfg), std::invalid_argument);
    cfg = {};
    cfg.length = 0;
    CHECK_THROWS_AS(simulate_lorenz96(cfg), std::invalid_argument);
    cfg = {};
    cfg.dt = 0.0;
    CHECK_THROWS_AS(simulate_lorenz96(cfg), std::invalid_argument);
}

TEST_CASE("generate_var support size, diagonal, and rescaled magnitudes") {
    VarConfig cfg;
    cfg.p = 10;
    cfg.sparsity = 0.2;
    cfg.lag = 3;
    cfg.seed = 5;
    const VarDataset ds = generate_var(cfg);

    int ones = 0;
    for (int i = 0; i < 10; ++i) {
        CHECK(ds.truth.adjacency(i, i) == 1);
        for (int j = 0; j < 10; ++j) ones += ds.truth.adjacency(i, j);
    }
    CHECK(ones == 20);  // round(0.2 * 100)

    REQUIRE(ds.coefficients.size() == 3);
    // Coefficients are +-coeff_scale rescaled by s^m; magnitudes are shared
    // within each lag matrix.
    const double s1 = ds.coefficients[0].cwiseAbs().maxCoeff() / cfg.coeff_scale;
    for (std::size_t m = 0; m < 3; ++m) {
        const auto& a = ds.coefficients[m];
        const double mag = cfg.coeff_scale * std::pow(s1, static_cast<double>(m + 1));
        for (int i = 0; i < 10; ++i) {
            for (int j = 0; j < 10; ++j) {
                if (a(i, j) != 0.0) {
                    CHECK(std::abs(a(i, j)) == doctest::Approx(mag).epsilon(1e-12));
                    CHECK(ds.truth.adjacency(i, j) == 1);
                }
            }
        }
    }

    // Union support equals the truth graph exactly.
    Eigen::MatrixXi support = Eigen::MatrixXi::Zero(10, 10);
    for (const auto& a : ds.coefficients) {
        for (int i = 0; i < 10; ++i) {
            for (int j = 0; j < 10; ++j) {
                if (a(i, j) != 0.0) support(i, j) = 1;
            }
        }
    }
    CHECK(support == ds.truth.adjacency);

    CHECK(ds.panel.values.rows() == cfg.length);
    CHECK(ds.panel.values.cols() == 10);
}

TEST_CASE("generate_var hits the spectral target exactly") {
    for (std::uint64_t seed : {1ULL, 2ULL, 3ULL}) {
        VarConfig cfg;
        cfg.seed = seed;
        const VarDataset ds = generate_var(cfg);
        CHECK(std::abs(var_spectral_radius(ds.coefficients) - cfg.spectral_target) < 1e-6);
    }
}

TEST_CASE("generate_var single_lag concentrates all coefficients on one lag") {
    VarConfig cfg;
    cfg.lag = 4;
    cfg.single_lag = 2;
    cfg.seed = 9;
    const VarDataset ds = generate_var(cfg);
    CHECK(ds.coefficients[0].cwiseAbs().maxCoeff() == 0.0);
    CHECK(ds.coefficients[1].cwiseAbs().maxCoeff() > 0.0);
    CHECK(ds.coefficients[2].cwiseAbs().maxCoeff() == 0.0);
    CHECK(ds.coefficients[3].cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("var_spectral_radius on a diagonal AR(1) is the coefficient") {
    std::vector<Eigen::MatrixXd> a = {Eigen::MatrixXd::Zero(3, 3)};
    a[0].diagonal() << 0.5, -0.8, 0.2;
    CHECK(var_spectral_radius(a) == doctest::Approx(0.8).epsilon(1e-12));

    // Two-lag scalar example: companion eigenvalues of x_t = 0.5 x_{t-1} + 0.24 x_{t-2}
    // are 0.8 and -0.3.
    std::vector<Eigen::MatrixXd> b = {Eigen::MatrixXd::Constant(1, 1, 0.5),
                                      Eigen::MatrixXd::Constant(1, 1, 0.24)};
    CHECK(var_spectral_radius(b) == doctest::Approx(0.8).epsilon(1e-12));
}

TEST_CASE("simulate_var reproduces a hand-built AR(1)") {
    std::vector<Eigen::MatrixXd> a = {Eigen::MatrixXd::Zero(2, 2)};
    a[0] << 0.9, 0.0, 0.3, 0.5;
    const TimeSeriesPanel panel = simulate_var(a, 200, 1.0, 0, 31);
    REQUIRE(panel.values.rows() == 200);
    REQUIRE(panel.values.cols() == 2);

    // With burn_in = 0 the recursion is directly checkable once the noise is
    // recovered from series residuals... instead simulate twice and check
    // determinism plus the linear relation via regression residuals.
    const TimeSeriesPanel again = simulate_var(a, 200, 1.0, 0, 31);
    CHECK(panel.values == again.values);

    // Least-squares estimate of the AR matrix should be near the truth.
    const int T = 200;
    Eigen::MatrixXd x = panel.values.topRows(T - 1);
    Eigen::MatrixXd y = panel.values.bottomRows(T - 1);
    const Eigen::MatrixXd est =
        (x.transpose() * x).ldlt().solve(x.transpose() * y).transpose();
    CHECK((est - a[0]).cwiseAbs().maxCoeff() < 0.2);
}

TEST_CASE("generated VAR paths are stationary in practice") {
    VarConfig cfg;
    cfg.length = 2000;
    for (std::uint64_t seed : {11ULL, 12ULL, 13ULL}) {
        cfg.seed = seed;
        const VarDataset ds = generate_var(cfg);
        const auto& v = ds.panel.values;
        const int q = 500;
        const double early = v.middleRows(q, q).array().square().mean();
        const double late = v.bottomRows(q).array().square().mean();
        CHECK(late < 4.0 * early);
        CHECK(early < 4.0 * late);
        CHECK(v.cwiseAbs().maxCoeff() < 100.0);
    }
}

TEST_CASE("generate_var validates its config") {
    VarConfig cfg;
    cfg.sparsity = 0.05;  // less than the diagonal minimum
    CHECK_THROWS_AS(generate_var(cfg), std::invalid_argument);
    cfg = {};
    cfg.sparsity = 1.5;
    CHECK_THROWS_AS(generate_var(cfg), std::invalid_argument);
    cfg = {};
    cfg.single_lag = 7;  // beyond cfg.lag
    CHECK_THROWS_AS(generate_var(cfg), std::invalid_argument);
    cfg = {};
    cfg.spectral_target = 1.2;
    CHECK_THROWS_AS(generate_var(cfg), std::invalid_argument);
}

TEST_CASE("load_panel reads a single headered panel") {
    const fs::path p = temp_file("single.csv");
    write_text(p, "a,b,c\n1,2,3\n4,5,6\n7,8,9\n");
    const auto panels = load_panel(p, LoadSpec{});
    REQUIRE(panels.size() == 1);
    REQUIRE(panels[0].values.rows() == 3);
    REQUIRE(panels[0].values.cols() == 3);
    CHECK(panels[0].series_names == std::vector<std::string>{"a", "b", "c"});
    CHECK(panels[0].values(1, 2) == 6.0);
}

TEST_CASE("load_panel accepts headerless numeric files and CRLF") {
    const fs::path p = temp_file("noheader.csv");
    write_text(p, "1.5,2\r\n-3,4e2\r\n");
    const auto panels = load_panel(p, LoadSpec{});
    REQUIRE(panels.size() == 1);
    REQUIRE(panels[0].values.rows() == 2);
    CHECK(panels[0].series_names == std::vector<std::string>{"x1", "x2"});
    CHECK(panels[0].values(1, 1) == 400.0);
}

TEST_CASE("load_panel splits replicate-column files on id runs") {
    const fs::path p = temp_file("reps.csv");
    write_text(p, "rep,x,y\n1,1,2\n1,3,4\n1,5,6\n2,7,8\n2,9,10\n");
    LoadSpec spec;
    spec.format = PanelFormat::kReplicateColumn;
    const auto panels = load_panel(p, spec);
    REQUIRE(panels.size() == 2);
    CHECK(panels[0].values.rows() == 3);
    CHECK(panels[1].values.rows() == 2);
    CHECK(panels[0].replicate_id == 1);
    CHECK(panels[1].replicate_id == 2);
    CHECK(panels[0].series_names == std::vector<std::string>{"x", "y"});
    CHECK(panels[1].values(1, 1) == 10.0);

    const fs::path bad = temp_file("reps_bad.csv");
    write_text(bad, "rep,x,y\n1,1,2\n2,3,4\n1,5,6\n");
    CHECK_THROWS_WITH_AS(static_cast<void>(load_panel(bad, spec)),
                         doctest::Contains("replicate"), std::runtime_error);
}

TEST_CASE("load_panel splits fixed-length blocks") {
    // Shape mirroring the gene-network fixtures: R replicates of T x p each.
    const int reps = 46, T = 21, p = 100;
    const fs::path path = temp_file("blocks.csv");
    std::string text;
    for (int c = 0; c < p; ++c) {
        text += "g" + std::to_string(c);
        text += (c + 1 < p) ? ',' : '\n';
    }
    Rng rng(61);
    for (int r = 0; r < reps * T; ++r) {
        for (int c = 0; c < p; ++c) {
            text += std::to_string(rng.uniform01());
            text += (c + 1 < p) ? ',' : '\n';
        }
    }
    write_text(path, text);

    LoadSpec spec;
    spec.format = PanelFormat::kBlocks;
    spec.block_length = T;
    const auto panels = load_panel(path, spec);
    REQUIRE(panels.size() == 46);
    for (const auto& panel : panels) {
        REQUIRE(panel.values.rows() == 21);
        REQUIRE(panel.values.cols() == 100);
    }
    CHECK(panels[0].series_names[0] == "g0");
    CHECK(panels[0].replicate_id == 0);
    CHECK(panels[45].replicate_id == 45);

    LoadSpec wrong = spec;
    wrong.block_length = 20;  // 966 rows do not divide evenly
    CHECK_THROWS_AS(static_cast<void>(load_panel(path, wrong)), std::runtime_error);
}

TEST_CASE("load_panel error messages carry the 1-based location") {
    const fs::path ragged = temp_file("ragged.csv");
    write_text(ragged, "a,b\n1,2\n3\n");
    try {
        load_panel(ragged, LoadSpec{});
        FAIL("expected a throw");
    } catch (const std::runtime_error& e) {
        const std::string msg = e.what();
        CHECK(msg.find("row 3") != std::string::npos);
    }

    const fs::path bad_cell = temp_file("badcell.csv");
    write_text(bad_cell, "a,b\n1,2\n3,oops\n");
    try {
        load_panel(bad_cell, LoadSpec{});
        FAIL("expected a throw");
    } catch (const std::runtime_error& e) {
        const std::string msg = e.what();
        CHECK(msg.find("row 3") != std::string::npos);
        CHECK(msg.find("column 2") != std::string::npos);
    }

    const fs::path empty = temp_file("empty.csv");
    write_text(empty, "");
    CHECK_THROWS_AS(static_cast<void>(load_panel(empty, LoadSpec{})), std::runtime_error);

    CHECK_THROWS_AS(static_cast<void>(load_panel(temp_file("missing.csv"), LoadSpec{})),
                    std::runtime_error);

    const fs::path nonfinite = temp_file("nan.csv");
    write_text(nonfinite, "a,b\n1,nan\n");
    CHECK_THROWS_AS(static_cast<void>(load_panel(nonfinite, LoadSpec{})), std::runtime_error);
}
