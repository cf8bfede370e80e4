#include <doctest.h>

#include <kangc/granger.hpp>
#include <kangc/rng.hpp>

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>
#include <vector>

using namespace kangc;

namespace {

TimeSeriesPanel make_panel(int rows, int cols, std::uint64_t seed) {
    Rng rng(seed);
    TimeSeriesPanel p;
    p.values.resize(rows, cols);
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c) p.values(r, c) = rng.normal();
    return p;
}

FitOptions tiny_fit_options(std::uint64_t seed) {
    FitOptions opts;
    opts.lag = 2;
    opts.hidden = {4};
    opts.lambda = 0.05;
    opts.gamma = 0.05;
    opts.train.max_epochs = 25;
    opts.train.seed = seed;
    return opts;
}

}  // namespace

TEST_CASE("build_windowed lays out lags exactly as documented") {
    TimeSeriesPanel panel;
    panel.values.resize(5, 2);
    // Series 0: 10,20,30,40,50; series 1: 1,2,3,4,5.
    panel.values << 10, 1, 20, 2, 30, 3, 40, 4, 50, 5;
    const WindowedDataset w = build_windowed(panel, 2);

    REQUIRE(w.inputs.rows() == 3);
    REQUIRE(w.inputs.cols() == 4);
    REQUIRE(w.targets.rows() == 3);
    REQUIRE(w.targets.cols() == 2);
    CHECK(w.lag == 2);
    CHECK(w.groups.num_series == 2);
    CHECK(w.groups.num_lags == 2);

    // Row 0 predicts t=2: lag-1 block (x_1) then lag-2 block (x_0).
    Eigen::RowVector4d want0;
    want0 << 20, 2, 10, 1;
    CHECK(w.inputs.row(0) == want0);
    CHECK(w.targets(0, 0) == 30);
    CHECK(w.targets(0, 1) == 3);

    // Row 2 predicts t=4.
    Eigen::RowVector4d want2;
    want2 << 40, 4, 30, 3;
    CHECK(w.inputs.row(2) == want2);
    CHECK(w.targets(2, 0) == 50);
    CHECK(w.targets(2, 1) == 5);

    // Column index convention: (k-1)*p + j.
    for (int k = 1; k <= 2; ++k) {
        for (int j = 0; j < 2; ++j) {
            CHECK(w.inputs(0, (k - 1) * 2 + j) == panel.values(2 - k, j));
        }
    }
}

TEST_CASE("multi-replicate windows never span panel boundaries") {
    std::vector<TimeSeriesPanel> panels = {make_panel(6, 2, 1), make_panel(9, 2, 2)};
    const WindowedDataset w = build_windowed(panels, 3);
    REQUIRE(w.inputs.rows() == (6 - 3) + (9 - 3));
    REQUIRE(w.replicate_row_counts.size() == 2);
    CHECK(w.replicate_row_counts[0] == 3);
    CHECK(w.replicate_row_counts[1] == 6);

    const WindowedDataset w0 = build_windowed(panels[0], 3);
    const WindowedDataset w1 = build_windowed(panels[1], 3);
    CHECK(w.inputs.topRows(3) == w0.inputs);
    CHECK(w.inputs.bottomRows(6) == w1.inputs);
    CHECK(w.targets.topRows(3) == w0.targets);
}

TEST_CASE("build_windowed validates the lag") {
    const TimeSeriesPanel panel = make_panel(5, 2, 3);
    CHECK_THROWS_AS(build_windowed(panel, 0), std::invalid_argument);
    CHECK_THROWS_AS(build_windowed(panel, 5), std::invalid_argument);
    CHECK_NOTHROW(build_windowed(panel, 4));
}

TEST_CASE("zscore_panel standardizes each series") {
    TimeSeriesPanel panel = make_panel(200, 3, 4);
    panel.values.col(1).array() = panel.values.col(1).array() * 7.0 + 100.0;
    panel.values.col(2).setConstant(5.0);
    const TimeSeriesPanel z = zscore_panel(panel);
    for (int c = 0; c < 2; ++c) {
        const double mean = z.values.col(c).mean();
        const double var =
            (z.values.col(c).array() - mean).square().sum() / static_cast<double>(z.values.rows());
        CHECK(std::abs(mean) < 1e-12);
        CHECK(var == doctest::Approx(1.0).epsilon(1e-10));
    }
    CHECK(z.values.col(2).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("validate_panel rejects malformed panels") {
    TimeSeriesPanel ok = make_panel(4, 2, 5);
    CHECK_NOTHROW(validate_panel(ok));

    TimeSeriesPanel tiny = make_panel(1, 2, 6);
    CHECK_THROWS_AS(validate_panel(tiny), std::invalid_argument);

    TimeSeriesPanel narrow = make_panel(4, 1, 7);
    CHECK_THROWS_AS(validate_panel(narrow), std::invalid_argument);

    TimeSeriesPanel nan = make_panel(4, 2, 8);
    nan.values(2, 1) = std::nan("");
    CHECK_THROWS_AS(validate_panel(nan), std::invalid_argument);

    TimeSeriesPanel names = make_panel(4, 2, 9);
    names.series_names = {"a"};
    CHECK_THROWS_AS(validate_panel(names), std::invalid_argument);
}

TEST_CASE("extract_gc_matrix rows are the models' group norms") {
    const GroupIndex groups{3, 2};
    InitOptions opts;
    std::vector<KanNetwork> models;
    for (int i = 0; i < 3; ++i) {
        models.push_back(init_network({6, 4, 1}, opts, 100 + static_cast<std::uint64_t>(i)));
    }
    const Eigen::MatrixXd gc = extract_gc_matrix(models, groups);
    REQUIRE(gc.rows() == 3);
    REQUIRE(gc.cols() == 3);
    for (int i = 0; i < 3; ++i) {
        const Eigen::VectorXd norms = group_norms(models[static_cast<std::size_t>(i)].layers[0],
                                                  groups);
        for (int j = 0; j < 3; ++j) {
            CHECK(gc(i, j) == doctest::Approx(norms(j)).epsilon(1e-14));
        }
    }
}

TEST_CASE("zero first-layer weights give a zero GC matrix") {
    const GroupIndex groups{3, 2};
    std::vector<KanNetwork> models;
    for (int i = 0; i < 3; ++i) {
        KanNetwork net = init_network({6, 4, 1}, InitOptions{}, 7);
        net.layers[0].base_weights.setZero();
        models.push_back(std::move(net));
    }
    const Eigen::MatrixXd gc = extract_gc_matrix(models, groups);
    CHECK(gc.norm() == 0.0);
}

TEST_CASE("lag_profile sums to the group norm in quadrature") {
    const GroupIndex groups{4, 3};
    const KanNetwork model = init_network({12, 5, 1}, InitOptions{}, 42);
    const Eigen::MatrixXd profile = lag_profile(model, groups);
    REQUIRE(profile.rows() == 4);
    REQUIRE(profile.cols() == 3);
    const Eigen::VectorXd norms = group_norms(model.layers[0], groups);
    for (int j = 0; j < 4; ++j) {
        CHECK(std::sqrt(profile.row(j).squaredNorm()) ==
              doctest::Approx(norms(j)).epsilon(1e-10));
    }
    // Entry (j, k) is the norm of the single column for series j, lag k+1.
    for (int j = 0; j < 4; ++j) {
        for (int k = 0; k < 3; ++k) {
            const int col = groups.column(j, k);
            CHECK(profile(j, k) ==
                  doctest::Approx(model.layers[0].base_weights.col(col).norm()).epsilon(1e-12));
        }
    }
}

TEST_CASE("fit_gckan output shapes and loss bookkeeping") {
    const TimeSeriesPanel panel = make_panel(40, 3, 11);
    const FitOptions opts = tiny_fit_options(1);
    const GcResult res = fit_gckan(panel, opts);
    REQUIRE(res.gc.rows() == 3);
    REQUIRE(res.gc.cols() == 3);
    REQUIRE(res.per_component.size() == 3);
    REQUIRE(res.models.size() == 3);
    REQUIRE(res.lag_profiles.size() == 3);
    CHECK(res.lambda_used == 0.05);
    CHECK(res.gamma_used == 0.05);
    CHECK((res.gc.array() >= 0.0).all());

    LossBreakdown sum;
    for (const auto& l : res.per_component) sum += l;
    CHECK(res.aggregate.total == doctest::Approx(sum.total).epsilon(1e-12));

    for (int i = 0; i < 3; ++i) {
        const Eigen::MatrixXd& prof = res.lag_profiles[static_cast<std::size_t>(i)];
        REQUIRE(prof.rows() == 3);
        REQUIRE(prof.cols() == 2);
        for (int j = 0; j < 3; ++j) {
            CHECK(std::sqrt(prof.row(j).squaredNorm()) ==
                  doctest::Approx(res.gc(i, j)).epsilon(1e-10));
        }
    }
}

TEST_CASE("fit_gckan does not depend on the worker count") {
    const TimeSeriesPanel panel = make_panel(36, 3, 21);
    FitOptions opts = tiny_fit_options(5);
    opts.workers = 1;
    const GcResult a = fit_gckan(panel, opts);
    opts.workers = 3;
    const GcResult b = fit_gckan(panel, opts);
    opts.workers = 8;
    const GcResult c = fit_gckan(panel, opts);
    CHECK(a.gc == b.gc);
    CHECK(a.gc == c.gc);
    CHECK(a.aggregate.total == b.aggregate.total);
}

TEST_CASE("fit_gckan is deterministic and seed-sensitive") {
    const TimeSeriesPanel panel = make_panel(36, 3, 22);
    const GcResult a = fit_gckan(panel, tiny_fit_options(5));
    const GcResult b = fit_gckan(panel, tiny_fit_options(5));
    const GcResult c = fit_gckan(panel, tiny_fit_options(6));
    CHECK(a.gc == b.gc);
    CHECK(a.gc != c.gc);
}

TEST_CASE("sweep picks lambda from the grid deterministically") {
    const TimeSeriesPanel panel = make_panel(60, 2, 23);
    FitOptions opts = tiny_fit_options(3);
    opts.lambda.reset();
    opts.gamma.reset();
    opts.sweep = {0.01, 0.1};
    const GcResult a = fit_gckan(panel, opts);
    const GcResult b = fit_gckan(panel, opts);
    CHECK((a.lambda_used == 0.01 || a.lambda_used == 0.1));
    CHECK(a.gamma_used == a.lambda_used);
    CHECK(a.lambda_used == b.lambda_used);
    CHECK(a.gc == b.gc);
}

TEST_CASE("fit_gckan rejects bad options") {
    const TimeSeriesPanel panel = make_panel(30, 2, 24);
    FitOptions opts = tiny_fit_options(1);
    opts.lag = 0;
    CHECK_THROWS_AS(fit_gckan(panel, opts), std::invalid_argument);

    opts = tiny_fit_options(1);
    opts.hidden = {};
    CHECK_THROWS_AS(fit_gckan(panel, opts), std::invalid_argument);

    opts = tiny_fit_options(1);
    opts.lambda.reset();
    opts.sweep = {};
    CHECK_THROWS_AS(fit_gckan(panel, opts), std::invalid_argument);

    std::vector<TimeSeriesPanel> none;
    CHECK_THROWS_AS(fit_gckan(none, tiny_fit_options(1)), std::invalid_argument);
}

TEST_CASE("a strong linear driver is detected against independent noise") {
    // Series 1 follows series 0; series 2 is independent noise. The GC score
    // for the true edge should dominate the false ones into the same target.
    Rng rng(31);
    const int T = 300;
    TimeSeriesPanel panel;
    panel.values.resize(T, 3);
    panel.values(0, 0) = rng.normal();
    panel.values(0, 1) = rng.normal();
    panel.values(0, 2) = rng.normal();
    for (int t = 1; t < T; ++t) {
        panel.values(t, 0) = 0.9 * panel.values(t - 1, 0) + 0.3 * rng.normal();
        panel.values(t, 1) = 0.8 * panel.values(t - 1, 0) + 0.1 * rng.normal();
        panel.values(t, 2) = rng.normal();
    }
    FitOptions opts;
    opts.lag = 2;
    opts.hidden = {8};
    opts.lambda = 0.02;
    opts.gamma = 0.02;
    opts.train.max_epochs = 250;
    opts.train.seed = 8;
    const GcResult res = fit_gckan(panel, opts);
    CHECK(res.gc(1, 0) > 2.0 * res.gc(1, 2));
}
