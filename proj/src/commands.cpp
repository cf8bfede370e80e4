#include "kangc/commands.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <iostream>
#include <map>
#include <nlohmann/json.hpp>
#include <sstream>
#include <stdexcept>

#include "kangc/csvio.hpp"
#include "kangc/datagen.hpp"
#include "kangc/evalmetrics.hpp"
#include "kangc/fusion.hpp"
#include "kangc/rng.hpp"

namespace kangc {

namespace {

using ojson = nlohmann::ordered_json;

constexpr std::uint64_t kPanelSeedTag = 0x70616eULL;  // replicate simulation streams
constexpr std::uint64_t kFitSeedTag = 0x666974ULL;    // per-fit training streams

std::string index_name(const char* stem, int index) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%s_%03d.csv", stem, index);
    return buf;
}

std::string utc_now() {
    const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

struct MaterializedData {
    std::vector<TimeSeriesPanel> panels;
    std::optional<Eigen::MatrixXi> truth;
    std::vector<Eigen::MatrixXd> var_coefficients;
};

MaterializedData materialize(const DatasetSpec& ds, std::uint64_t seed) {
    MaterializedData data;
    switch (ds.kind) {
        case DatasetKind::kLorenz96: {
            for (int r = 0; r < ds.replicates; ++r) {
                Lorenz96Config cfg = ds.lorenz;
                cfg.seed = derive_seed(seed, kPanelSeedTag, static_cast<std::uint64_t>(r));
                LorenzDataset one = simulate_lorenz96(cfg);
                one.panel.replicate_id = r;
                if (r == 0) data.truth = one.truth.adjacency;
                data.panels.push_back(std::move(one.panel));
            }
            break;
        }
        case DatasetKind::kVar: {
            VarConfig cfg = ds.var;
            cfg.seed = seed;
            VarDataset base = generate_var(cfg);
            data.truth = base.truth.adjacency;
            data.var_coefficients = base.coefficients;
            base.panel.replicate_id = 0;
            data.panels.push_back(std::move(base.panel));
            for (int r = 1; r < ds.replicates; ++r) {
                TimeSeriesPanel panel = simulate_var(
                    data.var_coefficients, cfg.length, cfg.noise_std, cfg.burn_in,
                    derive_seed(seed, kPanelSeedTag, static_cast<std::uint64_t>(r)));
                panel.replicate_id = r;
                data.panels.push_back(std::move(panel));
            }
            break;
        }
        case DatasetKind::kFiles: {
            for (const auto& path : ds.files.panels) {
                auto loaded = load_panel(path, ds.files.load);
                for (auto& panel : loaded) {
                    if (!panel.replicate_id) {
                        panel.replicate_id = static_cast<int>(data.panels.size());
                    }
                    data.panels.push_back(std::move(panel));
                }
            }
            if (ds.files.truth) data.truth = read_truth_csv(*ds.files.truth);
            break;
        }
    }
    for (const auto& panel : data.panels) validate_panel(panel);
    return data;
}

std::string dataset_label(const DatasetSpec& ds) {
    std::ostringstream out;
    switch (ds.kind) {
        case DatasetKind::kLorenz96:
            out << "lorenz96 p=" << ds.lorenz.p << " F=" << ds.lorenz.forcing
                << " T=" << ds.lorenz.length << " R=" << ds.replicates;
            break;
        case DatasetKind::kVar:
            out << "var p=" << ds.var.p << " T=" << ds.var.length << " lag=" << ds.var.lag
                << " sparsity=" << ds.var.sparsity << " R=" << ds.replicates;
            break;
        case DatasetKind::kFiles:
            out << "files n=" << ds.files.panels.size();
            break;
    }
    return out.str();
}

ojson to_json(const LossBreakdown& l) {
    return ojson{{"predict", l.predict},
                 {"sparsity", l.sparsity},
                 {"ridge", l.ridge},
                 {"total", l.total}};
}

ojson to_json(const ScoreSummary& s) {
    return ojson{{"mean", s.mean}, {"std", s.std_dev}, {"n", s.n}, {"values", s.values}};
}

const char* branch_name(FusionBranch b) {
    switch (b) {
        case FusionBranch::kOriginal: return "original";
        case FusionBranch::kReversed: return "reversed";
        case FusionBranch::kElementwise: return "elementwise";
    }
    return "?";
}

/// Writes files under out_dir and records digests; on destruction without
/// commit() every written file is removed.
class OutputSet {
  public:
    explicit OutputSet(std::filesystem::path dir) : dir_(std::move(dir)) {
        std::filesystem::create_directories(dir_);
    }
    ~OutputSet() {
        if (committed_) return;
        for (const auto& name : names_) {
            std::error_code ec;
            std::filesystem::remove(dir_ / name, ec);
        }
    }
    const std::filesystem::path& dir() const { return dir_; }
    std::filesystem::path path_of(const std::string& name) const { return dir_ / name; }
    void record(const std::string& name) { names_.push_back(name); }
    ojson digests() {
        ojson out;
        std::vector<std::string> sorted = names_;
        std::sort(sorted.begin(), sorted.end());
        for (const auto& name : sorted) out[name] = file_digest(dir_ / name);
        return out;
    }
    void write_manifest(const ojson& manifest) {
        std::ofstream out(dir_ / "manifest.json", std::ios::binary);
        if (!out) throw std::runtime_error("cannot write " + (dir_ / "manifest.json").string());
        out << manifest.dump(2) << '\n';
        out.flush();
        if (!out) throw std::runtime_error("write failed: " + (dir_ / "manifest.json").string());
    }
    void commit() { committed_ = true; }

  private:
    std::filesystem::path dir_;
    std::vector<std::string> names_;
    bool committed_ = false;
};

ojson manifest_header(const char* command, const RunConfig& cfg) {
    ojson m;
    m["artifact"] = "kangc";
    m["version"] = kVersion;
    m["command"] = command;
    m["created_utc"] = utc_now();
    m["versions"] = ojson{{"compiler", __VERSION__},
                          {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." +
                                        std::to_string(EIGEN_MAJOR_VERSION) + "." +
                                        std::to_string(EIGEN_MINOR_VERSION)}};
    m["dataset_label"] = dataset_label(cfg.dataset);
    m["config"] = ojson::parse(config_to_json(cfg));
    return m;
}

}  // namespace

void cmd_generate(const RunConfig& cfg) {
    if (cfg.dataset.kind == DatasetKind::kFiles) {
        throw std::invalid_argument("generate: dataset.kind must be a generator, not \"files\"");
    }
    const auto start = std::chrono::steady_clock::now();
    const MaterializedData data = materialize(cfg.dataset, cfg.seed);

    OutputSet out(cfg.out_dir);
    for (std::size_t r = 0; r < data.panels.size(); ++r) {
        const std::string name = index_name("panel", static_cast<int>(r));
        write_panel_csv(out.path_of(name), data.panels[r]);
        out.record(name);
    }
    write_truth_csv(out.path_of("truth.csv"), *data.truth);
    out.record("truth.csv");
    for (std::size_t m = 0; m < data.var_coefficients.size(); ++m) {
        const std::string name = "A_" + std::to_string(m + 1) + ".csv";
        write_matrix_csv(out.path_of(name), data.var_coefficients[m]);
        out.record(name);
    }

    ojson manifest = manifest_header("generate", cfg);
    manifest["files"] = out.digests();
    manifest["wall_seconds"] =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    out.write_manifest(manifest);
    out.commit();
    std::cout << "generate: wrote " << data.panels.size() << " panel(s) to " << out.dir().string()
              << "\n";
}

void cmd_infer(const RunConfig& cfg) {
    const auto start = std::chrono::steady_clock::now();
    const MaterializedData data = materialize(cfg.dataset, cfg.seed);
    if (data.panels.empty()) throw std::invalid_argument("infer: no input panels");

    std::vector<std::vector<TimeSeriesPanel>> groups;
    if (cfg.replicate_fit == ReplicateFit::kSeparate) {
        for (const auto& panel : data.panels) groups.push_back({panel});
    } else {
        groups.push_back(data.panels);
    }

    OutputSet out(cfg.out_dir);
    ojson fits = ojson::array();
    std::vector<double> auroc_original, auroc_reversed, auroc_fused;
    std::map<std::string, int> branch_counts;

    for (std::size_t f = 0; f < groups.size(); ++f) {
        FitOptions opts = cfg.fit;
        opts.workers = cfg.workers;
        opts.train.seed = derive_seed(cfg.seed, kFitSeedTag, static_cast<std::uint64_t>(f));

        ojson fit_entry;
        fit_entry["fit"] = f;
        const GcResult* original = nullptr;
        InferenceRun run;
        GcResult plain;
        if (cfg.fusion_enabled) {
            run = infer_with_fusion(groups[f], opts, cfg.fusion);
            original = &run.original;
        } else {
            plain = fit_gckan(std::span<const TimeSeriesPanel>(groups[f]), opts);
            original = &plain;
        }

        const std::string g_name = index_name("G", static_cast<int>(f));
        write_matrix_csv(out.path_of(g_name), original->gc);
        out.record(g_name);

        // Row block i holds model i's p x K lag profile; p*p rows total.
        const int p = static_cast<int>(original->gc.rows());
        Eigen::MatrixXd profiles(p * p, cfg.fit.lag);
        for (int i = 0; i < p; ++i) {
            profiles.middleRows(static_cast<Eigen::Index>(i) * p, p) =
                original->lag_profiles[static_cast<std::size_t>(i)];
        }
        const std::string prof_name = index_name("lag_profile", static_cast<int>(f));
        write_matrix_csv(out.path_of(prof_name), profiles);
        out.record(prof_name);

        fit_entry["lambda"] = original->lambda_used;
        fit_entry["gamma"] = original->gamma_used;
        ojson losses;
        losses["original"] = to_json(original->aggregate);
        ojson per_component;
        per_component["original"] = ojson::array();
        for (const auto& l : original->per_component) per_component["original"].push_back(to_json(l));

        if (cfg.fusion_enabled) {
            const std::string rev_name = index_name("G_reversed", static_cast<int>(f));
            write_matrix_csv(out.path_of(rev_name), run.reversed.gc);
            out.record(rev_name);
            const std::string fused_name = index_name("G_fused", static_cast<int>(f));
            write_matrix_csv(out.path_of(fused_name), run.outcome.fused);
            out.record(fused_name);

            losses["reversed"] = to_json(run.reversed.aggregate);
            per_component["reversed"] = ojson::array();
            for (const auto& l : run.reversed.per_component) {
                per_component["reversed"].push_back(to_json(l));
            }
            fit_entry["branch"] = branch_name(run.outcome.branch);
            branch_counts[branch_name(run.outcome.branch)] += 1;
            fit_entry["fusion_losses"] = ojson{
                {"predict_original", run.outcome.losses.predict_original},
                {"predict_reversed", run.outcome.losses.predict_reversed},
                {"sparsity_original", run.outcome.losses.sparsity_original},
                {"sparsity_reversed", run.outcome.losses.sparsity_reversed}};
        }
        fit_entry["losses"] = std::move(losses);
        fit_entry["per_component"] = std::move(per_component);

        if (data.truth) {
            ojson auroc;
            auroc["original"] = gc_auroc(original->gc, *data.truth, cfg.eval);
            auroc_original.push_back(auroc["original"].get<double>());
            if (cfg.fusion_enabled) {
                auroc["reversed"] = gc_auroc(run.reversed.gc, *data.truth, cfg.eval);
                auroc_reversed.push_back(auroc["reversed"].get<double>());
                auroc["fused"] = gc_auroc(run.outcome.fused, *data.truth, cfg.eval);
                auroc_fused.push_back(auroc["fused"].get<double>());
            }
            fit_entry["auroc"] = std::move(auroc);
        }
        fits.push_back(std::move(fit_entry));
    }

    ojson manifest = manifest_header("infer", cfg);
    manifest["fits"] = std::move(fits);
    if (!auroc_original.empty()) {
        manifest["auroc_original"] = to_json(aggregate(auroc_original));
        if (!auroc_fused.empty()) {
            manifest["auroc_reversed"] = to_json(aggregate(auroc_reversed));
            manifest["auroc_fused"] = to_json(aggregate(auroc_fused));
        }
    }
    if (cfg.fusion_enabled) {
        manifest["branches"] = ojson{{"original", branch_counts["original"]},
                                     {"reversed", branch_counts["reversed"]},
                                     {"elementwise", branch_counts["elementwise"]}};
    }
    manifest["files"] = out.digests();
    manifest["wall_seconds"] =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    out.write_manifest(manifest);
    out.commit();

    std::cout << "infer: " << groups.size() << " fit(s) written to " << out.dir().string() << "\n";
    if (!auroc_fused.empty()) {
        const ScoreSummary s = aggregate(auroc_fused);
        std::printf("fused AUROC: %.4f ± %.4f (n=%d)\n", s.mean, s.std_dev, s.n);
    } else if (!auroc_original.empty()) {
        const ScoreSummary s = aggregate(auroc_original);
        std::printf("AUROC: %.4f ± %.4f (n=%d)\n", s.mean, s.std_dev, s.n);
    }
}

void cmd_eval(const std::vector<std::filesystem::path>& gc_files,
              const std::filesystem::path& truth_file, const EvalSpec& spec,
              const std::filesystem::path& out_dir) {
    if (gc_files.empty()) throw std::invalid_argument("eval: no GC matrix files given");
    const Eigen::MatrixXi truth = read_truth_csv(truth_file);

    std::vector<double> values;
    ojson per_file;
    for (const auto& path : gc_files) {
        const Eigen::MatrixXd gc = read_matrix_csv(path);
        if (gc.rows() != truth.rows() || gc.cols() != truth.cols()) {
            throw std::invalid_argument("eval: " + path.string() + " is " +
                                        std::to_string(gc.rows()) + "x" +
                                        std::to_string(gc.cols()) + " but truth is " +
                                        std::to_string(truth.rows()) + "x" +
                                        std::to_string(truth.cols()));
        }
        const double a = gc_auroc(gc, truth, spec);
        values.push_back(a);
        per_file[path.string()] = a;
        std::printf("%s: %.4f\n", path.string().c_str(), a);
    }
    const ScoreSummary s = aggregate(values);
    std::printf("AUROC: %.4f ± %.4f (n=%d)\n", s.mean, s.std_dev, s.n);

    if (!out_dir.empty()) {
        std::filesystem::create_directories(out_dir);
        ojson doc;
        doc["include_diagonal"] = spec.include_diagonal;
        doc["truth"] = truth_file.string();
        doc["per_file"] = std::move(per_file);
        doc["summary"] = to_json(s);
        std::ofstream out(out_dir / "eval.json", std::ios::binary);
        if (!out) throw std::runtime_error("cannot write " + (out_dir / "eval.json").string());
        out << doc.dump(2) << '\n';
    }
}

void cmd_report(const std::filesystem::path& run_dir) {
    if (!std::filesystem::is_directory(run_dir)) {
        throw std::invalid_argument("report: " + run_dir.string() + " is not a directory");
    }
    std::vector<std::filesystem::path> manifests;
    for (const auto& entry : std::filesystem::recursive_directory_iterator(run_dir)) {
        if (entry.is_regular_file() && entry.path().filename() == "manifest.json") {
            manifests.push_back(entry.path());
        }
    }
    std::sort(manifests.begin(), manifests.end());
    if (manifests.empty()) {
        throw std::invalid_argument("report: no manifest.json found under " + run_dir.string());
    }

    struct Row {
        std::string dir, label, auroc, branches;
        int fits = 0;
    };
    std::vector<Row> rows;
    for (const auto& path : manifests) {
        std::ifstream in(path);
        ojson m;
        try {
            m = ojson::parse(in);
        } catch (const ojson::parse_error& e) {
            throw std::runtime_error("report: " + path.string() + ": " + e.what());
        }
        if (m.value("command", "") != "infer") continue;
        Row row;
        row.dir = std::filesystem::relative(path.parent_path(), run_dir).string();
        row.label = m.value("dataset_label", "?");
        row.fits = m.contains("fits") ? static_cast<int>(m["fits"].size()) : 0;
        const char* key = m.contains("auroc_fused") ? "auroc_fused"
                          : m.contains("auroc_original") ? "auroc_original"
                                                         : nullptr;
        if (key != nullptr) {
            char buf[64];
            std::snprintf(buf, sizeof(buf), "%.4f ± %.4f", m[key]["mean"].get<double>(),
                          m[key]["std"].get<double>());
            row.auroc = buf;
        } else {
            row.auroc = "n/a";
        }
        if (m.contains("branches")) {
            const auto& b = m["branches"];
            row.branches = "o=" + std::to_string(b.value("original", 0)) +
                           " r=" + std::to_string(b.value("reversed", 0)) +
                           " e=" + std::to_string(b.value("elementwise", 0));
        } else {
            row.branches = "-";
        }
        rows.push_back(std::move(row));
    }
    if (rows.empty()) {
        throw std::invalid_argument("report: no infer manifests under " + run_dir.string());
    }

    std::size_t w_dir = 3, w_label = 7, w_auroc = 5, w_branch = 8;
    for (const auto& r : rows) {
        w_dir = std::max(w_dir, r.dir.size());
        w_label = std::max(w_label, r.label.size());
        w_auroc = std::max(w_auroc, r.auroc.size());
        w_branch = std::max(w_branch, r.branches.size());
    }
    std::ostringstream table;
    const auto pad = [](const std::string& s, std::size_t w) {
        return s + std::string(w - std::min(w, s.size()), ' ');
    };
    table << "| " << pad("run", w_dir) << " | " << pad("dataset", w_label) << " | fits | "
          << pad("AUROC", w_auroc) << " | " << pad("branches", w_branch) << " |\n";
    table << "|-" << std::string(w_dir, '-') << "-|-" << std::string(w_label, '-') << "-|------|-"
          << std::string(w_auroc, '-') << "-|-" << std::string(w_branch, '-') << "-|\n";
    for (const auto& r : rows) {
        char fits_buf[16];
        std::snprintf(fits_buf, sizeof(fits_buf), "%4d", r.fits);
        table << "| " << pad(r.dir, w_dir) << " | " << pad(r.label, w_label) << " | " << fits_buf
              << " | " << pad(r.auroc, w_auroc) << " | " << pad(r.branches, w_branch) << " |\n";
    }

    std::cout << table.str();
    std::ofstream out(run_dir / "report.md", std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + (run_dir / "report.md").string());
    out << table.str();
}

}  // namespace kangc
