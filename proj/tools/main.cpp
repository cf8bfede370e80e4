#include <CLI11.hpp>
#include <exception>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "kangc/commands.hpp"
#include "kangc/config.hpp"

namespace {

kangc::RunConfig base_config(const std::string& config_path) {
    if (config_path.empty()) {
        return kangc::parse_config(kangc::apply_env_overrides("{}"));
    }
    return kangc::load_config(config_path);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Granger causality inference with spline-edge (KAN) component models"};
    app.set_version_flag("--version", kangc::kVersion);
    app.require_subcommand(1);

    std::string config_path, out_dir;
    std::uint64_t seed = 0;
    int workers = 0;
    bool no_fusion = false, transpose_reversed = false;

    CLI::App* generate = app.add_subcommand("generate", "Write synthetic panels and ground truth");
    generate->add_option("--config", config_path, "JSON run configuration");
    CLI::Option* gen_seed = generate->add_option("--seed", seed, "Override the run seed");
    CLI::Option* gen_out = generate->add_option("--out", out_dir, "Output directory");

    CLI::App* infer = app.add_subcommand("infer", "Infer Granger causality matrices");
    infer->add_option("--config", config_path, "JSON run configuration");
    CLI::Option* inf_seed = infer->add_option("--seed", seed, "Override the run seed");
    CLI::Option* inf_out = infer->add_option("--out", out_dir, "Output directory");
    CLI::Option* inf_workers =
        infer->add_option("--workers", workers, "Concurrent component trainings")
            ->check(CLI::PositiveNumber);
    infer->add_flag("--no-fusion", no_fusion, "Skip the time-reversed fit and fusion");
    infer->add_flag("--transpose-reversed", transpose_reversed,
                    "Fuse against the transpose of the reversed-direction matrix");

    std::string truth_file;
    std::vector<std::string> gc_files;
    bool no_diagonal = false;
    CLI::App* eval = app.add_subcommand("eval", "Score GC matrices against ground truth");
    eval->add_option("--truth", truth_file, "Ground-truth 0/1 CSV")->required();
    eval->add_flag("--no-diagonal", no_diagonal, "Mask the diagonal (gene-network rule)");
    CLI::Option* eval_out = eval->add_option("--out", out_dir, "Directory for eval.json");
    eval->add_option("files", gc_files, "GC matrix CSV files")->required()->expected(-1);

    std::string run_dir;
    CLI::App* report = app.add_subcommand("report", "Summarize manifests into a table");
    report->add_option("dir", run_dir, "Directory containing run manifests")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (generate->parsed() || infer->parsed()) {
            kangc::RunConfig cfg = base_config(config_path);
            const bool is_infer = infer->parsed();
            if ((is_infer ? inf_seed : gen_seed)->count() > 0) cfg.seed = seed;
            if ((is_infer ? inf_out : gen_out)->count() > 0) cfg.out_dir = out_dir;
            if (is_infer) {
                if (inf_workers->count() > 0) {
                    cfg.workers = workers;
                    cfg.fit.workers = workers;
                }
                if (no_fusion) cfg.fusion_enabled = false;
                if (transpose_reversed) cfg.fusion.transpose_reversed = true;
                kangc::cmd_infer(cfg);
            } else {
                kangc::cmd_generate(cfg);
            }
        } else if (eval->parsed()) {
            kangc::EvalSpec spec;
            spec.include_diagonal = !no_diagonal;
            std::vector<std::filesystem::path> paths(gc_files.begin(), gc_files.end());
            kangc::cmd_eval(paths, truth_file, spec,
                            eval_out->count() > 0 ? std::filesystem::path(out_dir)
                                                  : std::filesystem::path());
        } else if (report->parsed()) {
            kangc::cmd_report(run_dir);
        }
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
