#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "kangc/datagen.hpp"
#include "kangc/evalmetrics.hpp"
#include "kangc/fusion.hpp"
#include "kangc/granger.hpp"

namespace kangc {

enum class DatasetKind { kLorenz96, kVar, kFiles };
enum class ReplicateFit { kPooled, kSeparate };

struct FilesSpec {
    std::vector<std::filesystem::path> panels;
    std::optional<std::filesystem::path> truth;
    LoadSpec load;
};

struct DatasetSpec {
    DatasetKind kind = DatasetKind::kLorenz96;
    Lorenz96Config lorenz;
    VarConfig var;
    FilesSpec files;
    int replicates = 1;  // generator replicate count
    /// "paper" or "standard"; the two Lorenz-96 sign conventions are
    /// algebraically identical, so this is recorded but changes nothing.
    std::string lorenz_convention = "paper";
};

/// Fully resolved run configuration. Defaults here are the documented
/// defaults; the JSON loader only overrides what the file mentions.
struct RunConfig {
    std::uint64_t seed = 0;
    int workers = 1;
    std::filesystem::path out_dir = "runs/out";
    DatasetSpec dataset;
    FitOptions fit;
    FusionConfig fusion;
    bool fusion_enabled = true;
    EvalSpec eval;
    ReplicateFit replicate_fit = ReplicateFit::kPooled;
};

/// Parses JSON text into a RunConfig. Unknown keys and type mismatches are
/// errors naming the JSON pointer of the offending key.
RunConfig parse_config(const std::string& json_text);

/// parse_config plus KANGC_* environment overrides (see apply_env_overrides).
RunConfig load_config(const std::filesystem::path& path);

/// Applies environment overrides to raw JSON: KANGC_TRAIN__LAMBDA=0.1 sets
/// /train/lambda. Double underscore separates nesting levels; keys are
/// lowercased. Values parse as JSON when possible, else as strings.
/// `env` is a null-terminated envp-style array; pass nullptr for environ.
std::string apply_env_overrides(const std::string& json_text, const char* const* env = nullptr);

/// Serializes the fully resolved config back to pretty JSON (for manifests).
std::string config_to_json(const RunConfig& cfg);

}  // namespace kangc
