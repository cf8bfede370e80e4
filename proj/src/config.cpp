#include "kangc/config.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <nlohmann/json.hpp>
#include <set>
#include <sstream>
#include <stdexcept>

extern "C" char** environ;

namespace kangc {

namespace {

using json = nlohmann::json;
using ojson = nlohmann::ordered_json;

[[noreturn]] void fail(const std::string& ptr, const std::string& what) {
    throw std::invalid_argument("config: " + (ptr.empty() ? std::string("/") : ptr) + ": " + what);
}

void check_keys(const json& obj, const std::string& ptr, std::initializer_list<const char*> allowed) {
    for (const auto& [key, value] : obj.items()) {
        if (std::find_if(allowed.begin(), allowed.end(),
                         [&](const char* a) { return key == a; }) == allowed.end()) {
            fail(ptr + "/" + key, "unknown key");
        }
    }
}

const json* find(const json& obj, const char* key) {
    const auto it = obj.find(key);
    return it == obj.end() ? nullptr : &*it;
}

double get_number(const json& v, const std::string& ptr) {
    if (!v.is_number()) fail(ptr, "expected a number");
    return v.get<double>();
}

int get_int(const json& v, const std::string& ptr) {
    if (!v.is_number_integer()) fail(ptr, "expected an integer");
    return v.get<int>();
}

bool get_bool(const json& v, const std::string& ptr) {
    if (!v.is_boolean()) fail(ptr, "expected true or false");
    return v.get<bool>();
}

std::string get_string(const json& v, const std::string& ptr) {
    if (!v.is_string()) fail(ptr, "expected a string");
    return v.get<std::string>();
}

void read_dataset(const json& obj, const std::string& ptr, DatasetSpec& out) {
    if (!obj.is_object()) fail(ptr, "expected an object");
    std::string kind = "lorenz96";
    if (const json* v = find(obj, "kind")) kind = get_string(*v, ptr + "/kind");

    if (kind == "lorenz96") {
        out.kind = DatasetKind::kLorenz96;
        check_keys(obj, ptr,
                   {"kind", "p", "forcing", "length", "dt", "burn_in", "obs_noise_std",
                    "replicates", "convention"});
        if (const json* v = find(obj, "p")) out.lorenz.p = get_int(*v, ptr + "/p");
        if (const json* v = find(obj, "forcing")) out.lorenz.forcing = get_number(*v, ptr + "/forcing");
        if (const json* v = find(obj, "length")) out.lorenz.length = get_int(*v, ptr + "/length");
        if (const json* v = find(obj, "dt")) out.lorenz.dt = get_number(*v, ptr + "/dt");
        if (const json* v = find(obj, "burn_in")) out.lorenz.burn_in = get_int(*v, ptr + "/burn_in");
        if (const json* v = find(obj, "obs_noise_std")) {
            out.lorenz.obs_noise_std = get_number(*v, ptr + "/obs_noise_std");
        }
        if (const json* v = find(obj, "convention")) {
            out.lorenz_convention = get_string(*v, ptr + "/convention");
            if (out.lorenz_convention != "paper" && out.lorenz_convention != "standard") {
                fail(ptr + "/convention", "expected \"paper\" or \"standard\"");
            }
        }
        if (out.lorenz.p < 4) fail(ptr + "/p", "lorenz96 needs p >= 4");
        if (out.lorenz.length < 2) fail(ptr + "/length", "length must be >= 2");
        if (!(out.lorenz.dt > 0.0)) fail(ptr + "/dt", "dt must be positive");
        if (out.lorenz.burn_in < 0) fail(ptr + "/burn_in", "burn_in must be >= 0");
        if (out.lorenz.obs_noise_std < 0.0) fail(ptr + "/obs_noise_std", "must be >= 0");
    } else if (kind == "var") {
        out.kind = DatasetKind::kVar;
        check_keys(obj, ptr,
                   {"kind", "p", "length", "lag", "sparsity", "coeff_scale", "noise_std",
                    "spectral_target", "burn_in", "single_lag", "replicates"});
        if (const json* v = find(obj, "p")) out.var.p = get_int(*v, ptr + "/p");
        if (const json* v = find(obj, "length")) out.var.length = get_int(*v, ptr + "/length");
        if (const json* v = find(obj, "lag")) out.var.lag = get_int(*v, ptr + "/lag");
        if (const json* v = find(obj, "sparsity")) out.var.sparsity = get_number(*v, ptr + "/sparsity");
        if (const json* v = find(obj, "coeff_scale")) {
            out.var.coeff_scale = get_number(*v, ptr + "/coeff_scale");
        }
        if (const json* v = find(obj, "noise_std")) {
            out.var.noise_std = get_number(*v, ptr + "/noise_std");
        }
        if (const json* v = find(obj, "spectral_target")) {
            out.var.spectral_target = get_number(*v, ptr + "/spectral_target");
        }
        if (const json* v = find(obj, "burn_in")) out.var.burn_in = get_int(*v, ptr + "/burn_in");
        if (const json* v = find(obj, "single_lag")) {
            out.var.single_lag = get_int(*v, ptr + "/single_lag");
        }
        if (out.var.p < 2) fail(ptr + "/p", "var needs p >= 2");
        if (out.var.length < 2) fail(ptr + "/length", "length must be >= 2");
        if (out.var.lag < 1) fail(ptr + "/lag", "lag must be >= 1");
        if (!(out.var.sparsity > 0.0) || out.var.sparsity > 1.0) {
            fail(ptr + "/sparsity", "sparsity must be in (0, 1]");
        }
        if (!(out.var.noise_std > 0.0)) fail(ptr + "/noise_std", "must be positive");
        if (!(out.var.spectral_target > 0.0) || !(out.var.spectral_target < 1.0)) {
            fail(ptr + "/spectral_target", "must be in (0, 1)");
        }
        if (out.var.single_lag && (*out.var.single_lag < 1 || *out.var.single_lag > out.var.lag)) {
            fail(ptr + "/single_lag", "must lie in [1, lag]");
        }
    } else if (kind == "files") {
        out.kind = DatasetKind::kFiles;
        check_keys(obj, ptr, {"kind", "panels", "truth", "format"});
        const json* panels = find(obj, "panels");
        if (!panels) fail(ptr + "/panels", "missing required key");
        if (!panels->is_array() || panels->empty()) fail(ptr + "/panels", "expected a nonempty array");
        for (std::size_t i = 0; i < panels->size(); ++i) {
            out.files.panels.emplace_back(
                get_string((*panels)[i], ptr + "/panels/" + std::to_string(i)));
        }
        if (const json* v = find(obj, "truth")) out.files.truth = get_string(*v, ptr + "/truth");
        std::string format = "csv";
        if (const json* v = find(obj, "format")) format = get_string(*v, ptr + "/format");
        if (format == "csv") {
            out.files.load.format = PanelFormat::kSingle;
        } else if (format == "csv-rep") {
            out.files.load.format = PanelFormat::kReplicateColumn;
        } else if (format.rfind("blocks:", 0) == 0) {
            out.files.load.format = PanelFormat::kBlocks;
            try {
                std::size_t pos = 0;
                out.files.load.block_length = std::stoi(format.substr(7), &pos);
                if (pos != format.size() - 7) throw std::invalid_argument("");
            } catch (const std::exception&) {
                fail(ptr + "/format", "expected \"blocks:<length>\" with an integer length");
            }
            if (out.files.load.block_length < 2) {
                fail(ptr + "/format", "block length must be >= 2");
            }
        } else {
            fail(ptr + "/format", "expected \"csv\", \"csv-rep\", or \"blocks:<length>\"");
        }
    } else {
        fail(ptr + "/kind", "expected \"lorenz96\", \"var\", or \"files\"");
    }

    if (const json* v = find(obj, "replicates")) {
        out.replicates = get_int(*v, ptr + "/replicates");
        if (out.replicates < 1) fail(ptr + "/replicates", "must be >= 1");
    }
}

void read_model(const json& obj, const std::string& ptr, FitOptions& fit) {
    if (!obj.is_object()) fail(ptr, "expected an object");
    check_keys(obj, ptr,
               {"lag", "hidden", "grid_size", "spline_order", "grid_range", "base_activation"});
    if (const json* v = find(obj, "lag")) {
        fit.lag = get_int(*v, ptr + "/lag");
        if (fit.lag < 1) fail(ptr + "/lag", "must be >= 1");
    }
    if (const json* v = find(obj, "hidden")) {
        if (!v->is_array() || v->empty()) fail(ptr + "/hidden", "expected a nonempty array");
        fit.hidden.clear();
        for (std::size_t i = 0; i < v->size(); ++i) {
            const int h = get_int((*v)[i], ptr + "/hidden/" + std::to_string(i));
            if (h < 1) fail(ptr + "/hidden/" + std::to_string(i), "must be >= 1");
            fit.hidden.push_back(h);
        }
    }
    if (const json* v = find(obj, "grid_size")) {
        fit.init.grid_size = get_int(*v, ptr + "/grid_size");
        if (fit.init.grid_size < 1) fail(ptr + "/grid_size", "must be >= 1");
    }
    if (const json* v = find(obj, "spline_order")) {
        fit.init.order = get_int(*v, ptr + "/spline_order");
        if (fit.init.order < 1) fail(ptr + "/spline_order", "must be >= 1");
    }
    if (const json* v = find(obj, "grid_range")) {
        if (!v->is_array() || v->size() != 2) fail(ptr + "/grid_range", "expected [lo, hi]");
        fit.init.grid_lo = get_number((*v)[0], ptr + "/grid_range/0");
        fit.init.grid_hi = get_number((*v)[1], ptr + "/grid_range/1");
        if (!(fit.init.grid_lo < fit.init.grid_hi)) {
            fail(ptr + "/grid_range", "lo must be < hi");
        }
    }
    if (const json* v = find(obj, "base_activation")) {
        const std::string base = get_string(*v, ptr + "/base_activation");
        if (base == "silu") {
            fit.init.base = BaseActivation::kSilu;
        } else if (base == "identity") {
            fit.init.base = BaseActivation::kIdentity;
        } else {
            fail(ptr + "/base_activation", "expected \"silu\" or \"identity\"");
        }
    }
}

void read_train(const json& obj, const std::string& ptr, FitOptions& fit) {
    if (!obj.is_object()) fail(ptr, "expected an object");
    check_keys(obj, ptr,
               {"lambda", "gamma", "learning_rate", "max_epochs", "batch_size", "patience",
                "group_norm_epsilon", "sweep", "holdout_fraction"});
    // null means "not set", same as omitting the key; keeps sweep mode
    // expressible in a config that spells out every field.
    if (const json* v = find(obj, "lambda"); v != nullptr && !v->is_null()) {
        const double lam = get_number(*v, ptr + "/lambda");
        if (lam < 0.0) fail(ptr + "/lambda", "must be >= 0");
        fit.lambda = lam;
    }
    if (const json* v = find(obj, "gamma"); v != nullptr && !v->is_null()) {
        const double gam = get_number(*v, ptr + "/gamma");
        if (gam < 0.0) fail(ptr + "/gamma", "must be >= 0");
        fit.gamma = gam;
    }
    if (const json* v = find(obj, "learning_rate")) {
        fit.train.learning_rate = get_number(*v, ptr + "/learning_rate");
        if (!(fit.train.learning_rate > 0.0)) fail(ptr + "/learning_rate", "must be positive");
    }
    if (const json* v = find(obj, "max_epochs")) {
        fit.train.max_epochs = get_int(*v, ptr + "/max_epochs");
        if (fit.train.max_epochs < 1) fail(ptr + "/max_epochs", "must be >= 1");
    }
    if (const json* v = find(obj, "batch_size")) {
        if (v->is_string()) {
            if (v->get<std::string>() != "full") {
                fail(ptr + "/batch_size", "expected a positive integer or \"full\"");
            }
            fit.train.batch_size = 0;
        } else {
            fit.train.batch_size = get_int(*v, ptr + "/batch_size");
            if (fit.train.batch_size < 1) {
                fail(ptr + "/batch_size", "expected a positive integer or \"full\"");
            }
        }
    }
    if (const json* v = find(obj, "patience")) {
        fit.train.early_stop_patience = get_int(*v, ptr + "/patience");
        if (fit.train.early_stop_patience < 0) fail(ptr + "/patience", "must be >= 0");
    }
    if (const json* v = find(obj, "group_norm_epsilon")) {
        fit.train.group_norm_epsilon = get_number(*v, ptr + "/group_norm_epsilon");
        if (!(fit.train.group_norm_epsilon > 0.0)) {
            fail(ptr + "/group_norm_epsilon", "must be positive");
        }
    }
    if (const json* v = find(obj, "sweep")) {
        if (!v->is_array() || v->empty()) fail(ptr + "/sweep", "expected a nonempty array");
        fit.sweep.clear();
        for (std::size_t i = 0; i < v->size(); ++i) {
            const double s = get_number((*v)[i], ptr + "/sweep/" + std::to_string(i));
            if (!(s > 0.0)) fail(ptr + "/sweep/" + std::to_string(i), "must be positive");
            fit.sweep.push_back(s);
        }
    }
    if (const json* v = find(obj, "holdout_fraction")) {
        fit.holdout_fraction = get_number(*v, ptr + "/holdout_fraction");
        if (!(fit.holdout_fraction > 0.0) || !(fit.holdout_fraction < 1.0)) {
            fail(ptr + "/holdout_fraction", "must be in (0, 1)");
        }
    }
}

void read_fusion(const json& obj, const std::string& ptr, RunConfig& cfg) {
    if (!obj.is_object()) fail(ptr, "expected an object");
    check_keys(obj, ptr, {"enabled", "theta", "transpose_reversed"});
    if (const json* v = find(obj, "enabled")) cfg.fusion_enabled = get_bool(*v, ptr + "/enabled");
    if (const json* v = find(obj, "theta")) {
        cfg.fusion.theta = get_number(*v, ptr + "/theta");
        if (cfg.fusion.theta < 0.0) fail(ptr + "/theta", "must be >= 0");
    }
    if (const json* v = find(obj, "transpose_reversed")) {
        cfg.fusion.transpose_reversed = get_bool(*v, ptr + "/transpose_reversed");
    }
}

}  // namespace

RunConfig parse_config(const std::string& json_text) {
    json root;
    try {
        root = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw std::invalid_argument(std::string("config: not valid JSON: ") + e.what());
    }
    if (!root.is_object()) throw std::invalid_argument("config: top level must be an object");
    check_keys(root, "",
               {"seed", "workers", "out", "dataset", "model", "train", "fusion", "eval",
                "replicate_fit"});

    RunConfig cfg;
    if (const json* v = find(root, "seed")) {
        if (!v->is_number_integer()) fail("/seed", "expected an integer");
        cfg.seed = v->get<std::uint64_t>();
    }
    if (const json* v = find(root, "workers")) {
        cfg.workers = get_int(*v, "/workers");
        if (cfg.workers < 1) fail("/workers", "must be >= 1");
    }
    if (const json* v = find(root, "out")) cfg.out_dir = get_string(*v, "/out");
    if (const json* v = find(root, "dataset")) read_dataset(*v, "/dataset", cfg.dataset);
    if (const json* v = find(root, "model")) read_model(*v, "/model", cfg.fit);
    if (const json* v = find(root, "train")) read_train(*v, "/train", cfg.fit);
    if (const json* v = find(root, "fusion")) read_fusion(*v, "/fusion", cfg);
    if (const json* v = find(root, "eval")) {
        if (!v->is_object()) fail("/eval", "expected an object");
        check_keys(*v, "/eval", {"include_diagonal"});
        if (const json* d = find(*v, "include_diagonal")) {
            cfg.eval.include_diagonal = get_bool(*d, "/eval/include_diagonal");
        }
    }
    if (const json* v = find(root, "replicate_fit")) {
        const std::string mode = get_string(*v, "/replicate_fit");
        if (mode == "pooled") {
            cfg.replicate_fit = ReplicateFit::kPooled;
        } else if (mode == "separate") {
            cfg.replicate_fit = ReplicateFit::kSeparate;
        } else {
            fail("/replicate_fit", "expected \"pooled\" or \"separate\"");
        }
    }
    cfg.fit.workers = cfg.workers;
    return cfg;
}

std::string apply_env_overrides(const std::string& json_text, const char* const* env) {
    json root;
    try {
        root = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw std::invalid_argument(std::string("config: not valid JSON: ") + e.what());
    }
    if (env == nullptr) env = const_cast<const char* const*>(environ);

    static const std::string prefix = "KANGC_";
    for (const char* const* e = env; *e != nullptr; ++e) {
        const std::string entry = *e;
        if (entry.rfind(prefix, 0) != 0) continue;
        const std::size_t eq = entry.find('=');
        if (eq == std::string::npos || eq <= prefix.size()) continue;
        const std::string raw_key = entry.substr(prefix.size(), eq - prefix.size());
        const std::string raw_value = entry.substr(eq + 1);

        std::vector<std::string> path;
        std::size_t start = 0;
        while (start <= raw_key.size()) {
            const std::size_t sep = raw_key.find("__", start);
            std::string part = raw_key.substr(start, sep == std::string::npos ? std::string::npos
                                                                              : sep - start);
            std::transform(part.begin(), part.end(), part.begin(),
                           [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
            if (part.empty()) {
                throw std::invalid_argument("config: malformed override " + prefix + raw_key);
            }
            path.push_back(std::move(part));
            if (sep == std::string::npos) break;
            start = sep + 2;
        }

        json value;
        try {
            value = json::parse(raw_value);
        } catch (const json::parse_error&) {
            value = raw_value;  // unquoted strings like "lorenz96"
        }
        json* node = &root;
        for (std::size_t i = 0; i + 1 < path.size(); ++i) node = &(*node)[path[i]];
        (*node)[path.back()] = value;
    }
    return root.dump();
}

RunConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("config: cannot open " + path.string());
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return parse_config(apply_env_overrides(buffer.str()));
}

std::string config_to_json(const RunConfig& cfg) {
    ojson root;
    root["seed"] = cfg.seed;
    root["workers"] = cfg.workers;
    root["out"] = cfg.out_dir.string();

    ojson ds;
    switch (cfg.dataset.kind) {
        case DatasetKind::kLorenz96:
            ds["kind"] = "lorenz96";
            ds["p"] = cfg.dataset.lorenz.p;
            ds["forcing"] = cfg.dataset.lorenz.forcing;
            ds["length"] = cfg.dataset.lorenz.length;
            ds["dt"] = cfg.dataset.lorenz.dt;
            ds["burn_in"] = cfg.dataset.lorenz.burn_in;
            ds["obs_noise_std"] = cfg.dataset.lorenz.obs_noise_std;
            ds["convention"] = cfg.dataset.lorenz_convention;
            break;
        case DatasetKind::kVar:
            ds["kind"] = "var";
            ds["p"] = cfg.dataset.var.p;
            ds["length"] = cfg.dataset.var.length;
            ds["lag"] = cfg.dataset.var.lag;
            ds["sparsity"] = cfg.dataset.var.sparsity;
            ds["coeff_scale"] = cfg.dataset.var.coeff_scale;
            ds["noise_std"] = cfg.dataset.var.noise_std;
            ds["spectral_target"] = cfg.dataset.var.spectral_target;
            ds["burn_in"] = cfg.dataset.var.burn_in;
            if (cfg.dataset.var.single_lag) ds["single_lag"] = *cfg.dataset.var.single_lag;
            break;
        case DatasetKind::kFiles: {
            ds["kind"] = "files";
            ojson panels = ojson::array();
            for (const auto& p : cfg.dataset.files.panels) panels.push_back(p.string());
            ds["panels"] = std::move(panels);
            if (cfg.dataset.files.truth) ds["truth"] = cfg.dataset.files.truth->string();
            switch (cfg.dataset.files.load.format) {
                case PanelFormat::kSingle: ds["format"] = "csv"; break;
                case PanelFormat::kReplicateColumn: ds["format"] = "csv-rep"; break;
                case PanelFormat::kBlocks:
                    ds["format"] = "blocks:" + std::to_string(cfg.dataset.files.load.block_length);
                    break;
            }
            break;
        }
    }
    ds["replicates"] = cfg.dataset.replicates;
    root["dataset"] = std::move(ds);

    ojson model;
    model["lag"] = cfg.fit.lag;
    model["hidden"] = cfg.fit.hidden;
    model["grid_size"] = cfg.fit.init.grid_size;
    model["spline_order"] = cfg.fit.init.order;
    model["grid_range"] = {cfg.fit.init.grid_lo, cfg.fit.init.grid_hi};
    model["base_activation"] =
        cfg.fit.init.base == BaseActivation::kSilu ? "silu" : "identity";
    root["model"] = std::move(model);

    // Unset lambda/gamma (sweep mode) stay absent so the output reparses.
    ojson train;
    if (cfg.fit.lambda) train["lambda"] = *cfg.fit.lambda;
    if (cfg.fit.gamma) train["gamma"] = *cfg.fit.gamma;
    train["learning_rate"] = cfg.fit.train.learning_rate;
    train["max_epochs"] = cfg.fit.train.max_epochs;
    if (cfg.fit.train.batch_size == 0) {
        train["batch_size"] = "full";
    } else {
        train["batch_size"] = cfg.fit.train.batch_size;
    }
    train["patience"] = cfg.fit.train.early_stop_patience;
    train["group_norm_epsilon"] = cfg.fit.train.group_norm_epsilon;
    train["sweep"] = cfg.fit.sweep;
    train["holdout_fraction"] = cfg.fit.holdout_fraction;
    root["train"] = std::move(train);

    ojson fusion;
    fusion["enabled"] = cfg.fusion_enabled;
    fusion["theta"] = cfg.fusion.theta;
    fusion["transpose_reversed"] = cfg.fusion.transpose_reversed;
    root["fusion"] = std::move(fusion);

    ojson eval;
    eval["include_diagonal"] = cfg.eval.include_diagonal;
    root["eval"] = std::move(eval);

    root["replicate_fit"] = cfg.replicate_fit == ReplicateFit::kPooled ? "pooled" : "separate";
    return root.dump(2);
}

}  // namespace kangc
