#include "run_config.hpp"

#include <glob.h>

#include <fstream>
#include <json.hpp>
#include <set>
#include <string_view>

namespace ggsm::cli {

namespace {

using nlohmann::json;

/// Rejects keys outside the allowed set so config typos fail loudly.
void require_keys(const json& obj, const std::string& where,
                  const std::set<std::string_view>& allowed) {
    for (const auto& item : obj.items()) {
        if (allowed.count(item.key()) == 0)
            throw ConfigError("unknown config key '" + where + item.key() +
                              "'");
    }
}

template <typename T>
void read_into(const json& obj, const char* key, T& out) {
    if (obj.contains(key)) out = obj.at(key).get<T>();
}

}  // namespace

StandardizeMode parse_standardize(const std::string& name) {
    if (name == "per_image") return StandardizeMode::per_image;
    if (name == "per_patch") return StandardizeMode::per_patch;
    throw ConfigError("unknown standardize mode '" + name +
                      "' (expected per_image or per_patch)");
}

std::string_view to_string(StandardizeMode mode) {
    return mode == StandardizeMode::per_image ? "per_image" : "per_patch";
}

void load_config(const std::string& path, RunConfig& cfg) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    json root;
    try {
        in >> root;
    } catch (const json::exception& e) {
        throw ConfigError("config " + path + ": " + e.what());
    }
    if (!root.is_object())
        throw ConfigError("config " + path + ": expected a JSON object");

    require_keys(root, "",
                 {"dataset", "profile", "inputs", "transform", "standardize",
                  "patch_size", "symmetrize", "grayscale", "plan", "grid",
                  "trims", "thresholds", "skew_boot", "skew_alpha",
                  "independence_boot", "subsample_cap", "seed", "out_dir"});

    try {
        read_into(root, "dataset", cfg.dataset);
        read_into(root, "profile", cfg.profile);
        read_into(root, "inputs", cfg.inputs);
        read_into(root, "patch_size", cfg.patch_size);
        read_into(root, "grayscale", cfg.grayscale);
        read_into(root, "skew_boot", cfg.skew_boot);
        read_into(root, "skew_alpha", cfg.skew_alpha);
        read_into(root, "independence_boot", cfg.independence_boot);
        read_into(root, "subsample_cap", cfg.subsample_cap);
        read_into(root, "out_dir", cfg.out_dir);
        if (root.contains("seed"))
            cfg.seed = root.at("seed").get<std::uint64_t>();
        if (root.contains("standardize")) {
            cfg.standardize =
                parse_standardize(root.at("standardize").get<std::string>());
            cfg.explicit_standardize = true;
        }
        if (root.contains("symmetrize")) {
            cfg.symmetrize = root.at("symmetrize").get<bool>();
            cfg.explicit_symmetrize = true;
        }
        if (root.contains("transform")) {
            const json& t = root.at("transform");
            require_keys(t, "transform.",
                         {"kind", "levels", "filterbank", "band_ks_threshold",
                          "min_band_samples"});
            read_into(t, "kind", cfg.transform.kind);
            read_into(t, "levels", cfg.transform.levels);
            read_into(t, "filterbank", cfg.transform.filterbank);
            read_into(t, "band_ks_threshold",
                      cfg.transform.band_ks_threshold);
            read_into(t, "min_band_samples", cfg.transform.min_band_samples);
        }
        if (root.contains("plan")) {
            const json& p = root.at("plan");
            require_keys(p, "plan.",
                         {"merge_real_imag", "merge_horizontal_vertical",
                          "per_layer", "per_filter"});
            read_into(p, "merge_real_imag", cfg.plan.merge_real_imag);
            read_into(p, "per_layer", cfg.plan.per_layer);
            read_into(p, "per_filter", cfg.plan.per_filter);
            if (p.contains("merge_horizontal_vertical")) {
                cfg.plan.merge_horizontal_vertical =
                    p.at("merge_horizontal_vertical").get<bool>();
                cfg.explicit_merge_hv = true;
            }
        }
        if (root.contains("grid")) {
            const json& g = root.at("grid");
            require_keys(g, "grid.",
                         {"r_min", "r_max", "eta_min", "eta_max", "inner_step",
                          "outer_step", "inner_limit", "refine_divisor",
                          "fine_divisor", "fine_r_limit"});
            read_into(g, "r_min", cfg.grid.r_min);
            read_into(g, "r_max", cfg.grid.r_max);
            read_into(g, "eta_min", cfg.grid.eta_min);
            read_into(g, "eta_max", cfg.grid.eta_max);
            read_into(g, "inner_step", cfg.grid.inner_step);
            read_into(g, "outer_step", cfg.grid.outer_step);
            read_into(g, "inner_limit", cfg.grid.inner_limit);
            read_into(g, "refine_divisor", cfg.grid.refine_divisor);
            read_into(g, "fine_divisor", cfg.grid.fine_divisor);
            read_into(g, "fine_r_limit", cfg.grid.fine_r_limit);
        }
        if (root.contains("trims")) {
            const json& t = root.at("trims");
            require_keys(t, "trims.", {"t_grid", "refine_deltas"});
            read_into(t, "t_grid", cfg.trims.t_grid);
            read_into(t, "refine_deltas", cfg.trims.refine_deltas);
        }
        if (root.contains("thresholds")) {
            const json& t = root.at("thresholds");
            require_keys(t, "thresholds.",
                         {"alpha", "min_samples", "practical_ks",
                          "borderline_ks", "zero_spike"});
            read_into(t, "alpha", cfg.thresholds.alpha);
            read_into(t, "min_samples", cfg.thresholds.min_samples);
            read_into(t, "practical_ks", cfg.thresholds.practical_ks);
            read_into(t, "borderline_ks", cfg.thresholds.borderline_ks);
            read_into(t, "zero_spike", cfg.thresholds.zero_spike);
        }
    } catch (const json::exception& e) {
        throw ConfigError("config " + path + ": " + e.what());
    }
}

void apply_profile(RunConfig& cfg) {
    if (cfg.profile == "custom") return;
    if (cfg.explicit_standardize || cfg.explicit_symmetrize ||
        cfg.explicit_merge_hv)
        throw ConfigError(
            "profile '" + cfg.profile +
            "' fixes standardization, symmetrization and orientation "
            "merging; use profile 'custom' to choose them directly");
    if (cfg.profile == "natural") {
        cfg.standardize = StandardizeMode::per_image;
        cfg.symmetrize = false;
        cfg.plan.merge_horizontal_vertical = false;
        if (cfg.transform.kind == "fourier")
            throw ConfigError(
                "profile 'natural' rules out the fourier transform: "
                "unregistered small rotations scramble long-wavelength "
                "phase structure");
        return;
    }
    if (cfg.profile == "medical") {
        cfg.standardize = StandardizeMode::per_image;
        cfg.symmetrize = true;
        cfg.plan.merge_horizontal_vertical = false;
        if (cfg.transform.kind == "fourier")
            throw ConfigError(
                "profile 'medical' rules out the fourier transform: "
                "irregular cropped backgrounds break the global frequency "
                "grid");
        return;
    }
    if (cfg.profile == "remote_sensing") {
        cfg.standardize = StandardizeMode::per_patch;
        cfg.symmetrize = false;
        cfg.plan.merge_horizontal_vertical = true;
        return;
    }
    throw ConfigError("unknown profile '" + cfg.profile +
                      "' (expected natural, medical, remote_sensing or "
                      "custom)");
}

std::vector<std::string> resolve_inputs(
    const std::vector<std::string>& patterns) {
    std::vector<std::string> out;
    for (const std::string& pat : patterns) {
        ::glob_t g{};
        const int rc = ::glob(pat.c_str(), 0, nullptr, &g);
        if (rc == GLOB_NOMATCH) {
            ::globfree(&g);
            throw ConfigError("input pattern matched nothing: " + pat);
        }
        if (rc != 0) {
            ::globfree(&g);
            throw ConfigError("cannot expand input pattern: " + pat);
        }
        for (std::size_t i = 0; i < g.gl_pathc; ++i)
            out.emplace_back(g.gl_pathv[i]);
        ::globfree(&g);
    }
    return out;
}

}  // namespace ggsm::cli
