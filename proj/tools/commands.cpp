#include "commands.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <map>
#include <set>
#include <sstream>

#include "ggsm/blocks.hpp"
#include "ggsm/errors.hpp"
#include "ggsm/filter_bank.hpp"
#include "ggsm/fitter.hpp"
#include "ggsm/fourier.hpp"
#include "ggsm/haar.hpp"
#include "ggsm/image.hpp"
#include "ggsm/independence.hpp"
#include "ggsm/prior.hpp"
#include "ggsm/rng.hpp"
#include "ggsm/skew.hpp"
#include "ggsm/tabulated_cdf.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace ggsm::cli {

namespace {

/// Doubles go through the JSON emitter so every number takes its shortest
/// round-trip form and reruns stay byte-identical.
std::string num(double v) { return json(v).dump(); }

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string quoted = "\"";
    for (char c : s) {
        if (c == '"') quoted += '"';
        quoted += c;
    }
    quoted += '"';
    return quoted;
}

/// Filename-safe rendering of a block group label.
std::string sanitize(const std::string& s) {
    std::string out = s;
    for (char& c : out) {
        const bool keep = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') ||
                          (c >= '0' && c <= '9') || c == '-' || c == '.';
        if (!keep) c = '_';
    }
    return out;
}

std::ofstream open_out(const fs::path& path) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot open for writing: " + path.string());
    return out;
}

void write_json_file(const fs::path& path, const json& j) {
    std::ofstream out = open_out(path);
    out << j.dump(2) << '\n';
    if (!out) throw ConfigError("write failed: " + path.string());
}

double median_of(std::vector<double> values) {
    std::sort(values.begin(), values.end());
    const double h = 0.5 * static_cast<double>(values.size() - 1);
    const std::size_t i = static_cast<std::size_t>(h);
    const double frac = h - static_cast<double>(i);
    if (frac == 0.0) return values[i];
    return values[i] + frac * (values[i + 1] - values[i]);
}

/// Channel planes are stored contiguously, so a channel slice is one copy.
ImageTensor extract_channel(const ImageTensor& img, std::size_t c) {
    ImageTensor out;
    out.dims = img.dims;
    out.channels = 1;
    out.provenance = img.provenance;
    const std::size_t n = img.plane_size();
    out.data.assign(img.data.begin() + static_cast<std::ptrdiff_t>(c * n),
                    img.data.begin() + static_cast<std::ptrdiff_t>((c + 1) * n));
    return out;
}

json block_entry(const std::string& rel_path, const CoefficientBlock& block) {
    return json{{"path", rel_path},
                {"group", block.meta.group},
                {"channel", block.meta.channel},
                {"n_values", block.values.size()},
                {"n_images", block.meta.n_images}};
}

/// One row of fits.csv; a nonempty error marks a block that produced no fit.
struct FitRow {
    std::string path;
    std::string transform;
    std::string dataset;
    std::string group;
    std::size_t channel = 0;
    std::size_t samples = 0;
    double ks = 0.0;
    double p_value = 0.0;
    std::string category;
    bool statistical = false;
    bool combined = false;
    bool lper = false;
    std::string error;
};

void write_fits_csv(const fs::path& path, const std::vector<FitRow>& rows) {
    std::ofstream out = open_out(path);
    out << "block,transform,dataset,group,channel,samples,ks,p_value,"
           "category,statistical_pass,combined_pass,intersects_lper,error\n";
    for (const FitRow& r : rows) {
        out << csv_field(r.path) << ',' << csv_field(r.transform) << ','
            << csv_field(r.dataset) << ',' << csv_field(r.group) << ',';
        if (r.error.empty()) {
            out << r.channel << ',' << r.samples << ',' << num(r.ks) << ','
                << num(r.p_value) << ',' << r.category << ','
                << (r.statistical ? 1 : 0) << ',' << (r.combined ? 1 : 0)
                << ',' << (r.lper ? 1 : 0) << ",\n";
        } else {
            out << ",,,,,,,," << csv_field(r.error) << '\n';
        }
    }
    if (!out) throw ConfigError("write failed: " + path.string());
}

/// Aggregate summary, one row per transform and dataset pair in first
/// encounter order; error rows are excluded from every statistic.
void write_aggregate_csv(const fs::path& path,
                         const std::vector<FitRow>& rows) {
    std::vector<std::pair<std::string, std::string>> keys;
    std::map<std::pair<std::string, std::string>, std::vector<const FitRow*>>
        by_key;
    for (const FitRow& r : rows) {
        if (!r.error.empty()) continue;
        const auto key = std::make_pair(r.transform, r.dataset);
        if (by_key.find(key) == by_key.end()) keys.push_back(key);
        by_key[key].push_back(&r);
    }
    std::ofstream out = open_out(path);
    out << "transform,dataset,blocks,median_samples,median_ks,"
           "statistical_pass_pct,combined_pass_pct,intersect_lper_pct\n";
    for (const auto& key : keys) {
        const std::vector<const FitRow*>& group = by_key[key];
        std::vector<double> samples;
        std::vector<double> ks;
        std::size_t n_stat = 0;
        std::size_t n_comb = 0;
        std::size_t n_lper = 0;
        for (const FitRow* r : group) {
            samples.push_back(static_cast<double>(r->samples));
            ks.push_back(r->ks);
            n_stat += r->statistical ? 1 : 0;
            n_comb += r->combined ? 1 : 0;
            n_lper += r->lper ? 1 : 0;
        }
        const double n = static_cast<double>(group.size());
        out << csv_field(key.first) << ',' << csv_field(key.second) << ','
            << group.size() << ',' << num(median_of(samples)) << ','
            << num(median_of(ks)) << ','
            << num(100.0 * static_cast<double>(n_stat) / n) << ','
            << num(100.0 * static_cast<double>(n_comb) / n) << ','
            << num(100.0 * static_cast<double>(n_lper) / n) << '\n';
    }
    if (!out) throw ConfigError("write failed: " + path.string());
}

json fit_report_json(const CoefficientBlock& block, const FitResult& fit,
                     std::uint64_t block_seed) {
    json region = json::array();
    for (const ScoredPoint& p : fit.region)
        region.push_back(json::array({p.r, p.eta}));
    json baselines;
    for (const auto& [kind, bf] : fit.baselines)
        baselines[std::string(to_string(kind))] = {{"scale", bf.scale},
                                                   {"dof", bf.dof},
                                                   {"ks", bf.ks},
                                                   {"p_value", bf.p_value}};
    return json{
        {"command", "fit"},
        {"block",
         {{"dataset", block.meta.dataset},
          {"transform", block.meta.transform},
          {"group", block.meta.group},
          {"channel", block.meta.channel},
          {"n_images", block.meta.n_images},
          {"samples", block.values.size()},
          {"symmetrized", block.meta.symmetrized},
          {"degenerate", block.meta.degenerate}}},
        {"seed", block_seed},
        {"best",
         {{"r", fit.best.r},
          {"eta", fit.best.eta},
          {"theta", fit.best.scale},
          {"t_star", fit.t_star}}},
        {"ks", fit.ks},
        {"p_value", fit.p_value},
        {"category", std::string(to_string(fit.category))},
        {"region", region},
        {"lper",
         {{"intersects", fit.region_intersects_lper},
          {"p_range",
           json::array({fit.lper_p_range[0], fit.lper_p_range[1]})}}},
        {"flags",
         {{"skewness", fit.flags.skew.skewness},
          {"skew_ci",
           json::array({fit.flags.skew.ci_lo, fit.flags.skew.ci_hi})},
          {"skew_excluded", fit.flags.skew.excluded},
          {"bimodal", fit.flags.bimodal},
          {"zero_spike_fraction", fit.flags.zero_spike_fraction}}},
        {"baselines", baselines}};
}

bool is_pass(const std::string& category) {
    return category == "statistical_pass" || category == "practical_pass";
}

}  // namespace

int run_transform(const RunConfig& cfg) {
    const std::string& kind = cfg.transform.kind;
    if (kind != "haar" && kind != "fourier" && kind != "filterbank")
        throw ConfigError("unknown transform kind '" + kind +
                          "' (expected haar, fourier or filterbank)");
    if (cfg.inputs.empty()) throw ConfigError("no inputs given");
    FilterBank bank;
    if (kind == "filterbank") {
        if (cfg.transform.filterbank.empty())
            throw ConfigError("transform 'filterbank' needs a filter bank "
                              "file (transform.filterbank)");
        if (!cfg.seed)
            throw ConfigError("--seed is required for filter bank runs (the "
                              "skew screen bootstraps its interval)");
        try {
            bank = load_filter_bank(cfg.transform.filterbank);
        } catch (const std::exception& e) {
            throw ConfigError("filter bank " + cfg.transform.filterbank +
                              ": " + e.what());
        }
    }
    const std::vector<std::string> files = resolve_inputs(cfg.inputs);

    // Single-channel filters slice each image plane separately; otherwise
    // every filter must match the image's channel count exactly.
    const bool bank_single =
        !bank.filters.empty() &&
        std::all_of(bank.filters.begin(), bank.filters.end(),
                    [](const Filter& f) { return f.channels == 1; });

    std::vector<HaarDecomposition> haar_decomps;
    std::map<std::size_t, std::vector<FourierCoefficients>> spectra;
    std::map<std::size_t, std::vector<std::vector<FilterResponse>>> responses;
    bool any_degenerate = false;
    json errors = json::array();
    for (const std::string& file : files) {
        try {
            ImageTensor img = read_image(file);
            if (cfg.grayscale && img.channels == 3) img = to_grayscale(img);
            StandardizeResult std_res =
                standardize(img, cfg.standardize, cfg.patch_size);
            any_degenerate = any_degenerate || std_res.degenerate;
            if (kind == "haar") {
                haar_decomps.push_back(
                    haar_transform(std_res.image, cfg.transform.levels));
            } else if (kind == "fourier") {
                for (std::size_t c = 0; c < std_res.image.channels; ++c)
                    spectra[c].push_back(fourier_transform(
                        std_res.image.channels == 1
                            ? std_res.image
                            : extract_channel(std_res.image, c)));
            } else {
                if (bank_single) {
                    for (std::size_t c = 0; c < std_res.image.channels; ++c)
                        responses[c].push_back(apply_filter_bank(
                            std_res.image.channels == 1
                                ? std_res.image
                                : extract_channel(std_res.image, c),
                            bank));
                } else {
                    responses[0].push_back(
                        apply_filter_bank(std_res.image, bank));
                }
            }
        } catch (const std::exception& e) {
            errors.push_back({{"input", file}, {"error", e.what()}});
        }
    }

    GroupingPlan plan = cfg.plan;
    std::vector<CoefficientBlock> blocks;
    if (kind == "haar") {
        if (!haar_decomps.empty())
            blocks = assemble_blocks(haar_decomps, plan, cfg.dataset);
    } else if (kind == "fourier") {
        // One band partition from the wavelength groups pooled across all
        // channels and images, shared by every channel's assembly.
        std::map<double, std::vector<double>> pooled;
        for (const auto& [c, specs] : spectra) {
            for (const FourierCoefficients& fc : specs) {
                for (std::size_t b = 0; b < fc.wavelength.size(); ++b) {
                    std::vector<double>& vals = pooled[fc.wavelength[b]];
                    vals.push_back(fc.re[b]);
                    // Self-conjugate bins carry no imaginary data.
                    if (fc.weight[b] == 2.0) vals.push_back(fc.im[b]);
                }
            }
        }
        if (!pooled.empty()) {
            std::vector<WavelengthGroup> groups;
            groups.reserve(pooled.size());
            for (auto& [w, vals] : pooled)
                groups.push_back({w, std::move(vals)});
            plan.band_partition =
                partition_bands(groups, cfg.transform.band_ks_threshold,
                                cfg.transform.min_band_samples);
            for (const auto& [c, specs] : spectra) {
                std::vector<CoefficientBlock> channel_blocks =
                    assemble_blocks(specs, plan, cfg.dataset);
                for (CoefficientBlock& b : channel_blocks) {
                    b.meta.channel = c;
                    blocks.push_back(std::move(b));
                }
            }
        }
    } else {
        for (const auto& [c, images] : responses) {
            std::vector<CoefficientBlock> channel_blocks =
                assemble_blocks(images, plan, cfg.dataset);
            for (CoefficientBlock& b : channel_blocks) {
                b.meta.channel = c;
                blocks.push_back(std::move(b));
            }
        }
    }
    for (CoefficientBlock& b : blocks)
        b.meta.degenerate = b.meta.degenerate || any_degenerate;

    // Asymmetric response distributions cannot come from a symmetric prior;
    // screen filter blocks before any symmetrization could mask the skew.
    json exclusions = json::array();
    if (kind == "filterbank") {
        std::vector<CoefficientBlock> kept;
        for (std::size_t i = 0; i < blocks.size(); ++i) {
            try {
                const SkewTestResult s =
                    skew_pretest(blocks[i].values, derive_seed(*cfg.seed, i),
                                 cfg.skew_boot, cfg.skew_alpha);
                if (s.excluded) {
                    exclusions.push_back({{"group", blocks[i].meta.group},
                                          {"channel", blocks[i].meta.channel},
                                          {"skewness", s.skewness},
                                          {"ci_lo", s.ci_lo},
                                          {"ci_hi", s.ci_hi}});
                    continue;
                }
            } catch (const TooFewSamples&) {
                // Too small to assess; keep the block.
            }
            kept.push_back(std::move(blocks[i]));
        }
        blocks = std::move(kept);
    }
    if (cfg.symmetrize)
        for (CoefficientBlock& b : blocks) b = symmetrize(b);

    const fs::path out_dir(cfg.out_dir);
    fs::create_directories(out_dir / "blocks");
    json block_entries = json::array();
    for (const CoefficientBlock& b : blocks) {
        const std::string name = kind + "_" + sanitize(b.meta.group) + "_c" +
                                 std::to_string(b.meta.channel) + ".gsmb";
        write_block((out_dir / "blocks" / name).string(), b,
                    /*sort_values=*/true);
        block_entries.push_back(block_entry("blocks/" + name, b));
    }

    json manifest{{"command", "transform"},
                  {"dataset", cfg.dataset},
                  {"profile", cfg.profile},
                  {"standardize", std::string(to_string(cfg.standardize))},
                  {"patch_size", cfg.patch_size},
                  {"symmetrize", cfg.symmetrize},
                  {"grayscale", cfg.grayscale},
                  {"inputs", files},
                  {"errors", errors},
                  {"blocks", block_entries}};
    json transform_meta{{"kind", kind}};
    if (kind == "haar") transform_meta["levels"] = cfg.transform.levels;
    if (kind == "filterbank") {
        transform_meta["filterbank"] = cfg.transform.filterbank;
        manifest["skew_exclusions"] = exclusions;
    }
    if (kind == "fourier") {
        transform_meta["band_ks_threshold"] = cfg.transform.band_ks_threshold;
        transform_meta["min_band_samples"] = cfg.transform.min_band_samples;
        if (plan.band_partition) {
            const FourierBandPartition& p = *plan.band_partition;
            manifest["band_partition"] = {
                {"band_edges", p.band_edges},
                {"recorded_boundaries", p.recorded_boundaries},
                {"geometric_ratio", p.geometric_ratio},
                {"fit_residual", p.fit_residual},
                {"dropped_long_bands", p.dropped_long_bands}};
        }
    }
    manifest["transform"] = transform_meta;
    if (cfg.seed) manifest["seed"] = *cfg.seed;
    write_json_file(out_dir / "manifest.json", manifest);

    for (const json& e : errors)
        std::cerr << "input " << e.at("input").get<std::string>() << ": "
                  << e.at("error").get<std::string>() << '\n';
    if (blocks.empty()) {
        std::cerr << "no blocks produced\n";
        return 1;
    }
    std::cout << "wrote " << blocks.size() << " blocks to "
              << (out_dir / "blocks").string() << " (" << errors.size()
              << " input errors)\n";
    return 0;
}

int run_fit(const RunConfig& cfg,
            const std::vector<std::string>& block_patterns) {
    if (!cfg.seed) throw ConfigError("--seed is required for fit");
    const std::vector<std::string> files = resolve_inputs(block_patterns);
    const fs::path out_dir(cfg.out_dir);
    fs::create_directories(out_dir / "reports");

    UnitCdfCache cache;
    std::vector<FitRow> rows;
    std::set<std::string> used_names;
    for (std::size_t i = 0; i < files.size(); ++i) {
        FitRow row;
        row.path = files[i];
        CoefficientBlock block;
        try {
            block = read_block(files[i]);
        } catch (const std::exception& e) {
            row.error = e.what();
            rows.push_back(std::move(row));
            std::cerr << "block " << files[i] << ": " << e.what() << '\n';
            continue;
        }
        row.transform = block.meta.transform;
        row.dataset = block.meta.dataset;
        row.group = block.meta.group;
        row.channel = block.meta.channel;
        row.samples = block.values.size();
        try {
            const std::uint64_t block_seed = derive_seed(*cfg.seed, i);
            FitResult fit = fit_block(block, cfg.grid, cfg.trims, cache,
                                      block_seed, cfg.subsample_cap);
            fit.category =
                categorize(fit, block.values.size(), cfg.thresholds);
            row.ks = fit.ks;
            row.p_value = fit.p_value;
            row.category = std::string(to_string(fit.category));
            row.statistical = fit.category == FitCategory::statistical_pass;
            row.combined = is_pass(row.category);
            row.lper = fit.region_intersects_lper;

            std::string name = fs::path(files[i]).stem().string();
            if (!used_names.insert(name).second) {
                name += "_" + std::to_string(i);
                used_names.insert(name);
            }
            write_json_file(out_dir / "reports" / (name + ".json"),
                            fit_report_json(block, fit, block_seed));
        } catch (const std::exception& e) {
            row.error = e.what();
            std::cerr << "block " << files[i] << ": " << e.what() << '\n';
        }
        rows.push_back(std::move(row));
    }

    write_fits_csv(out_dir / "fits.csv", rows);
    write_aggregate_csv(out_dir / "aggregate.csv", rows);
    const std::size_t ok = static_cast<std::size_t>(std::count_if(
        rows.begin(), rows.end(),
        [](const FitRow& r) { return r.error.empty(); }));
    std::cout << "fitted " << ok << "/" << rows.size() << " blocks -> "
              << (out_dir / "fits.csv").string() << '\n';
    return ok > 0 ? 0 : 1;
}

int run_independence(const RunConfig& cfg,
                     const std::vector<std::string>& block_patterns,
                     const std::string& out_file) {
    if (!cfg.seed) throw ConfigError("--seed is required for independence");
    const std::vector<std::string> files = resolve_inputs(block_patterns);
    if (files.size() < 2)
        throw ConfigError(
            "independence diagnostics need at least two blocks");
    std::vector<CoefficientBlock> blocks;
    std::vector<std::string> labels;
    blocks.reserve(files.size());
    for (const std::string& file : files) {
        blocks.push_back(read_block(file));
        labels.push_back(blocks.back().meta.group + "#c" +
                         std::to_string(blocks.back().meta.channel));
    }
    IndependenceReport report;
    try {
        const std::vector<std::vector<double>> profiles =
            abs_mean_profiles(blocks);
        report =
            independence_report(profiles, *cfg.seed, cfg.independence_boot);
    } catch (const Error& e) {
        std::ostringstream msg;
        msg << e.what() << " (groups:";
        for (const std::string& l : labels) msg << ' ' << l;
        msg << ')';
        throw ConfigError(msg.str());
    }
    json out{{"command", "independence"},
             {"n_groups", report.n_groups},
             {"groups", labels},
             {"rel_frobenius", report.rel_frobenius},
             {"cosine",
              {{"median", report.quantiles.median},
               {"p90", report.quantiles.p90},
               {"max", report.quantiles.max}}},
             {"cosine_distances", report.cosine_distances}};
    if (out_file.empty()) {
        std::cout << out.dump(2) << '\n';
    } else {
        write_json_file(out_file, out);
        std::cout << "wrote " << out_file << '\n';
    }
    return 0;
}

int run_dist(const DistRequest& req) {
    validate(req.params);
    std::ofstream file;
    if (!req.out_file.empty()) file = open_out(req.out_file);
    std::ostream& out = req.out_file.empty() ? std::cout : file;

    if (req.action == "sample") {
        if (!req.seed)
            throw ConfigError("--seed is required for dist sample");
        const std::vector<double> draws =
            draw_samples(req.params, req.n, *req.seed);
        for (double v : draws) out << num(v) << '\n';
        return 0;
    }
    if (req.action == "moment") {
        out << num(moment(req.params, static_cast<int>(req.n))) << '\n';
        return 0;
    }
    if (req.points < 2)
        throw ConfigError("--points must be at least 2");
    if (!(req.lo < req.hi))
        throw ConfigError("--lo must be below --hi");
    const double step = (req.hi - req.lo) /
                        static_cast<double>(req.points - 1);
    if (req.action == "cdf") {
        const TabulatedCdf table = tabulate_cdf(req.params);
        out << "x,cdf\n";
        for (std::size_t i = 0; i < req.points; ++i) {
            const double x = req.lo + static_cast<double>(i) * step;
            out << num(x) << ',' << num(table(x)) << '\n';
        }
        return 0;
    }
    if (req.action == "pdf") {
        out << "x,pdf\n";
        for (std::size_t i = 0; i < req.points; ++i) {
            const double x = req.lo + static_cast<double>(i) * step;
            out << num(x) << ',' << num(pdf(req.params, x)) << '\n';
        }
        return 0;
    }
    throw ConfigError("unknown dist action '" + req.action + "'");
}

int run_report(const std::vector<std::string>& report_patterns,
               const std::string& out_csv) {
    const std::vector<std::string> files = resolve_inputs(report_patterns);
    std::vector<FitRow> rows;
    for (const std::string& file : files) {
        std::ifstream in(file);
        if (!in) throw ConfigError("cannot open report: " + file);
        json j;
        try {
            in >> j;
            FitRow row;
            row.path = file;
            const json& block = j.at("block");
            row.transform = block.at("transform").get<std::string>();
            row.dataset = block.at("dataset").get<std::string>();
            row.group = block.at("group").get<std::string>();
            row.channel = block.at("channel").get<std::size_t>();
            row.samples = block.at("samples").get<std::size_t>();
            row.ks = j.at("ks").get<double>();
            row.p_value = j.at("p_value").get<double>();
            row.category = j.at("category").get<std::string>();
            row.statistical = row.category == "statistical_pass";
            row.combined = is_pass(row.category);
            row.lper = j.at("lper").at("intersects").get<bool>();
            rows.push_back(std::move(row));
        } catch (const json::exception& e) {
            throw ConfigError("report " + file + ": " + e.what());
        }
    }
    write_aggregate_csv(out_csv, rows);
    std::cout << "wrote " << out_csv << " (" << rows.size() << " reports)\n";
    return 0;
}

}  // namespace ggsm::cli
