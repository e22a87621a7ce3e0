#include <CLI11.hpp>
#include <cstdint>
#include <iostream>
#include <string>
#include <vector>

#include "commands.hpp"
#include "run_config.hpp"

namespace {

/// Flags override the config file; profiles are folded in last so an
/// explicit flag against a named profile fails instead of silently losing.
ggsm::cli::RunConfig base_config(const std::string& config_path) {
    ggsm::cli::RunConfig cfg;
    if (!config_path.empty()) ggsm::cli::load_config(config_path, cfg);
    return cfg;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{
        "generalized gamma scale mixture toolkit: turns image ensembles "
        "into coefficient blocks, fits the three-parameter prior, and runs "
        "independence diagnostics"};
    app.require_subcommand(1);

    auto* t = app.add_subcommand(
        "transform",
        "standardize inputs, apply a sparsifying transform, write blocks");
    std::string t_config;
    std::vector<std::string> t_inputs;
    std::string t_dataset;
    std::string t_profile;
    std::string t_kind;
    std::string t_bank;
    std::string t_standardize;
    std::string t_out;
    std::uint64_t t_seed = 0;
    std::size_t t_levels = 3;
    std::size_t t_patch = 64;
    bool t_symmetrize = false;
    bool t_grayscale = false;
    t->add_option("-c,--config", t_config, "JSON run configuration")
        ->check(CLI::ExistingFile);
    t->add_option("inputs", t_inputs,
                  "image files or glob patterns (replace config inputs)");
    t->add_option("--dataset", t_dataset, "dataset label stamped into blocks");
    t->add_option("--profile", t_profile,
                  "natural, medical, remote_sensing or custom");
    t->add_option("--transform", t_kind, "haar, fourier or filterbank");
    t->add_option("--levels", t_levels, "haar decomposition depth");
    t->add_option("--filterbank", t_bank, "filter bank JSON file");
    t->add_option("--standardize", t_standardize, "per_image or per_patch");
    t->add_option("--patch-size", t_patch, "standardization tile size");
    t->add_flag("--symmetrize", t_symmetrize, "mirror blocks around zero");
    t->add_flag("--grayscale", t_grayscale, "collapse RGB to luma first");
    t->add_option("--seed", t_seed, "base seed (drives the skew screen)");
    t->add_option("-o,--out", t_out, "output directory");

    auto* f = app.add_subcommand(
        "fit", "fit block files to the prior and summarize as CSV");
    std::string f_config;
    std::string f_out;
    std::vector<std::string> f_blocks;
    std::uint64_t f_seed = 0;
    std::size_t f_cap = 100000;
    f->add_option("-c,--config", f_config, "JSON run configuration")
        ->check(CLI::ExistingFile);
    f->add_option("blocks", f_blocks, "block files or glob patterns")
        ->required();
    f->add_option("--seed", f_seed, "base seed (per-block seeds derive)");
    f->add_option("--cap", f_cap, "subsample cap for KS scoring");
    f->add_option("-o,--out", f_out, "output directory");

    auto* ind = app.add_subcommand(
        "independence",
        "cross-group diagnostics over per-image coefficient profiles");
    std::string i_config;
    std::string i_out;
    std::vector<std::string> i_blocks;
    std::uint64_t i_seed = 0;
    int i_boot = 200;
    ind->add_option("-c,--config", i_config, "JSON run configuration")
        ->check(CLI::ExistingFile);
    ind->add_option("blocks", i_blocks, "block files or glob patterns")
        ->required();
    ind->add_option("--seed", i_seed, "bootstrap seed");
    ind->add_option("--boot", i_boot, "bootstrap replicates");
    ind->add_option("-o,--out", i_out, "JSON output file (stdout if omitted)");

    auto* d = app.add_subcommand("dist", "query the prior directly");
    ggsm::cli::DistRequest dist;
    d->add_option("--r", dist.params.r, "shape r (nonzero)");
    d->add_option("--eta", dist.params.eta, "shape eta (above -1.5)");
    d->add_option("--theta", dist.params.scale, "scale (positive)");
    d->add_option("-o,--out", dist.out_file, "output file (stdout if omitted)");
    d->require_subcommand(1);
    auto* d_sample =
        d->add_subcommand("sample", "draw seeded samples, one per line");
    std::uint64_t d_seed = 0;
    d_sample->add_option("-n,--n", dist.n, "number of samples");
    d_sample->add_option("--seed", d_seed, "sampler seed")->required();
    auto* d_cdf =
        d->add_subcommand("cdf", "CSV of x,cdf over a uniform grid");
    auto* d_pdf =
        d->add_subcommand("pdf", "CSV of x,pdf over a uniform grid");
    for (CLI::App* sub : {d_cdf, d_pdf}) {
        sub->add_option("--lo", dist.lo, "grid start");
        sub->add_option("--hi", dist.hi, "grid end");
        sub->add_option("--points", dist.points, "grid size");
    }
    auto* d_moment = d->add_subcommand("moment", "print the n-th moment");
    d_moment->add_option("-n,--order", dist.n, "moment order");
    for (CLI::App* sub : {d_sample, d_cdf, d_pdf, d_moment})
        sub->fallthrough();

    auto* rep = app.add_subcommand(
        "report", "re-aggregate per-block fit reports into aggregate.csv");
    std::vector<std::string> rep_files;
    std::string rep_out = "aggregate.csv";
    rep->add_option("reports", rep_files, "fit report JSONs or glob patterns")
        ->required();
    rep->add_option("-o,--out", rep_out, "output CSV path");

    CLI11_PARSE(app, argc, argv);

    try {
        if (t->parsed()) {
            ggsm::cli::RunConfig cfg = base_config(t_config);
            if (t->count("inputs")) cfg.inputs = t_inputs;
            if (t->count("--dataset")) cfg.dataset = t_dataset;
            if (t->count("--profile")) cfg.profile = t_profile;
            if (t->count("--transform")) cfg.transform.kind = t_kind;
            if (t->count("--levels")) cfg.transform.levels = t_levels;
            if (t->count("--filterbank")) cfg.transform.filterbank = t_bank;
            if (t->count("--standardize")) {
                cfg.standardize = ggsm::cli::parse_standardize(t_standardize);
                cfg.explicit_standardize = true;
            }
            if (t->count("--patch-size")) cfg.patch_size = t_patch;
            if (t->count("--symmetrize")) {
                cfg.symmetrize = t_symmetrize;
                cfg.explicit_symmetrize = true;
            }
            if (t->count("--grayscale")) cfg.grayscale = t_grayscale;
            if (t->count("--seed")) cfg.seed = t_seed;
            if (t->count("--out")) cfg.out_dir = t_out;
            ggsm::cli::apply_profile(cfg);
            return ggsm::cli::run_transform(cfg);
        }
        if (f->parsed()) {
            ggsm::cli::RunConfig cfg = base_config(f_config);
            if (f->count("--seed")) cfg.seed = f_seed;
            if (f->count("--cap")) cfg.subsample_cap = f_cap;
            if (f->count("--out")) cfg.out_dir = f_out;
            return ggsm::cli::run_fit(cfg, f_blocks);
        }
        if (ind->parsed()) {
            ggsm::cli::RunConfig cfg = base_config(i_config);
            if (ind->count("--seed")) cfg.seed = i_seed;
            if (ind->count("--boot")) cfg.independence_boot = i_boot;
            return ggsm::cli::run_independence(cfg, i_blocks, i_out);
        }
        if (d->parsed()) {
            if (d_sample->parsed()) {
                dist.action = "sample";
                dist.seed = d_seed;
            } else if (d_cdf->parsed()) {
                dist.action = "cdf";
            } else if (d_pdf->parsed()) {
                dist.action = "pdf";
            } else {
                dist.action = "moment";
            }
            return ggsm::cli::run_dist(dist);
        }
        if (rep->parsed()) return ggsm::cli::run_report(rep_files, rep_out);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
