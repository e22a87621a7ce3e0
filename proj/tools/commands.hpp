#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ggsm/prior.hpp"
#include "run_config.hpp"

namespace ggsm::cli {

/// Standardizes the configured inputs, applies the sparsifying transform,
/// assembles coefficient blocks and writes them plus a manifest under
/// cfg.out_dir. Per-input failures are collected, not fatal; the run fails
/// only when no block survives.
int run_transform(const RunConfig& cfg);

/// Fits every block file to the three-parameter prior, writing a JSON
/// report per block plus fits.csv (one row per block, error rows included)
/// and aggregate.csv (one row per transform and dataset) under cfg.out_dir.
int run_fit(const RunConfig& cfg,
            const std::vector<std::string>& block_patterns);

/// Cross-group independence diagnostics over the per-image mean absolute
/// coefficient profiles of the given blocks; JSON to out_file or stdout.
int run_independence(const RunConfig& cfg,
                     const std::vector<std::string>& block_patterns,
                     const std::string& out_file);

/// One direct query against the prior itself.
struct DistRequest {
    GsmParams params;
    /// "sample", "cdf", "pdf", or "moment".
    std::string action;
    std::size_t n = 10;
    std::optional<std::uint64_t> seed;
    double lo = -10.0;
    double hi = 10.0;
    std::size_t points = 201;
    /// Empty writes to stdout.
    std::string out_file;
};
int run_dist(const DistRequest& req);

/// Re-aggregates previously written per-block fit reports into the same
/// aggregate.csv layout run_fit produces.
int run_report(const std::vector<std::string>& report_patterns,
               const std::string& out_csv);

}  // namespace ggsm::cli
