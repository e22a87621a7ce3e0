#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "ggsm/blocks.hpp"
#include "ggsm/fitter.hpp"

namespace ggsm::cli {

/// Which sparsifying transform a run applies, and its knobs.
struct TransformSpec {
    /// "haar", "fourier", or "filterbank".
    std::string kind = "haar";
    /// Haar decomposition depth.
    std::size_t levels = 3;
    /// Filter bank JSON path; required when kind is "filterbank".
    std::string filterbank;
    /// Exchangeability threshold driving the wavelength band bisection.
    double band_ks_threshold = 0.01;
    /// Minimum coefficients per wavelength band.
    std::size_t min_band_samples = 100;
};

/// One run's declarative settings: a JSON config file merged with command
/// line overrides, then specialized by the grouping profile.
struct RunConfig {
    std::string dataset = "dataset";
    /// "natural", "medical", "remote_sensing", or "custom".
    std::string profile = "custom";
    std::vector<std::string> inputs;
    TransformSpec transform;
    StandardizeMode standardize = StandardizeMode::per_image;
    std::size_t patch_size = 64;
    /// Mirror every block around zero before writing.
    bool symmetrize = false;
    /// Collapse RGB inputs to luma before standardization.
    bool grayscale = false;
    GroupingPlan plan;
    GridSpec grid;
    TrimSpec trims;
    CategoryThresholds thresholds;
    int skew_boot = 200;
    double skew_alpha = 0.05;
    int independence_boot = 200;
    std::size_t subsample_cap = 100000;
    std::optional<std::uint64_t> seed;
    std::string out_dir = ".";

    /// Set when the config file or a flag touched a profile-managed field;
    /// a named profile refuses to silently override an explicit choice.
    bool explicit_standardize = false;
    bool explicit_symmetrize = false;
    bool explicit_merge_hv = false;
};

/// Configuration mistakes (unknown keys, illegal profile and transform
/// pairings, inputs that match nothing) reported before any work starts.
class ConfigError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// Parses the JSON config file into cfg. Unknown keys are rejected so a
/// typo cannot silently fall back to a default.
void load_config(const std::string& path, RunConfig& cfg);

/// Folds the named profile into the standardization, symmetrization and
/// orientation-merge choices, and rejects transform kinds the profile
/// rules out. "custom" leaves everything as configured.
void apply_profile(RunConfig& cfg);

/// Expands shell-style patterns via glob(3), each pattern's matches in
/// sorted order; a pattern that matches nothing is a ConfigError.
std::vector<std::string> resolve_inputs(
    const std::vector<std::string>& patterns);

StandardizeMode parse_standardize(const std::string& name);
std::string_view to_string(StandardizeMode mode);

}  // namespace ggsm::cli
