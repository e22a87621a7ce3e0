#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ggsm/errors.hpp"
#include "ggsm/filter_bank.hpp"
#include "ggsm/fourier.hpp"
#include "ggsm/haar.hpp"
#include "ggsm/image.hpp"

namespace ggsm {

enum class StandardizeMode { per_image, per_patch };

/// Mean and spread of one standardization scope (a whole channel plane or
/// one patch of it), recorded so the transform stays invertible.
struct ScopeStats {
    std::size_t channel = 0;
    /// Patch origin in spatial coordinates; empty for whole-plane scopes.
    std::vector<std::size_t> origin;
    double mean = 0.0;
    double stddev = 1.0;
    /// Constant scope: centering still applies, scaling is skipped.
    bool degenerate = false;
};

struct StandardizeResult {
    ImageTensor image;
    std::vector<ScopeStats> scopes;
    /// True when any scope was constant.
    bool degenerate = false;
};

/// Centers and scales to zero mean and unit population standard deviation,
/// each channel separately. per_patch splits every spatial axis into tiles
/// of patch_size (edge tiles keep the remainder) and standardizes each tile
/// on its own. Constant scopes are flagged, not failed: their values come
/// out zero.
StandardizeResult standardize(const ImageTensor& img, StandardizeMode mode,
                              std::size_t patch_size = 64);

struct BlockMeta {
    std::string dataset;
    /// "haar", "fourier", or "filterbank".
    std::string transform;
    /// Group label, unique within a run: "layer3:horizontal", "band2",
    /// "band2:real", or a filter id.
    std::string group;
    std::size_t channel = 0;
    std::size_t n_images = 0;
    bool symmetrized = false;
    /// Set by callers when a contributing image had a constant scope.
    bool degenerate = false;
    /// True when the stored values are sorted ascending on disk.
    bool sorted = false;
    /// Per-image contribution sizes and mean absolute coefficients, in
    /// ensemble order; feeds the independence diagnostics.
    std::vector<std::size_t> image_counts;
    std::vector<double> image_abs_means;
};

struct CoefficientBlock {
    std::vector<double> values;
    BlockMeta meta;
};

/// Appends a negated copy of the values: exact symmetry, doubled size.
CoefficientBlock symmetrize(const CoefficientBlock& block);

/// Which merges apply during assembly. Haar blocks are keyed by layer,
/// orientation, and channel; merge_horizontal_vertical pools those two
/// orientations per layer and per_layer=false pools across layers. Fourier
/// blocks are keyed by wavelength band (band_partition is required), with
/// real and imaginary parts pooled unless merge_real_imag is off.
/// Filter-bank blocks are keyed by filter id, or pooled into one block
/// when per_filter is off.
struct GroupingPlan {
    bool merge_real_imag = true;
    bool merge_horizontal_vertical = false;
    bool per_layer = true;
    bool per_filter = true;
    std::optional<FourierBandPartition> band_partition;
};

/// Pools an ensemble of decompositions into flat blocks, concatenated in
/// image order then coefficient order, so assembly is reproducible
/// byte for byte. The layer-1 approximation is dropped (it is the image
/// mean, zero after standardization). Throws PlanMismatch when the
/// ensemble is empty or inconsistent (mixed level counts, channel counts,
/// or dimensionality).
std::vector<CoefficientBlock> assemble_blocks(
    std::span<const HaarDecomposition> decomps, const GroupingPlan& plan,
    const std::string& dataset);

/// Fourier assembly: every retained bin lands in the band its wavelength
/// maps to, real part first and imaginary part second per image; bins in
/// the dropped long-wavelength range are excluded. Self-conjugate bins
/// contribute only their real part (the imaginary part is structurally
/// zero, not data). Throws PlanMismatch without a band partition.
std::vector<CoefficientBlock> assemble_blocks(
    std::span<const FourierCoefficients> spectra, const GroupingPlan& plan,
    const std::string& dataset);

/// Filter-bank assembly; every image must carry the same filter ids in the
/// same order (PlanMismatch otherwise).
std::vector<CoefficientBlock> assemble_blocks(
    std::span<const std::vector<FilterResponse>> responses,
    const GroupingPlan& plan, const std::string& dataset);

struct ScreenResult {
    double statistic = 0.0;
    double p_value = 1.0;
    bool exchangeable = false;
};

/// Two-sample KS screen used to justify merges: exchangeable iff the
/// statistic is below the threshold. Throws EmptySample.
ScreenResult exchangeability_screen(const CoefficientBlock& a,
                                    const CoefficientBlock& b,
                                    double threshold = 0.01);

/// Block file: magic "GSMB", version u16, metadata length u32 and UTF-8
/// JSON, count u64, then float32 values little-endian. sort_values writes
/// the values ascending and records it in the metadata.
void write_block(const std::string& path, const CoefficientBlock& block,
                 bool sort_values = false);
CoefficientBlock read_block(const std::string& path);

}  // namespace ggsm
