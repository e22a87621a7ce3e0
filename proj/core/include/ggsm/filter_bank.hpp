#pragma once

#include <array>
#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "ggsm/errors.hpp"
#include "ggsm/image.hpp"

namespace ggsm {

/// Labels a bank may assign to its filters.
inline constexpr std::array<std::string_view, 6> kFilterCategories = {
    "single-edge", "multi-edge", "eye", "color", "texture", "blob"};

/// One convolution kernel. Weights are row-major height x width x channels
/// (channel fastest).
struct Filter {
    std::string id;
    std::string category;
    std::size_t height = 0;
    std::size_t width = 0;
    std::size_t channels = 1;
    std::size_t stride = 1;
    std::vector<double> weights;

    double at(std::size_t y, std::size_t x, std::size_t c) const {
        return weights[(y * width + x) * channels + c];
    }
};

struct FilterBank {
    std::vector<Filter> filters;
    /// File the bank came from, empty for banks built in memory.
    std::string source;
};

/// Throws FormatError on empty/duplicate ids, categories outside
/// kFilterCategories, zero extents or stride, channel counts other than
/// 1 or 3, weight lists of the wrong length, or non-finite weights.
void validate_filter_bank(const FilterBank& bank);

/// JSON schema: {"version": 1, "filters": [{"id", "category", "height",
/// "width", "channels", "stride", "weights": row-major list}]}. The loaded
/// bank is validated; save_filter_bank validates before writing.
FilterBank load_filter_bank(const std::string& path);
void save_filter_bank(const std::string& path, const FilterBank& bank);

/// Valid-mode response map of one filter.
struct FilterResponse {
    std::string filter_id;
    std::string category;
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> values;
};

/// Valid-mode cross-correlation at the filter's stride: output extent
/// (image - kernel) / stride + 1 per axis. The filter's channel count must
/// equal the image's (std::invalid_argument). 2D images only. Throws
/// KernelLargerThanImage when the kernel does not fit.
FilterResponse apply_filter(const ImageTensor& img, const Filter& filter);

/// apply_filter for every filter in bank order.
std::vector<FilterResponse> apply_filter_bank(const ImageTensor& img,
                                              const FilterBank& bank);

}  // namespace ggsm
