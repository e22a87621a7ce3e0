#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "ggsm/errors.hpp"
#include "ggsm/image.hpp"

namespace ggsm {

/// One coefficient band of a multilevel Haar analysis.
///
/// Layers follow the convention that layer 1 is the approximation (the
/// image average when the decomposition is run to full depth) and detail
/// layers run 2..n_levels+1 from coarsest to finest, so a higher layer
/// number means higher frequency content.
///
/// 2D orientations are "horizontal" (difference along y, average along x),
/// "vertical" (average along y, difference along x), and "diagonal". 3D
/// orientations are 3-letter codes over the (z, y, x) axes with A for
/// average and D for difference, e.g. "DAD"; the seven detail codes are
/// every combination except "AAA".
struct HaarBand {
    int layer = 0;
    std::string orientation;
    std::size_t channel = 0;
    std::vector<std::size_t> dims;
    std::vector<double> values;
};

struct HaarDecomposition {
    std::vector<HaarBand> bands;
    int n_levels = 0;
    /// Input extents after the dyadic crop (top-left corner kept).
    std::vector<std::size_t> cropped_dims;
    std::size_t channels = 1;
};

/// Multilevel orthonormal Haar analysis (pairwise (p+q)/sqrt2, (p-q)/sqrt2
/// along each axis per level). Extents are cropped to the largest multiple
/// of 2^n_levels; throws TooSmallImage when an extent is below 2^n_levels.
/// Orthonormality makes the analysis energy preserving, so Parseval holds
/// exactly and the layer-1 coefficient is mean * sqrt(pixel count) at full
/// depth.
HaarDecomposition haar_transform(const ImageTensor& img, int n_levels);

/// Perfect-reconstruction inverse; returns the cropped-extent image.
ImageTensor haar_inverse(const HaarDecomposition& decomp);

}  // namespace ggsm
