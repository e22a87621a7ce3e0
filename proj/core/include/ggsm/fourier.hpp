#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "ggsm/errors.hpp"
#include "ggsm/image.hpp"

namespace ggsm {

/// Unitary DFT of a real 2D plane, reduced to one representative per
/// conjugate pair. `weight` is 2 for bins whose conjugate partner was
/// discarded and 1 for self-conjugate bins (whose imaginary part is
/// structurally zero and stored as exactly 0). The DC coefficient is kept
/// separately and excluded from the retained bins; it is ~0 for
/// standardized input.
struct FourierCoefficients {
    std::size_t rows = 0;
    std::size_t cols = 0;
    double dc = 0.0;
    std::vector<double> re;
    std::vector<double> im;
    std::vector<double> weight;
    /// Spatial wavelength in pixels per cycle: 1/|(ky/rows, kx/cols)| with
    /// frequency indices folded to their principal (smallest) alias.
    std::vector<double> wavelength;
    std::vector<std::uint32_t> ky;
    std::vector<std::uint32_t> kx;

    /// Full-grid energy: dc^2 + sum weight*(re^2 + im^2). Equals the pixel
    /// energy (Parseval, unitary normalization).
    double energy() const;
};

/// Transforms a single-channel 2D image. Throws std::invalid_argument for
/// other shapes.
FourierCoefficients fourier_transform(const ImageTensor& img);

/// Coefficient values pooled at one exact wavelength across an ensemble.
struct WavelengthGroup {
    double wavelength = 0.0;
    std::vector<double> values;
};

/// Wavelength bands produced by recursive exchangeability-driven bisection
/// and snapped to the least-squares geometric law.
struct FourierBandPartition {
    /// Decreasing wavelength boundaries; band i covers (edges[i+1], edges[i]].
    std::vector<double> band_edges;
    /// Raw split wavelengths recorded during recursion, decreasing.
    std::vector<double> recorded_boundaries;
    /// Fitted multiplicative factor between successive edges (> 1 whenever
    /// the input spans more than one distinct wavelength).
    double geometric_ratio = 1.0;
    /// RMS residual of the recorded log-boundaries from the fitted line.
    double fit_residual = 0.0;
    /// Long-wavelength bands removed for falling below the sample floor.
    std::size_t dropped_long_bands = 0;

    std::size_t n_bands() const {
        return band_edges.size() < 2 ? 0 : band_edges.size() - 1;
    }
    /// Band id for a wavelength, counted from the longest retained band;
    /// -1 in the dropped long-wavelength range. The shortest band absorbs
    /// anything below the last edge.
    int band_of(double wavelength) const;
};

/// Recursive bisection in log-wavelength: split at the log-midpoint, stop
/// when the two-sample KS statistic between the halves' pooled values is
/// at most ks_threshold or either half falls below min_band_samples. The
/// recorded boundaries are fitted to a geometric sequence (least squares
/// on logs) and the band edges snapped to the fit; long-wavelength bands
/// whose snapped sample count is below the floor are discarded. Throws
/// DegeneratePartition when the pooled input is below the floor.
FourierBandPartition partition_bands(std::span<const WavelengthGroup> groups,
                                     double ks_threshold = 0.01,
                                     std::size_t min_band_samples = 100);

}  // namespace ggsm
