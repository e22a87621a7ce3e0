#include "ggsm/fourier.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <functional>
#include <mutex>
#include <stdexcept>
#include <vector>

#include "ggsm/ks.hpp"

namespace ggsm {

namespace {

/// FFTW plan creation and destruction mutate shared planner state and are
/// not thread safe; executing a finished plan is.
std::mutex fftw_planner_mutex;

/// Principal alias of frequency index k on an axis of extent n, as a
/// fraction of the sampling rate.
double folded_frequency(std::size_t k, std::size_t n) {
    return static_cast<double>(std::min(k, n - k)) / static_cast<double>(n);
}

/// Least-squares line y = a + b k through (k_i, y_i).
struct LineFit {
    double intercept = 0.0;
    double slope = 0.0;
    double rms_residual = 0.0;
};

LineFit fit_line(std::span<const double> k, std::span<const double> y) {
    const double n = static_cast<double>(k.size());
    double sk = 0.0, sy = 0.0, skk = 0.0, sky = 0.0;
    for (std::size_t i = 0; i < k.size(); ++i) {
        sk += k[i];
        sy += y[i];
        skk += k[i] * k[i];
        sky += k[i] * y[i];
    }
    LineFit fit;
    fit.slope = (n * sky - sk * sy) / (n * skk - sk * sk);
    fit.intercept = (sy - fit.slope * sk) / n;
    double ss = 0.0;
    for (std::size_t i = 0; i < k.size(); ++i) {
        const double r = y[i] - (fit.intercept + fit.slope * k[i]);
        ss += r * r;
    }
    fit.rms_residual = std::sqrt(ss / n);
    return fit;
}

}  // namespace

double FourierCoefficients::energy() const {
    double total = dc * dc;
    for (std::size_t i = 0; i < re.size(); ++i)
        total += weight[i] * (re[i] * re[i] + im[i] * im[i]);
    return total;
}

FourierCoefficients fourier_transform(const ImageTensor& img) {
    validate_image(img);
    if (img.dims.size() != 2 || img.channels != 1)
        throw std::invalid_argument(
            "fourier_transform expects a single-channel 2D image");
    const std::size_t rows = img.dims[0];
    const std::size_t cols = img.dims[1];
    const std::size_t half = cols / 2 + 1;

    std::vector<double> input(img.data);
    std::vector<std::complex<double>> spectrum(rows * half);
    fftw_plan plan = nullptr;
    {
        std::lock_guard<std::mutex> lock(fftw_planner_mutex);
        plan = fftw_plan_dft_r2c_2d(
            static_cast<int>(rows), static_cast<int>(cols), input.data(),
            reinterpret_cast<fftw_complex*>(spectrum.data()), FFTW_ESTIMATE);
    }
    if (plan == nullptr) throw Error("FFTW refused to plan an r2c transform");
    fftw_execute(plan);
    {
        std::lock_guard<std::mutex> lock(fftw_planner_mutex);
        fftw_destroy_plan(plan);
    }

    const double norm =
        1.0 / std::sqrt(static_cast<double>(rows) * static_cast<double>(cols));
    FourierCoefficients out;
    out.rows = rows;
    out.cols = cols;
    out.dc = spectrum[0].real() * norm;

    const std::size_t n_bins = rows * half;
    out.re.reserve(n_bins);
    out.im.reserve(n_bins);
    out.weight.reserve(n_bins);
    out.wavelength.reserve(n_bins);
    out.ky.reserve(n_bins);
    out.kx.reserve(n_bins);
    for (std::size_t ky = 0; ky < rows; ++ky) {
        for (std::size_t kx = 0; kx < half; ++kx) {
            if (ky == 0 && kx == 0) continue;
            // Columns kx = 0 and (even cols only) kx = cols/2 pair ky with
            // rows - ky inside themselves; keep the lower representative.
            const bool col_special =
                kx == 0 || (cols % 2 == 0 && kx == cols / 2);
            if (col_special && ky > rows / 2) continue;
            const bool self_conjugate =
                col_special && (ky == 0 || (rows % 2 == 0 && ky == rows / 2));
            const std::complex<double> bin = spectrum[ky * half + kx];
            out.re.push_back(bin.real() * norm);
            out.im.push_back(self_conjugate ? 0.0 : bin.imag() * norm);
            out.weight.push_back(self_conjugate ? 1.0 : 2.0);
            const double f = std::hypot(folded_frequency(ky, rows),
                                        folded_frequency(kx, cols));
            out.wavelength.push_back(1.0 / f);
            out.ky.push_back(static_cast<std::uint32_t>(ky));
            out.kx.push_back(static_cast<std::uint32_t>(kx));
        }
    }
    return out;
}

int FourierBandPartition::band_of(double wavelength) const {
    if (band_edges.size() < 2) return -1;
    if (wavelength > band_edges.front()) return -1;
    if (wavelength <= band_edges.back())
        return static_cast<int>(n_bands()) - 1;
    const auto it = std::upper_bound(band_edges.begin(), band_edges.end(),
                                     wavelength, std::greater<double>());
    return static_cast<int>(it - band_edges.begin()) - 1;
}

FourierBandPartition partition_bands(std::span<const WavelengthGroup> groups,
                                     double ks_threshold,
                                     std::size_t min_band_samples) {
    if (min_band_samples == 0)
        throw std::invalid_argument("min_band_samples must be positive");
    std::vector<const WavelengthGroup*> sorted;
    sorted.reserve(groups.size());
    std::size_t total = 0;
    for (const WavelengthGroup& g : groups) {
        if (!(std::isfinite(g.wavelength) && g.wavelength > 0.0))
            throw std::invalid_argument("group wavelength must be positive");
        if (g.values.empty()) continue;
        sorted.push_back(&g);
        total += g.values.size();
    }
    if (total < min_band_samples)
        throw DegeneratePartition(
            "pooled coefficient count is below the per-band sample floor");
    std::sort(sorted.begin(), sorted.end(),
              [](const WavelengthGroup* a, const WavelengthGroup* b) {
                  return a->wavelength < b->wavelength;
              });
    const double min_w = sorted.front()->wavelength;
    const double max_w = sorted.back()->wavelength;

    const auto pooled = [&](std::size_t lo, std::size_t hi) {
        std::vector<double> values;
        for (std::size_t i = lo; i < hi; ++i)
            values.insert(values.end(), sorted[i]->values.begin(),
                          sorted[i]->values.end());
        return values;
    };

    // Recursive bisection at the log-midpoint: keep a split only when both
    // halves clear the sample floor and their pooled values fail the
    // two-sample exchangeability check.
    std::vector<double> boundaries;
    const std::function<void(std::size_t, std::size_t)> recurse =
        [&](std::size_t lo, std::size_t hi) {
            if (sorted[lo]->wavelength == sorted[hi - 1]->wavelength) return;
            const double mid = std::sqrt(sorted[lo]->wavelength *
                                         sorted[hi - 1]->wavelength);
            std::size_t split = lo;
            while (split < hi && sorted[split]->wavelength <= mid) ++split;
            if (split == lo || split == hi) return;
            const std::vector<double> left = pooled(lo, split);
            const std::vector<double> right = pooled(split, hi);
            if (left.size() < min_band_samples ||
                right.size() < min_band_samples)
                return;
            if (ks_two_sample(left, right).statistic <= ks_threshold) return;
            boundaries.push_back(mid);
            recurse(lo, split);
            recurse(split, hi);
        };
    recurse(0, sorted.size());
    std::sort(boundaries.begin(), boundaries.end(), std::greater<double>());

    FourierBandPartition out;
    out.recorded_boundaries = boundaries;
    // The outermost edge sits a hair above the longest wavelength so the
    // top band, half open at the bottom, still contains it.
    const double top = max_w * (1.0 + 1e-12);
    if (boundaries.size() < 2) {
        out.band_edges.push_back(top);
        if (boundaries.size() == 1) out.band_edges.push_back(boundaries[0]);
        out.band_edges.push_back(min_w);
        out.fit_residual = 0.0;
        out.geometric_ratio =
            std::pow(out.band_edges.front() / out.band_edges.back(),
                     1.0 / static_cast<double>(out.n_bands()));
    } else {
        std::vector<double> ks(boundaries.size());
        std::vector<double> logs(boundaries.size());
        for (std::size_t i = 0; i < boundaries.size(); ++i) {
            ks[i] = static_cast<double>(i + 1);
            logs[i] = std::log(boundaries[i]);
        }
        const LineFit fit = fit_line(ks, logs);
        out.geometric_ratio = std::exp(-fit.slope);
        out.fit_residual = fit.rms_residual;
        const std::size_t n_edges = boundaries.size() + 2;
        for (std::size_t k = 0; k < n_edges; ++k)
            out.band_edges.push_back(
                std::exp(fit.intercept + fit.slope * static_cast<double>(k)));
        out.band_edges.front() = std::max(out.band_edges.front(), top);
        out.band_edges.back() = std::min(out.band_edges.back(), min_w);
    }

    // Snapping can strand too few of the longest wavelengths in the top
    // band; fold such bands into the dropped range instead of fitting them.
    const auto band_count = [&](int band) {
        std::size_t count = 0;
        for (const WavelengthGroup* g : sorted)
            if (out.band_of(g->wavelength) == band) count += g->values.size();
        return count;
    };
    while (out.n_bands() > 1 && band_count(0) < min_band_samples) {
        out.band_edges.erase(out.band_edges.begin());
        ++out.dropped_long_bands;
    }
    return out;
}

}  // namespace ggsm
