#include "ggsm/haar.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace ggsm {

namespace {

const double kInvSqrt2 = 0.7071067811865475244;

std::size_t product(const std::vector<std::size_t>& e) {
    std::size_t n = 1;
    for (std::size_t d : e) n *= d;
    return n;
}

std::vector<std::size_t> strides_of(const std::vector<std::size_t>& e) {
    std::vector<std::size_t> s(e.size());
    s.back() = 1;
    for (std::size_t a = e.size() - 1; a-- > 0;) s[a] = s[a + 1] * e[a + 1];
    return s;
}

/// In-place pairwise averages/differences along one axis: the low half of
/// the axis receives (p+q)/sqrt2, the high half (p-q)/sqrt2.
void axis_step(std::vector<double>& buf, const std::vector<std::size_t>& e,
               std::size_t axis) {
    const auto stride = strides_of(e);
    const std::size_t m = e[axis];
    const std::size_t half = m / 2;
    const std::size_t st = stride[axis];
    std::vector<double> line(m);

    // Odometer over every axis except `axis`.
    std::vector<std::size_t> idx(e.size(), 0);
    while (true) {
        std::size_t base = 0;
        for (std::size_t a = 0; a < e.size(); ++a) base += idx[a] * stride[a];
        for (std::size_t i = 0; i < m; ++i) line[i] = buf[base + i * st];
        for (std::size_t i = 0; i < half; ++i) {
            buf[base + i * st] = (line[2 * i] + line[2 * i + 1]) * kInvSqrt2;
            buf[base + (half + i) * st] =
                (line[2 * i] - line[2 * i + 1]) * kInvSqrt2;
        }

        std::size_t a = e.size();
        bool carried = true;
        while (a-- > 0) {
            if (a == axis) continue;
            if (++idx[a] < e[a]) {
                carried = false;
                break;
            }
            idx[a] = 0;
        }
        if (carried) break;
    }
}

/// Inverse of axis_step.
void axis_unstep(std::vector<double>& buf, const std::vector<std::size_t>& e,
                 std::size_t axis) {
    const auto stride = strides_of(e);
    const std::size_t m = e[axis];
    const std::size_t half = m / 2;
    const std::size_t st = stride[axis];
    std::vector<double> line(m);

    std::vector<std::size_t> idx(e.size(), 0);
    while (true) {
        std::size_t base = 0;
        for (std::size_t a = 0; a < e.size(); ++a) base += idx[a] * stride[a];
        for (std::size_t i = 0; i < m; ++i) line[i] = buf[base + i * st];
        for (std::size_t i = 0; i < half; ++i) {
            buf[base + 2 * i * st] = (line[i] + line[half + i]) * kInvSqrt2;
            buf[base + (2 * i + 1) * st] =
                (line[i] - line[half + i]) * kInvSqrt2;
        }

        std::size_t a = e.size();
        bool carried = true;
        while (a-- > 0) {
            if (a == axis) continue;
            if (++idx[a] < e[a]) {
                carried = false;
                break;
            }
            idx[a] = 0;
        }
        if (carried) break;
    }
}

/// Copies the orthant selected by `mask` (bit a set = high half of axis a)
/// between the level buffer (extents e) and a compact block (extents e/2).
void move_orthant(std::vector<double>& buf, const std::vector<std::size_t>& e,
                  unsigned mask, std::vector<double>& block, bool extract) {
    const auto stride = strides_of(e);
    std::vector<std::size_t> h(e.size());
    std::size_t offset = 0;
    for (std::size_t a = 0; a < e.size(); ++a) {
        h[a] = e[a] / 2;
        if (mask & (1u << (e.size() - 1 - a))) offset += h[a] * stride[a];
    }
    if (extract) block.resize(product(h));

    std::vector<std::size_t> idx(e.size(), 0);
    std::size_t flat = 0;
    while (true) {
        std::size_t pos = offset;
        for (std::size_t a = 0; a < e.size(); ++a) pos += idx[a] * stride[a];
        if (extract) {
            block[flat] = buf[pos];
        } else {
            buf[pos] = block[flat];
        }
        ++flat;

        std::size_t a = e.size();
        bool carried = true;
        while (a-- > 0) {
            if (++idx[a] < h[a]) {
                carried = false;
                break;
            }
            idx[a] = 0;
        }
        if (carried) break;
    }
}

std::string orientation_label(unsigned mask, std::size_t rank) {
    if (rank == 2) {
        // Bit layout (y, x): D along y only is the horizontal detail.
        switch (mask) {
            case 0b10: return "horizontal";
            case 0b01: return "vertical";
            default: return "diagonal";
        }
    }
    std::string label(rank, 'A');
    for (std::size_t a = 0; a < rank; ++a) {
        if (mask & (1u << (rank - 1 - a))) label[a] = 'D';
    }
    return label;
}

}  // namespace

HaarDecomposition haar_transform(const ImageTensor& img, int n_levels) {
    validate_image(img);
    if (n_levels < 1) throw std::invalid_argument("n_levels must be >= 1");
    const std::size_t rank = img.dims.size();
    const std::size_t block = std::size_t{1} << n_levels;

    HaarDecomposition out;
    out.n_levels = n_levels;
    out.channels = img.channels;
    out.cropped_dims.resize(rank);
    for (std::size_t a = 0; a < rank; ++a) {
        out.cropped_dims[a] = (img.dims[a] / block) * block;
        if (out.cropped_dims[a] == 0) {
            throw TooSmallImage("extent " + std::to_string(img.dims[a]) +
                                " below 2^" + std::to_string(n_levels));
        }
    }

    const auto in_strides = strides_of(img.dims);
    const unsigned n_orthants = 1u << rank;

    for (std::size_t c = 0; c < img.channels; ++c) {
        // Crop the channel plane from the top-left corner.
        std::vector<double> cur(product(out.cropped_dims));
        {
            std::vector<std::size_t> idx(rank, 0);
            std::size_t flat = 0;
            while (true) {
                std::size_t pos = c * img.plane_size();
                for (std::size_t a = 0; a < rank; ++a) {
                    pos += idx[a] * in_strides[a];
                }
                cur[flat++] = img.data[pos];
                std::size_t a = rank;
                bool carried = true;
                while (a-- > 0) {
                    if (++idx[a] < out.cropped_dims[a]) {
                        carried = false;
                        break;
                    }
                    idx[a] = 0;
                }
                if (carried) break;
            }
        }

        std::vector<std::size_t> e = out.cropped_dims;
        for (int level = 1; level <= n_levels; ++level) {
            for (std::size_t a = 0; a < rank; ++a) axis_step(cur, e, a);

            std::vector<std::size_t> half(rank);
            for (std::size_t a = 0; a < rank; ++a) half[a] = e[a] / 2;
            for (unsigned mask = 1; mask < n_orthants; ++mask) {
                HaarBand band;
                band.layer = n_levels - level + 2;
                band.orientation = orientation_label(mask, rank);
                band.channel = c;
                band.dims = half;
                move_orthant(cur, e, mask, band.values, true);
                out.bands.push_back(std::move(band));
            }

            std::vector<double> approx;
            move_orthant(cur, e, 0, approx, true);
            cur = std::move(approx);
            e = half;
        }

        HaarBand approx_band;
        approx_band.layer = 1;
        approx_band.orientation = "approximation";
        approx_band.channel = c;
        approx_band.dims = e;
        approx_band.values = std::move(cur);
        out.bands.push_back(std::move(approx_band));
    }
    return out;
}

ImageTensor haar_inverse(const HaarDecomposition& decomp) {
    const std::size_t rank = decomp.cropped_dims.size();
    const unsigned n_orthants = 1u << rank;

    ImageTensor img;
    img.dims = decomp.cropped_dims;
    img.channels = decomp.channels;
    img.data.resize(img.size());

    for (std::size_t c = 0; c < decomp.channels; ++c) {
        const HaarBand* approx = nullptr;
        for (const auto& b : decomp.bands) {
            if (b.channel == c && b.layer == 1) approx = &b;
        }
        if (approx == nullptr) {
            throw FormatError("decomposition lacks a layer-1 band");
        }
        std::vector<double> cur = approx->values;

        for (int level = decomp.n_levels; level >= 1; --level) {
            std::vector<std::size_t> e(rank);
            for (std::size_t a = 0; a < rank; ++a) {
                e[a] = decomp.cropped_dims[a] >> (level - 1);
            }
            std::vector<double> buf(product(e));
            move_orthant(buf, e, 0, cur, false);

            const int layer = decomp.n_levels - level + 2;
            for (unsigned mask = 1; mask < n_orthants; ++mask) {
                const std::string label = orientation_label(mask, rank);
                const HaarBand* band = nullptr;
                for (const auto& b : decomp.bands) {
                    if (b.channel == c && b.layer == layer &&
                        b.orientation == label) {
                        band = &b;
                    }
                }
                if (band == nullptr) {
                    throw FormatError("missing band: layer " +
                                      std::to_string(layer) + " " + label);
                }
                std::vector<double> values = band->values;
                move_orthant(buf, e, mask, values, false);
            }
            for (std::size_t a = rank; a-- > 0;) axis_unstep(buf, e, a);
            cur = std::move(buf);
        }
        std::copy(cur.begin(), cur.end(),
                  img.data.begin() +
                      static_cast<std::ptrdiff_t>(c * img.plane_size()));
    }
    return img;
}

}  // namespace ggsm
