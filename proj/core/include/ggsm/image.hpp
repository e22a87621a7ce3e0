#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "ggsm/errors.hpp"

namespace ggsm {

/// A 2D image or 3D volume with channel-major planar storage:
/// data[c * plane_size() + spatial_offset], spatial offsets row-major over
/// dims ({y, x} for 2D, {z, y, x} for 3D).
struct ImageTensor {
    std::vector<double> data;
    std::vector<std::size_t> dims;
    std::size_t channels = 1;
    std::string provenance;

    std::size_t plane_size() const {
        std::size_t n = 1;
        for (std::size_t d : dims) n *= d;
        return n;
    }
    std::size_t size() const { return plane_size() * channels; }

    double& at2(std::size_t c, std::size_t y, std::size_t x) {
        return data[(c * dims[0] + y) * dims[1] + x];
    }
    double at2(std::size_t c, std::size_t y, std::size_t x) const {
        return data[(c * dims[0] + y) * dims[1] + x];
    }
    double& at3(std::size_t c, std::size_t z, std::size_t y, std::size_t x) {
        return data[((c * dims[0] + z) * dims[1] + y) * dims[2] + x];
    }
    double at3(std::size_t c, std::size_t z, std::size_t y,
               std::size_t x) const {
        return data[((c * dims[0] + z) * dims[1] + y) * dims[2] + x];
    }
};

/// Enforces the tensor contract: 2 or 3 extents, each >= 2, 1 or 3 channels,
/// data sized to match, all values finite. Throws FormatError.
void validate_image(const ImageTensor& img);

/// Reads a PGM/PPM raster (P2, P3, P5, P6; maxval up to 65535, 16-bit
/// samples big-endian per the format) into a 2D tensor, or a raw float32
/// volume when `path` ends in ".raw" (see read_volume). Pixel values are
/// kept at their stored integer scale. Throws FormatError.
ImageTensor read_image(const std::string& path);

/// Writes a 2D tensor as binary PGM (1 channel) or PPM (3 channels) with
/// the given maxval (255 or 65535); values are clamped and rounded.
void write_pnm(const std::string& path, const ImageTensor& img, int maxval);

/// Reads a 3D volume stored as raw little-endian float32 with a JSON
/// sidecar at path + ".json" holding {"dims": [z, y, x], "dtype": "f32"}
/// and an optional "channels" (default 1). Throws FormatError.
ImageTensor read_volume(const std::string& path);

/// Writes the volume and its sidecar in the format read_volume expects.
void write_volume(const std::string& path, const ImageTensor& img);

/// Collapses a 3-channel 2D image to 1 channel with the standard luma
/// weights 0.299, 0.587, 0.114. Single-channel input passes through.
ImageTensor to_grayscale(const ImageTensor& img);

}  // namespace ggsm
