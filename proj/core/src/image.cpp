#include "ggsm/image.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace ggsm {

namespace {

/// Reads one whitespace-delimited PNM header token, skipping '#' comments.
std::string next_token(std::istream& in) {
    std::string tok;
    int c = in.get();
    while (c != EOF) {
        if (c == '#') {
            while (c != EOF && c != '\n') c = in.get();
        } else if (std::isspace(c)) {
            c = in.get();
        } else {
            break;
        }
    }
    while (c != EOF && !std::isspace(c) && c != '#') {
        tok.push_back(static_cast<char>(c));
        c = in.get();
    }
    if (c == '#') in.unget();
    return tok;
}

std::size_t parse_count(const std::string& tok, const char* what) {
    if (tok.empty() ||
        !std::all_of(tok.begin(), tok.end(),
                     [](unsigned char c) { return std::isdigit(c); })) {
        throw FormatError(std::string("bad PNM ") + what + " field: '" + tok +
                          "'");
    }
    return static_cast<std::size_t>(std::stoull(tok));
}

ImageTensor read_pnm(const std::string& path, std::ifstream& in,
                     const std::string& magic) {
    const bool ascii = (magic == "P2" || magic == "P3");
    const std::size_t channels = (magic == "P3" || magic == "P6") ? 3 : 1;
    const std::size_t width = parse_count(next_token(in), "width");
    const std::size_t height = parse_count(next_token(in), "height");
    const std::size_t maxval = parse_count(next_token(in), "maxval");
    if (maxval < 1 || maxval > 65535) {
        throw FormatError("PNM maxval out of range: " + std::to_string(maxval));
    }

    ImageTensor img;
    img.dims = {height, width};
    img.channels = channels;
    img.provenance = path;
    img.data.resize(height * width * channels);

    const std::size_t n_samples = height * width * channels;
    if (ascii) {
        for (std::size_t i = 0; i < n_samples; ++i) {
            unsigned long v = 0;
            if (!(in >> v) || v > maxval) {
                throw FormatError("truncated or invalid ASCII raster in " +
                                  path);
            }
            const std::size_t pixel = i / channels;
            const std::size_t c = i % channels;
            img.data[c * height * width + pixel] = static_cast<double>(v);
        }
        return img;
    }

    const int bytes = maxval > 255 ? 2 : 1;
    std::vector<unsigned char> raw(n_samples * bytes);
    in.read(reinterpret_cast<char*>(raw.data()),
            static_cast<std::streamsize>(raw.size()));
    if (static_cast<std::size_t>(in.gcount()) != raw.size()) {
        throw FormatError("truncated binary raster in " + path);
    }
    for (std::size_t i = 0; i < n_samples; ++i) {
        // Samples above 255 are two bytes, most significant first.
        const std::size_t v =
            bytes == 1 ? raw[i]
                       : (static_cast<std::size_t>(raw[2 * i]) << 8) |
                             raw[2 * i + 1];
        const std::size_t pixel = i / channels;
        const std::size_t c = i % channels;
        img.data[c * height * width + pixel] = static_cast<double>(v);
    }
    return img;
}

}  // namespace

void validate_image(const ImageTensor& img) {
    if (img.dims.size() != 2 && img.dims.size() != 3) {
        throw FormatError("image must have 2 or 3 extents, got " +
                          std::to_string(img.dims.size()));
    }
    for (std::size_t d : img.dims) {
        if (d < 2) throw FormatError("image extents must all be >= 2");
    }
    if (img.channels != 1 && img.channels != 3) {
        throw FormatError("channel count must be 1 or 3, got " +
                          std::to_string(img.channels));
    }
    if (img.data.size() != img.size()) {
        throw FormatError("image buffer size does not match extents");
    }
    for (double v : img.data) {
        if (!std::isfinite(v)) throw FormatError("non-finite pixel value");
    }
}

ImageTensor read_image(const std::string& path) {
    if (path.size() > 4 && path.compare(path.size() - 4, 4, ".raw") == 0) {
        return read_volume(path);
    }
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open image file: " + path);
    std::string magic = next_token(in);
    if (magic == "P2" || magic == "P3" || magic == "P5" || magic == "P6") {
        ImageTensor img = read_pnm(path, in, magic);
        validate_image(img);
        return img;
    }
    throw FormatError("unsupported image format (magic '" + magic + "') in " +
                      path);
}

void write_pnm(const std::string& path, const ImageTensor& img, int maxval) {
    validate_image(img);
    if (img.dims.size() != 2) {
        throw FormatError("write_pnm expects a 2D image");
    }
    if (maxval != 255 && maxval != 65535) {
        throw FormatError("write_pnm maxval must be 255 or 65535");
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw FormatError("cannot open for writing: " + path);
    out << (img.channels == 3 ? "P6" : "P5") << "\n"
        << img.dims[1] << " " << img.dims[0] << "\n"
        << maxval << "\n";
    const std::size_t plane = img.plane_size();
    for (std::size_t pixel = 0; pixel < plane; ++pixel) {
        for (std::size_t c = 0; c < img.channels; ++c) {
            const double clamped = std::clamp(
                std::round(img.data[c * plane + pixel]), 0.0,
                static_cast<double>(maxval));
            const auto v = static_cast<std::uint16_t>(clamped);
            if (maxval > 255) out.put(static_cast<char>(v >> 8));
            out.put(static_cast<char>(v & 0xff));
        }
    }
    if (!out) throw FormatError("write failed: " + path);
}

ImageTensor read_volume(const std::string& path) {
    std::ifstream side(path + ".json");
    if (!side) throw FormatError("missing volume sidecar: " + path + ".json");
    nlohmann::json meta;
    try {
        side >> meta;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("bad volume sidecar JSON: ") + e.what());
    }
    if (!meta.contains("dims") || !meta["dims"].is_array() ||
        meta["dims"].size() != 3) {
        throw FormatError("volume sidecar needs dims: [z, y, x]");
    }
    if (meta.value("dtype", "") != "f32") {
        throw FormatError("volume sidecar dtype must be \"f32\"");
    }

    ImageTensor img;
    for (const auto& d : meta["dims"]) {
        if (!d.is_number_unsigned() || d.get<std::size_t>() < 2) {
            throw FormatError("volume dims must be integers >= 2");
        }
        img.dims.push_back(d.get<std::size_t>());
    }
    img.channels = meta.value("channels", std::size_t{1});
    img.provenance = path;

    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open volume file: " + path);
    const std::size_t n = img.plane_size() * img.channels;
    std::vector<float> raw(n);
    in.read(reinterpret_cast<char*>(raw.data()),
            static_cast<std::streamsize>(n * sizeof(float)));
    if (static_cast<std::size_t>(in.gcount()) != n * sizeof(float)) {
        throw FormatError("truncated volume data in " + path);
    }
    img.data.assign(raw.begin(), raw.end());
    validate_image(img);
    return img;
}

void write_volume(const std::string& path, const ImageTensor& img) {
    validate_image(img);
    if (img.dims.size() != 3) {
        throw FormatError("write_volume expects a 3D volume");
    }
    nlohmann::json meta;
    meta["dims"] = img.dims;
    meta["dtype"] = "f32";
    meta["channels"] = img.channels;
    std::ofstream side(path + ".json");
    side << meta.dump() << "\n";
    if (!side) throw FormatError("cannot write sidecar: " + path + ".json");

    std::ofstream out(path, std::ios::binary);
    if (!out) throw FormatError("cannot open for writing: " + path);
    std::vector<float> raw(img.data.begin(), img.data.end());
    out.write(reinterpret_cast<const char*>(raw.data()),
              static_cast<std::streamsize>(raw.size() * sizeof(float)));
    if (!out) throw FormatError("write failed: " + path);
}

ImageTensor to_grayscale(const ImageTensor& img) {
    validate_image(img);
    if (img.channels == 1) return img;
    ImageTensor out;
    out.dims = img.dims;
    out.channels = 1;
    out.provenance = img.provenance;
    const std::size_t plane = img.plane_size();
    out.data.resize(plane);
    for (std::size_t i = 0; i < plane; ++i) {
        out.data[i] = 0.299 * img.data[i] + 0.587 * img.data[plane + i] +
                      0.114 * img.data[2 * plane + i];
    }
    return out;
}

}  // namespace ggsm
