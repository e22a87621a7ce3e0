#include "ggsm/blocks.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <stdexcept>

#include <json.hpp>

#include "ggsm/ks.hpp"

namespace ggsm {

namespace {

/// Accumulates one block's values plus the per-image bookkeeping.
class BlockBuilder {
public:
    BlockBuilder(std::string group, std::size_t channel,
                 std::size_t n_images) {
        meta_.group = std::move(group);
        meta_.channel = channel;
        meta_.n_images = n_images;
        meta_.image_counts.assign(n_images, 0);
        abs_sums_.assign(n_images, 0.0);
    }

    void add(std::size_t image, double value) {
        values_.push_back(value);
        ++meta_.image_counts[image];
        abs_sums_[image] += std::fabs(value);
    }

    CoefficientBlock finish(const std::string& dataset,
                            const std::string& transform) {
        CoefficientBlock block;
        block.values = std::move(values_);
        block.meta = std::move(meta_);
        block.meta.dataset = dataset;
        block.meta.transform = transform;
        block.meta.image_abs_means.resize(abs_sums_.size());
        for (std::size_t i = 0; i < abs_sums_.size(); ++i)
            block.meta.image_abs_means[i] =
                block.meta.image_counts[i] == 0
                    ? 0.0
                    : abs_sums_[i] /
                          static_cast<double>(block.meta.image_counts[i]);
        return block;
    }

    bool empty() const { return values_.empty(); }

private:
    std::vector<double> values_;
    std::vector<double> abs_sums_;
    BlockMeta meta_;
};

/// Keyed builders that remember creation order, so assembly output order
/// is the deterministic first-encounter order.
class BlockSet {
public:
    explicit BlockSet(std::size_t n_images) : n_images_(n_images) {}

    BlockBuilder& at(const std::string& group, std::size_t channel) {
        const std::string key = group + '\x1f' + std::to_string(channel);
        const auto it = index_.find(key);
        if (it != index_.end()) return builders_[it->second];
        index_.emplace(key, builders_.size());
        builders_.emplace_back(group, channel, n_images_);
        return builders_.back();
    }

    std::vector<CoefficientBlock> finish(const std::string& dataset,
                                         const std::string& transform) {
        std::vector<CoefficientBlock> blocks;
        blocks.reserve(builders_.size());
        for (BlockBuilder& b : builders_)
            if (!b.empty()) blocks.push_back(b.finish(dataset, transform));
        return blocks;
    }

private:
    std::size_t n_images_;
    std::vector<BlockBuilder> builders_;
    std::map<std::string, std::size_t> index_;
};

void standardize_scope(std::vector<double*>& cells, ScopeStats& stats) {
    const double n = static_cast<double>(cells.size());
    double mean = 0.0;
    for (const double* p : cells) mean += *p;
    mean /= n;
    double ss = 0.0;
    for (const double* p : cells) ss += (*p - mean) * (*p - mean);
    const double sd = std::sqrt(ss / n);
    stats.mean = mean;
    stats.degenerate = sd == 0.0;
    stats.stddev = stats.degenerate ? 1.0 : sd;
    for (double* p : cells) *p = (*p - mean) / stats.stddev;
}

}  // namespace

StandardizeResult standardize(const ImageTensor& img, StandardizeMode mode,
                              std::size_t patch_size) {
    validate_image(img);
    if (patch_size == 0)
        throw std::invalid_argument("patch_size must be positive");
    StandardizeResult out;
    out.image = img;
    const std::size_t plane = img.plane_size();
    const std::size_t rank = img.dims.size();

    for (std::size_t c = 0; c < img.channels; ++c) {
        double* base = out.image.data.data() + c * plane;
        if (mode == StandardizeMode::per_image) {
            std::vector<double*> cells(plane);
            for (std::size_t i = 0; i < plane; ++i) cells[i] = base + i;
            ScopeStats stats;
            stats.channel = c;
            standardize_scope(cells, stats);
            out.degenerate |= stats.degenerate;
            out.scopes.push_back(std::move(stats));
            continue;
        }
        // Tile every spatial axis; edge tiles absorb the remainder below
        // one full patch.
        std::vector<std::size_t> origin(rank, 0);
        for (;;) {
            std::vector<std::size_t> extent(rank);
            for (std::size_t a = 0; a < rank; ++a)
                extent[a] = std::min(patch_size, img.dims[a] - origin[a]);
            std::vector<double*> cells;
            std::vector<std::size_t> idx(rank, 0);
            for (;;) {
                std::size_t offset = 0;
                for (std::size_t a = 0; a < rank; ++a)
                    offset = offset * img.dims[a] + origin[a] + idx[a];
                cells.push_back(base + offset);
                std::size_t a = rank;
                bool carried = true;
                while (a-- > 0) {
                    if (++idx[a] < extent[a]) {
                        carried = false;
                        break;
                    }
                    idx[a] = 0;
                }
                if (carried) break;
            }
            ScopeStats stats;
            stats.channel = c;
            stats.origin = origin;
            standardize_scope(cells, stats);
            out.degenerate |= stats.degenerate;
            out.scopes.push_back(std::move(stats));

            std::size_t a = rank;
            bool carried = true;
            while (a-- > 0) {
                origin[a] += patch_size;
                if (origin[a] < img.dims[a]) {
                    carried = false;
                    break;
                }
                origin[a] = 0;
            }
            if (carried) break;
        }
    }
    return out;
}

CoefficientBlock symmetrize(const CoefficientBlock& block) {
    CoefficientBlock out = block;
    out.values.reserve(2 * block.values.size());
    for (double v : block.values) out.values.push_back(-v);
    out.meta.symmetrized = true;
    for (std::size_t& count : out.meta.image_counts) count *= 2;
    return out;
}

std::vector<CoefficientBlock> assemble_blocks(
    std::span<const HaarDecomposition> decomps, const GroupingPlan& plan,
    const std::string& dataset) {
    if (decomps.empty()) throw PlanMismatch("empty decomposition ensemble");
    for (const HaarDecomposition& d : decomps) {
        if (d.n_levels != decomps.front().n_levels)
            throw PlanMismatch("mixed level counts in the ensemble");
        if (d.channels != decomps.front().channels)
            throw PlanMismatch("mixed channel counts in the ensemble");
        if (d.cropped_dims.size() != decomps.front().cropped_dims.size())
            throw PlanMismatch("mixed dimensionality in the ensemble");
    }
    BlockSet set(decomps.size());
    for (std::size_t i = 0; i < decomps.size(); ++i) {
        for (const HaarBand& band : decomps[i].bands) {
            if (band.layer == 1) continue;  // the normalized-away average
            std::string orientation = band.orientation;
            if (plan.merge_horizontal_vertical &&
                (orientation == "horizontal" || orientation == "vertical"))
                orientation = "horizontal+vertical";
            const std::string group =
                plan.per_layer
                    ? "layer" + std::to_string(band.layer) + ":" + orientation
                    : orientation;
            BlockBuilder& builder = set.at(group, band.channel);
            for (double v : band.values) builder.add(i, v);
        }
    }
    return set.finish(dataset, "haar");
}

std::vector<CoefficientBlock> assemble_blocks(
    std::span<const FourierCoefficients> spectra, const GroupingPlan& plan,
    const std::string& dataset) {
    if (spectra.empty()) throw PlanMismatch("empty spectrum ensemble");
    if (!plan.band_partition.has_value())
        throw PlanMismatch("fourier grouping requires a band partition");
    const FourierBandPartition& partition = *plan.band_partition;
    BlockSet set(spectra.size());
    const auto group_name = [&](int band, const char* part) {
        std::string name = "band" + std::to_string(band);
        if (!plan.merge_real_imag) name += std::string(":") + part;
        return name;
    };
    for (std::size_t i = 0; i < spectra.size(); ++i) {
        const FourierCoefficients& fc = spectra[i];
        for (std::size_t b = 0; b < fc.re.size(); ++b) {
            const int band = partition.band_of(fc.wavelength[b]);
            if (band < 0) continue;
            set.at(group_name(band, "real"), 0).add(i, fc.re[b]);
        }
        for (std::size_t b = 0; b < fc.re.size(); ++b) {
            const int band = partition.band_of(fc.wavelength[b]);
            // Self-conjugate bins carry no imaginary data.
            if (band < 0 || fc.weight[b] != 2.0) continue;
            set.at(group_name(band, "imag"), 0).add(i, fc.im[b]);
        }
    }
    return set.finish(dataset, "fourier");
}

std::vector<CoefficientBlock> assemble_blocks(
    std::span<const std::vector<FilterResponse>> responses,
    const GroupingPlan& plan, const std::string& dataset) {
    if (responses.empty()) throw PlanMismatch("empty response ensemble");
    for (const std::vector<FilterResponse>& image : responses) {
        if (image.size() != responses.front().size())
            throw PlanMismatch("mixed filter sets in the ensemble");
        for (std::size_t f = 0; f < image.size(); ++f)
            if (image[f].filter_id != responses.front()[f].filter_id)
                throw PlanMismatch("mixed filter sets in the ensemble");
    }
    BlockSet set(responses.size());
    for (std::size_t i = 0; i < responses.size(); ++i)
        for (const FilterResponse& r : responses[i]) {
            BlockBuilder& builder =
                set.at(plan.per_filter ? r.filter_id : "filters", 0);
            for (double v : r.values) builder.add(i, v);
        }
    return set.finish(dataset, "filterbank");
}

ScreenResult exchangeability_screen(const CoefficientBlock& a,
                                    const CoefficientBlock& b,
                                    double threshold) {
    const KsResult ks = ks_two_sample(a.values, b.values);
    ScreenResult out;
    out.statistic = ks.statistic;
    out.p_value = ks.p_value;
    out.exchangeable = ks.statistic < threshold;
    return out;
}

namespace {

constexpr char kBlockMagic[4] = {'G', 'S', 'M', 'B'};
constexpr std::uint16_t kBlockVersion = 1;

template <typename T>
void write_le(std::ofstream& out, T value) {
    char buf[sizeof(T)];
    std::memcpy(buf, &value, sizeof(T));
    out.write(buf, sizeof(T));
}

template <typename T>
T read_le(std::ifstream& in) {
    char buf[sizeof(T)];
    in.read(buf, sizeof(T));
    T value;
    std::memcpy(&value, buf, sizeof(T));
    return value;
}

}  // namespace

void write_block(const std::string& path, const CoefficientBlock& block,
                 bool sort_values) {
    nlohmann::json meta;
    meta["dataset"] = block.meta.dataset;
    meta["transform"] = block.meta.transform;
    meta["group"] = block.meta.group;
    meta["channel"] = block.meta.channel;
    meta["n_images"] = block.meta.n_images;
    meta["symmetrized"] = block.meta.symmetrized;
    meta["degenerate"] = block.meta.degenerate;
    meta["sorted"] = sort_values || block.meta.sorted;
    meta["image_counts"] = block.meta.image_counts;
    meta["image_abs_means"] = block.meta.image_abs_means;
    const std::string meta_text = meta.dump();

    std::ofstream out(path, std::ios::binary);
    if (!out) throw FormatError("cannot write block file: " + path);
    out.write(kBlockMagic, 4);
    write_le(out, kBlockVersion);
    write_le(out, static_cast<std::uint32_t>(meta_text.size()));
    out.write(meta_text.data(),
              static_cast<std::streamsize>(meta_text.size()));
    write_le(out, static_cast<std::uint64_t>(block.values.size()));
    std::vector<double> sorted_copy;
    const std::vector<double>* values = &block.values;
    if (sort_values) {
        sorted_copy = block.values;
        std::sort(sorted_copy.begin(), sorted_copy.end());
        values = &sorted_copy;
    }
    for (double v : *values) write_le(out, static_cast<float>(v));
    if (!out) throw FormatError("short write on block file: " + path);
}

CoefficientBlock read_block(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open block file: " + path);
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, kBlockMagic, 4) != 0)
        throw FormatError("bad block magic in " + path);
    if (read_le<std::uint16_t>(in) != kBlockVersion)
        throw FormatError("unsupported block version in " + path);
    const std::uint32_t meta_len = read_le<std::uint32_t>(in);
    std::string meta_text(meta_len, '\0');
    in.read(meta_text.data(), meta_len);
    if (!in) throw FormatError("truncated block metadata in " + path);

    CoefficientBlock block;
    try {
        const nlohmann::json meta = nlohmann::json::parse(meta_text);
        block.meta.dataset = meta.at("dataset").get<std::string>();
        block.meta.transform = meta.at("transform").get<std::string>();
        block.meta.group = meta.at("group").get<std::string>();
        block.meta.channel = meta.at("channel").get<std::size_t>();
        block.meta.n_images = meta.at("n_images").get<std::size_t>();
        block.meta.symmetrized = meta.at("symmetrized").get<bool>();
        block.meta.degenerate = meta.at("degenerate").get<bool>();
        block.meta.sorted = meta.at("sorted").get<bool>();
        block.meta.image_counts =
            meta.at("image_counts").get<std::vector<std::size_t>>();
        block.meta.image_abs_means =
            meta.at("image_abs_means").get<std::vector<double>>();
    } catch (const nlohmann::json::exception& e) {
        throw FormatError("bad block metadata in " + path + ": " + e.what());
    }
    const std::uint64_t count = read_le<std::uint64_t>(in);
    if (!in) throw FormatError("truncated block header in " + path);
    block.values.resize(count);
    for (std::uint64_t i = 0; i < count; ++i) {
        const float v = read_le<float>(in);
        if (!in) throw FormatError("truncated block values in " + path);
        if (!std::isfinite(v))
            throw FormatError("non-finite block value in " + path);
        block.values[i] = v;
    }
    return block;
}

}  // namespace ggsm
