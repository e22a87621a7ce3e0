#include "ggsm/filter_bank.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <stdexcept>

#include <json.hpp>

namespace ggsm {

namespace {

bool known_category(const std::string& label) {
    return std::find(kFilterCategories.begin(), kFilterCategories.end(),
                     label) != kFilterCategories.end();
}

}  // namespace

void validate_filter_bank(const FilterBank& bank) {
    std::set<std::string> seen;
    for (const Filter& f : bank.filters) {
        if (f.id.empty()) throw FormatError("filter with empty id");
        if (!seen.insert(f.id).second)
            throw FormatError("duplicate filter id: " + f.id);
        if (!known_category(f.category))
            throw FormatError("filter " + f.id + ": unknown category '" +
                              f.category + "'");
        if (f.height == 0 || f.width == 0)
            throw FormatError("filter " + f.id + ": zero kernel extent");
        if (f.channels != 1 && f.channels != 3)
            throw FormatError("filter " + f.id + ": channels must be 1 or 3");
        if (f.stride == 0)
            throw FormatError("filter " + f.id + ": stride must be positive");
        if (f.weights.size() != f.height * f.width * f.channels)
            throw FormatError("filter " + f.id + ": weight count " +
                              std::to_string(f.weights.size()) +
                              " does not match the declared extents");
        for (double w : f.weights)
            if (!std::isfinite(w))
                throw FormatError("filter " + f.id + ": non-finite weight");
    }
}

FilterBank load_filter_bank(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw FormatError("cannot open filter bank file: " + path);
    nlohmann::json doc;
    try {
        in >> doc;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError("filter bank " + path + ": " + e.what());
    }
    FilterBank bank;
    bank.source = path;
    try {
        if (doc.at("version").get<int>() != 1)
            throw FormatError("filter bank " + path +
                              ": unsupported version");
        for (const nlohmann::json& jf : doc.at("filters")) {
            Filter f;
            f.id = jf.at("id").get<std::string>();
            f.category = jf.at("category").get<std::string>();
            f.height = jf.at("height").get<std::size_t>();
            f.width = jf.at("width").get<std::size_t>();
            f.channels = jf.at("channels").get<std::size_t>();
            f.stride = jf.at("stride").get<std::size_t>();
            f.weights = jf.at("weights").get<std::vector<double>>();
            bank.filters.push_back(std::move(f));
        }
    } catch (const nlohmann::json::exception& e) {
        throw FormatError("filter bank " + path + ": " + e.what());
    }
    validate_filter_bank(bank);
    return bank;
}

void save_filter_bank(const std::string& path, const FilterBank& bank) {
    validate_filter_bank(bank);
    nlohmann::json doc;
    doc["version"] = 1;
    doc["filters"] = nlohmann::json::array();
    for (const Filter& f : bank.filters) {
        nlohmann::json jf;
        jf["id"] = f.id;
        jf["category"] = f.category;
        jf["height"] = f.height;
        jf["width"] = f.width;
        jf["channels"] = f.channels;
        jf["stride"] = f.stride;
        jf["weights"] = f.weights;
        doc["filters"].push_back(std::move(jf));
    }
    std::ofstream out(path);
    if (!out) throw FormatError("cannot write filter bank file: " + path);
    out << doc.dump(2) << '\n';
}

FilterResponse apply_filter(const ImageTensor& img, const Filter& filter) {
    validate_image(img);
    if (img.dims.size() != 2)
        throw std::invalid_argument("filter banks apply to 2D images only");
    if (filter.channels != img.channels)
        throw std::invalid_argument(
            "filter channel count does not match the image");
    const std::size_t rows = img.dims[0];
    const std::size_t cols = img.dims[1];
    if (filter.height > rows || filter.width > cols)
        throw KernelLargerThanImage("filter " + filter.id +
                                    " does not fit inside the image");
    FilterResponse out;
    out.filter_id = filter.id;
    out.category = filter.category;
    out.rows = (rows - filter.height) / filter.stride + 1;
    out.cols = (cols - filter.width) / filter.stride + 1;
    out.values.resize(out.rows * out.cols);
    for (std::size_t oy = 0; oy < out.rows; ++oy) {
        for (std::size_t ox = 0; ox < out.cols; ++ox) {
            double acc = 0.0;
            for (std::size_t c = 0; c < filter.channels; ++c)
                for (std::size_t y = 0; y < filter.height; ++y)
                    for (std::size_t x = 0; x < filter.width; ++x)
                        acc += img.at2(c, oy * filter.stride + y,
                                       ox * filter.stride + x) *
                               filter.at(y, x, c);
            out.values[oy * out.cols + ox] = acc;
        }
    }
    return out;
}

std::vector<FilterResponse> apply_filter_bank(const ImageTensor& img,
                                              const FilterBank& bank) {
    validate_filter_bank(bank);
    std::vector<FilterResponse> responses;
    responses.reserve(bank.filters.size());
    for (const Filter& f : bank.filters)
        responses.push_back(apply_filter(img, f));
    return responses;
}

}  // namespace ggsm
