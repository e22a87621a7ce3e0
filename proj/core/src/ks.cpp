#include "ggsm/ks.hpp"

#include <algorithm>
#include <cmath>

namespace ggsm {

namespace {

std::vector<double> sorted_copy(std::span<const double> values,
                                const char* who) {
    if (values.empty()) throw EmptySample(std::string(who) + ": empty sample");
    std::vector<double> sorted(values.begin(), values.end());
    for (double v : sorted) {
        if (std::isnan(v)) {
            throw std::invalid_argument(std::string(who) + ": NaN in sample");
        }
    }
    std::sort(sorted.begin(), sorted.end());
    return sorted;
}

/// Reduces a sorted sample to at most cap regularly spaced order statistics
/// (first and last always kept).
std::vector<double> subsample_sorted(const std::vector<double>& sorted,
                                     std::size_t cap) {
    const std::size_t n = sorted.size();
    if (n <= cap) return sorted;
    std::vector<double> out;
    out.reserve(cap + 1);
    out.push_back(sorted.front());
    for (std::size_t k = 1; k <= cap; ++k) {
        const std::size_t rank = static_cast<std::size_t>(std::llround(
            static_cast<double>(k) * static_cast<double>(n) /
            static_cast<double>(cap)));
        const std::size_t idx = std::clamp<std::size_t>(rank, 1, n) - 1;
        if (sorted[idx] != out.back() || idx == 0) out.push_back(sorted[idx]);
    }
    return out;
}

}  // namespace

SubsampleBounds make_subsample_bounds(std::span<const double> sorted_values,
                                      std::size_t subsample_cap) {
    const std::size_t n = sorted_values.size();
    if (n == 0) throw EmptySample("make_subsample_bounds: empty sample");
    if (subsample_cap == 0) {
        throw std::invalid_argument("subsample cap must be positive");
    }
    SubsampleBounds bounds;
    const double nf = static_cast<double>(n);
    if (n <= subsample_cap) {
        bounds.x.assign(sorted_values.begin(), sorted_values.end());
        bounds.lo.resize(n);
        bounds.hi.resize(n);
        for (std::size_t i = 0; i < n; ++i) {
            bounds.lo[i] = static_cast<double>(i) / nf;
            bounds.hi[i] = static_cast<double>(i + 1) / nf;
        }
        return bounds;
    }
    bounds.subsampled = true;
    std::vector<std::size_t> ranks;
    ranks.reserve(subsample_cap + 1);
    ranks.push_back(1);
    for (std::size_t k = 1; k <= subsample_cap; ++k) {
        const std::size_t rank = std::clamp<std::size_t>(
            static_cast<std::size_t>(std::llround(
                static_cast<double>(k) * nf /
                static_cast<double>(subsample_cap))),
            1, n);
        if (rank != ranks.back()) ranks.push_back(rank);
    }
    bounds.x.reserve(ranks.size());
    bounds.lo.reserve(ranks.size());
    bounds.hi.reserve(ranks.size());
    for (std::size_t rank : ranks) {
        bounds.x.push_back(sorted_values[rank - 1]);
        bounds.lo.push_back(static_cast<double>(rank - 1) / nf);
        bounds.hi.push_back(static_cast<double>(rank) / nf);
    }
    return bounds;
}

KsResult ks_one_sample(std::span<const double> values,
                       const std::function<double(double)>& cdf,
                       std::size_t subsample_cap) {
    const std::vector<double> sorted = sorted_copy(values, "ks_one_sample");
    const SubsampleBounds bounds = make_subsample_bounds(sorted, subsample_cap);

    double sup = 0.0;
    for (std::size_t i = 0; i < bounds.x.size(); ++i) {
        const double f = cdf(bounds.x[i]);
        sup = std::max(sup, bounds.hi[i] - f);
        sup = std::max(sup, f - bounds.lo[i]);
    }

    KsResult result;
    result.statistic = sup;
    result.n_effective = static_cast<double>(sorted.size());
    result.subsampled = bounds.subsampled;
    result.p_value = kolmogorov_sf(sup, sorted.size());
    return result;
}

KsResult ks_two_sample(std::span<const double> a, std::span<const double> b,
                       std::size_t subsample_cap) {
    std::vector<double> sa = sorted_copy(a, "ks_two_sample");
    std::vector<double> sb = sorted_copy(b, "ks_two_sample");
    const double na = static_cast<double>(sa.size());
    const double nb = static_cast<double>(sb.size());
    const bool reduced = sa.size() > subsample_cap || sb.size() > subsample_cap;
    if (reduced) {
        sa = subsample_sorted(sa, subsample_cap);
        sb = subsample_sorted(sb, subsample_cap);
    }

    // Merge walk; ties advance both sides before the gap is measured.
    double sup = 0.0;
    std::size_t i = 0;
    std::size_t j = 0;
    const double ia = 1.0 / static_cast<double>(sa.size());
    const double ib = 1.0 / static_cast<double>(sb.size());
    while (i < sa.size() || j < sb.size()) {
        double value;
        if (i < sa.size() && (j >= sb.size() || sa[i] <= sb[j])) {
            value = sa[i];
        } else {
            value = sb[j];
        }
        while (i < sa.size() && sa[i] == value) ++i;
        while (j < sb.size() && sb[j] == value) ++j;
        const double gap = std::fabs(static_cast<double>(i) * ia -
                                     static_cast<double>(j) * ib);
        sup = std::max(sup, gap);
    }

    KsResult result;
    result.statistic = sup;
    result.n_effective = na * nb / (na + nb);
    result.subsampled = reduced;
    result.p_value = kolmogorov_sf_asymptotic(sup, result.n_effective);
    return result;
}

}  // namespace ggsm
