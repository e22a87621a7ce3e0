#include "ggsm/fitter.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <set>
#include <stdexcept>
#include <thread>

#include "ggsm/classical.hpp"
#include "ggsm/ks.hpp"

namespace ggsm {

namespace {

/// Relative slack when snapping range ends onto the axis lattices.
constexpr double kLatticeSlack = 1e-9;
/// Floors keeping refined points inside the admissible (and numerically
/// sane) parameter domain.
constexpr double kMinR = 1e-4;
constexpr double kMinEta = -1.5 + 1e-4;
/// Scale exponents are clamped here so extreme shape corners still yield
/// an admissible (finite, positive) scale.
constexpr double kMaxLogScale = 700.0;
/// Bimodality heuristic: histogram resolution, the minimum peak height as
/// a fraction of the tallest bin, and the valley depth (relative to the
/// smaller peak) that separates two genuine modes.
constexpr std::size_t kModeBins = 64;
constexpr double kMinPeakFraction = 0.15;
constexpr double kValleyRatio = 0.5;
/// Degrees-of-freedom search window for the Student-t baseline.
constexpr double kDofMin = 0.3;
constexpr double kDofMax = 200.0;
constexpr int kDofCoarse = 25;
constexpr int kDofRefine = 9;

std::vector<double> axis_points(double lo, double hi, double fine,
                                double coarse, double limit) {
    if (!(lo < hi) || fine <= 0.0 || coarse <= 0.0)
        throw std::invalid_argument("empty or inverted grid range");
    std::vector<double> pts;
    const double inner_hi = std::min(hi, limit);
    const long k_lo = static_cast<long>(std::ceil(lo / fine - kLatticeSlack));
    const long k_hi =
        static_cast<long>(std::floor(inner_hi / fine + kLatticeSlack));
    for (long k = k_lo; k <= k_hi; ++k)
        pts.push_back(static_cast<double>(k) * fine);
    if (pts.empty() || pts.front() > lo + fine * kLatticeSlack)
        pts.insert(pts.begin(), lo);
    if (hi > limit) {
        const long m_lo =
            static_cast<long>(std::floor(limit / coarse + kLatticeSlack)) + 1;
        const long m_hi =
            static_cast<long>(std::floor(hi / coarse + kLatticeSlack));
        for (long m = m_lo; m <= m_hi; ++m)
            pts.push_back(static_cast<double>(m) * coarse);
    }
    return pts;
}

double variance_of_sorted(std::span<const double> sorted, std::size_t t) {
    const std::size_t n = sorted.size();
    if (n <= 2 * t + 1) throw OverTrimmed("trim " + std::to_string(t) +
                                          " leaves too few of " +
                                          std::to_string(n) + " values");
    const std::span<const double> kept = sorted.subspan(t, n - 2 * t);
    double mean = 0.0;
    for (double v : kept) mean += v;
    mean /= static_cast<double>(kept.size());
    double ss = 0.0;
    for (double v : kept) ss += (v - mean) * (v - mean);
    return ss / static_cast<double>(kept.size() - 1);
}

/// One usable trim: the count, the abscissa rescale 1/sqrt(trimmed
/// variance) that realizes variance matching against a unit-variance
/// table, and the variance itself (for the reported scale).
struct TrimmedScale {
    std::size_t t = 0;
    double x_scale = 0.0;
    double variance = 0.0;
};

std::vector<TrimmedScale> usable_trims(std::span<const double> sorted,
                                       std::span<const std::size_t> t_values) {
    std::vector<TrimmedScale> out;
    for (std::size_t t : t_values) {
        if (sorted.size() <= 2 * t + 1) continue;
        const double tv = variance_of_sorted(sorted, t);
        if (!std::isfinite(tv) || tv <= 0.0) continue;
        out.push_back({t, 1.0 / std::sqrt(tv), tv});
    }
    return out;
}

void parallel_for(std::size_t count,
                  const std::function<void(std::size_t)>& task) {
    const unsigned workers =
        std::min<unsigned>(std::thread::hardware_concurrency(),
                           static_cast<unsigned>(count));
    if (workers <= 1) {
        for (std::size_t i = 0; i < count; ++i) task(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (unsigned w = 0; w < workers; ++w)
        pool.emplace_back([&] {
            for (;;) {
                const std::size_t i = next.fetch_add(1);
                if (i >= count) return;
                try {
                    task(i);
                } catch (...) {
                    const std::lock_guard<std::mutex> lock(failure_mutex);
                    if (!failure) failure = std::current_exception();
                    return;
                }
            }
        });
    for (std::thread& t : pool) t.join();
    if (failure) std::rethrow_exception(failure);
}

/// Scores every seeded point in place (minimum KS over the trims, ties to
/// the smaller trim) and drops the ones whose tabulation failed.
std::vector<ScoredPoint> score_grid(std::vector<ScoredPoint> seeded,
                                    const SubsampleBounds& bounds,
                                    std::span<const TrimmedScale> trims,
                                    UnitCdfCache& cache) {
    std::vector<char> ok(seeded.size(), 0);
    parallel_for(seeded.size(), [&](std::size_t i) {
        ScoredPoint& point = seeded[i];
        const auto entry = cache.get(point.r, point.eta);
        if (entry->failed) return;
        double best = std::numeric_limits<double>::infinity();
        std::size_t best_t = 0;
        for (const TrimmedScale& trim : trims) {
            const double d = entry->cdf.sup_deviation(
                bounds.x, bounds.lo, bounds.hi, trim.x_scale);
            if (d < best) {
                best = d;
                best_t = trim.t;
            }
        }
        if (!std::isfinite(best)) return;
        point.ks = best;
        point.trim = best_t;
        ok[i] = 1;
    });
    std::vector<ScoredPoint> out;
    out.reserve(seeded.size());
    for (std::size_t i = 0; i < seeded.size(); ++i)
        if (ok[i]) out.push_back(seeded[i]);
    return out;
}

/// Canonical argmin order: KS, then trim, then r, then eta.
bool better(const ScoredPoint& a, const ScoredPoint& b) {
    if (a.ks != b.ks) return a.ks < b.ks;
    if (a.trim != b.trim) return a.trim < b.trim;
    if (a.r != b.r) return a.r < b.r;
    return a.eta < b.eta;
}

double trim_variance_of(std::span<const TrimmedScale> trims, std::size_t t) {
    for (const TrimmedScale& trim : trims)
        if (trim.t == t) return trim.variance;
    throw std::logic_error("winning trim missing from the usable set");
}

/// Variance-matched scale through logs, clamped so corner shapes whose
/// unit variance overflows still produce an admissible parameter triple.
double matched_scale_logspace(double r, double eta, double emp_var) {
    const double log_theta = std::log(emp_var) - log_unit_variance(r, eta);
    return std::exp(std::clamp(log_theta, -kMaxLogScale, kMaxLogScale));
}

double quantile_sorted(std::span<const double> sorted, double q) {
    const double h = q * static_cast<double>(sorted.size() - 1);
    const std::size_t lo = static_cast<std::size_t>(h);
    if (lo + 1 >= sorted.size()) return sorted.back();
    return sorted[lo] + (h - static_cast<double>(lo)) *
                            (sorted[lo + 1] - sorted[lo]);
}

}  // namespace

std::vector<double> GridSpec::r_points() const {
    if (r_min <= 0.0)
        throw std::invalid_argument("r grid must stay positive");
    return axis_points(r_min, r_max, inner_step, outer_step, inner_limit);
}

std::vector<double> GridSpec::eta_points() const {
    if (eta_min <= -1.5)
        throw std::invalid_argument("eta grid must stay above -1.5");
    return axis_points(eta_min, eta_max, inner_step, outer_step, inner_limit);
}

double GridSpec::step_r_at(double r) const {
    return r <= inner_limit + inner_step * kLatticeSlack ? inner_step
                                                         : outer_step;
}

double GridSpec::step_eta_at(double eta) const {
    return eta <= inner_limit + inner_step * kLatticeSlack ? inner_step
                                                           : outer_step;
}

double trimmed_variance(std::span<const double> values, std::size_t t) {
    std::vector<double> sorted(values.begin(), values.end());
    std::sort(sorted.begin(), sorted.end());
    return variance_of_sorted(sorted, t);
}

double match_scale(double r, double eta, double emp_var) {
    if (!std::isfinite(emp_var) || emp_var <= 0.0)
        throw std::invalid_argument("empirical variance must be positive");
    const double unit = variance(GsmParams{r, eta, 1.0});
    return emp_var / unit;
}

std::shared_ptr<const UnitCdfCache::Entry> UnitCdfCache::get(double r,
                                                             double eta) {
    const std::pair<double, double> key{r, eta};
    {
        const std::lock_guard<std::mutex> lock(mutex_);
        const auto it = entries_.find(key);
        if (it != entries_.end()) return it->second;
    }
    auto entry = std::make_shared<Entry>();
    try {
        entry->cdf = detail::tabulate_unit_variance(r, eta);
        entry->log_unit_variance = log_unit_variance(r, eta);
    } catch (const Error&) {
        entry->failed = true;
    }
    const std::lock_guard<std::mutex> lock(mutex_);
    const auto [it, inserted] = entries_.emplace(key, std::move(entry));
    return it->second;
}

std::size_t UnitCdfCache::size() const {
    const std::lock_guard<std::mutex> lock(mutex_);
    return entries_.size();
}

CoarseFit coarse_fit(const CoefficientBlock& block, const GridSpec& grid,
                     const TrimSpec& trims, UnitCdfCache& cache,
                     std::size_t subsample_cap) {
    if (block.values.empty()) throw EmptySample("empty coefficient block");
    std::vector<double> sorted = block.values;
    std::sort(sorted.begin(), sorted.end());
    const SubsampleBounds bounds =
        make_subsample_bounds(sorted, subsample_cap);
    const std::vector<TrimmedScale> scales =
        usable_trims(sorted, trims.t_grid);
    if (scales.empty())
        throw AllFitsDegenerate("no trim leaves a positive sample variance");

    const std::vector<double> r_pts = grid.r_points();
    const std::vector<double> eta_pts = grid.eta_points();
    std::vector<ScoredPoint> seeded;
    seeded.reserve(r_pts.size() * eta_pts.size());
    for (double r : r_pts)
        for (double eta : eta_pts)
            seeded.push_back({r, eta, 0.0, 0, grid.step_r_at(r),
                              grid.step_eta_at(eta)});

    CoarseFit fit;
    fit.scored = score_grid(std::move(seeded), bounds, scales, cache);
    if (fit.scored.empty())
        throw AllFitsDegenerate("every grid point failed tabulation");

    const ScoredPoint* best = &fit.scored.front();
    for (const ScoredPoint& point : fit.scored)
        if (better(point, *best)) best = &point;
    fit.ks = best->ks;
    fit.t0 = best->trim;
    fit.best = GsmParams{best->r, best->eta,
                         matched_scale_logspace(
                             best->r, best->eta,
                             trim_variance_of(scales, best->trim))};
    return fit;
}

std::string_view to_string(FitCategory category) {
    switch (category) {
        case FitCategory::statistical_pass: return "statistical_pass";
        case FitCategory::practical_pass: return "practical_pass";
        case FitCategory::borderline: return "borderline";
        case FitCategory::interesting_failure: return "interesting_failure";
        case FitCategory::trivial_failure: return "trivial_failure";
    }
    return "unknown";
}

std::string_view to_string(Baseline baseline) {
    switch (baseline) {
        case Baseline::gaussian: return "gaussian";
        case Baseline::laplace: return "laplace";
        case Baseline::student_t: return "student_t";
    }
    return "unknown";
}

std::map<Baseline, BaselineFit> fit_baselines(const CoefficientBlock& block,
                                              std::size_t subsample_cap) {
    if (block.values.empty()) throw EmptySample("empty coefficient block");
    std::vector<double> sorted = block.values;
    std::sort(sorted.begin(), sorted.end());
    const SubsampleBounds bounds =
        make_subsample_bounds(sorted, subsample_cap);
    const std::uint64_t n = sorted.size();

    const auto ks_of = [&](auto&& cdf) {
        double d = 0.0;
        for (std::size_t i = 0; i < bounds.x.size(); ++i) {
            const double f = cdf(bounds.x[i]);
            d = std::max(d, std::max(bounds.hi[i] - f, f - bounds.lo[i]));
        }
        return d;
    };

    std::map<Baseline, BaselineFit> out;
    const double var =
        sorted.size() > 1 ? variance_of_sorted(sorted, 0) : 0.0;
    if (!std::isfinite(var) || var <= 0.0) {
        // Degenerate block: nothing to match; report saturated misfits.
        for (Baseline b : {Baseline::gaussian, Baseline::laplace,
                           Baseline::student_t})
            out[b] = BaselineFit{0.0, 0.0, 1.0, 0.0};
        return out;
    }

    {
        const double sigma = std::sqrt(var);
        const double d = ks_of([&](double x) { return gaussian_cdf(x, sigma); });
        out[Baseline::gaussian] =
            BaselineFit{sigma, 0.0, d, kolmogorov_sf(d, n)};
    }
    {
        const double b = std::sqrt(var / 2.0);
        const double d = ks_of([&](double x) { return laplace_cdf(x, b); });
        out[Baseline::laplace] =
            BaselineFit{b, 0.0, d, kolmogorov_sf(d, n)};
    }
    {
        const double q75 = quantile_sorted(sorted, 0.75);
        const auto scale_for = [&](double dof) {
            // The variance exists only above dof 2; match the upper
            // quartile in the heavy-tailed regime.
            const double s = dof > 2.0 + 1e-9
                                 ? std::sqrt(var * (dof - 2.0) / dof)
                                 : q75 / student_t_quartile(dof);
            return std::isfinite(s) && s > 0.0 ? s : 0.0;
        };
        const auto eval = [&](double dof) {
            const double s = scale_for(dof);
            if (s == 0.0) return std::numeric_limits<double>::infinity();
            return ks_of([&](double x) { return student_t_cdf(x, dof, s); });
        };
        double best_dof = 0.0;
        double best_d = std::numeric_limits<double>::infinity();
        std::vector<double> dofs(kDofCoarse);
        for (int i = 0; i < kDofCoarse; ++i)
            dofs[i] = kDofMin * std::pow(kDofMax / kDofMin,
                                         static_cast<double>(i) /
                                             (kDofCoarse - 1));
        std::size_t best_i = 0;
        for (std::size_t i = 0; i < dofs.size(); ++i) {
            const double d = eval(dofs[i]);
            if (d < best_d) {
                best_d = d;
                best_dof = dofs[i];
                best_i = i;
            }
        }
        const double lo = dofs[best_i > 0 ? best_i - 1 : 0];
        const double hi = dofs[std::min(best_i + 1, dofs.size() - 1)];
        for (int j = 1; j <= kDofRefine; ++j) {
            const double dof =
                lo * std::pow(hi / lo,
                              static_cast<double>(j) / (kDofRefine + 1));
            const double d = eval(dof);
            if (d < best_d) {
                best_d = d;
                best_dof = dof;
            }
        }
        if (!std::isfinite(best_d))
            out[Baseline::student_t] = BaselineFit{0.0, 0.0, 1.0, 0.0};
        else
            out[Baseline::student_t] =
                BaselineFit{scale_for(best_dof), best_dof, best_d,
                            kolmogorov_sf(best_d, n)};
    }
    return out;
}

BlockFlags block_flags(std::span<const double> values, std::uint64_t seed,
                       int n_boot, double alpha, double zero_tol) {
    BlockFlags flags;
    if (values.empty()) return flags;
    std::size_t zeros = 0;
    for (double v : values)
        if (std::fabs(v) <= zero_tol) ++zeros;
    flags.zero_spike_fraction =
        static_cast<double>(zeros) / static_cast<double>(values.size());
    if (values.size() >= 30)
        flags.skew = skew_pretest(values, seed, n_boot, alpha);
    if (values.size() < 100) return flags;

    std::vector<double> sorted(values.begin(), values.end());
    std::sort(sorted.begin(), sorted.end());
    const double q01 = quantile_sorted(sorted, 0.01);
    const double q99 = quantile_sorted(sorted, 0.99);
    const double pad = 0.05 * (q99 - q01);
    const double lo = q01 - pad;
    const double hi = q99 + pad;
    if (!(hi > lo)) return flags;

    std::vector<double> counts(kModeBins, 0.0);
    for (double v : sorted) {
        if (v < lo || v > hi) continue;
        const auto bin = std::min<std::size_t>(
            kModeBins - 1,
            static_cast<std::size_t>((v - lo) / (hi - lo) *
                                     static_cast<double>(kModeBins)));
        counts[bin] += 1.0;
    }
    for (int pass = 0; pass < 2; ++pass) {
        std::vector<double> smoothed(kModeBins);
        for (std::size_t i = 0; i < kModeBins; ++i) {
            const double left = counts[i > 0 ? i - 1 : i];
            const double right = counts[i + 1 < kModeBins ? i + 1 : i];
            smoothed[i] = (left + 2.0 * counts[i] + right) / 4.0;
        }
        counts = std::move(smoothed);
    }
    const double top = *std::max_element(counts.begin(), counts.end());
    std::vector<std::size_t> peaks;
    for (std::size_t i = 0; i < kModeBins; ++i) {
        const double left = i > 0 ? counts[i - 1]
                                  : -std::numeric_limits<double>::infinity();
        const double right = i + 1 < kModeBins
                                 ? counts[i + 1]
                                 : -std::numeric_limits<double>::infinity();
        if (counts[i] >= left && counts[i] > right &&
            counts[i] >= kMinPeakFraction * top)
            peaks.push_back(i);
    }
    for (std::size_t a = 0; a + 1 < peaks.size() && !flags.bimodal; ++a)
        for (std::size_t b = a + 1; b < peaks.size() && !flags.bimodal;
             ++b) {
            double valley = counts[peaks[a]];
            for (std::size_t i = peaks[a] + 1; i < peaks[b]; ++i)
                valley = std::min(valley, counts[i]);
            flags.bimodal = valley < kValleyRatio *
                                         std::min(counts[peaks[a]],
                                                  counts[peaks[b]]);
        }
    return flags;
}

FitCategory categorize(const FitResult& fit, std::size_t n,
                       const CategoryThresholds& thresholds) {
    if (fit.p_value > thresholds.alpha && n > thresholds.min_samples)
        return FitCategory::statistical_pass;
    if (fit.ks < thresholds.practical_ks) return FitCategory::practical_pass;
    if (fit.ks < thresholds.borderline_ks) return FitCategory::borderline;
    const bool trivial = fit.flags.skew.excluded || fit.flags.bimodal ||
                         fit.flags.zero_spike_fraction > thresholds.zero_spike;
    return trivial ? FitCategory::trivial_failure
                   : FitCategory::interesting_failure;
}

FitResult refine_fit(const CoefficientBlock& block, const CoarseFit& coarse,
                     const GridSpec& grid, const TrimSpec& trims,
                     UnitCdfCache& cache, std::uint64_t seed,
                     std::size_t subsample_cap) {
    if (block.values.empty()) throw EmptySample("empty coefficient block");
    std::vector<double> sorted = block.values;
    std::sort(sorted.begin(), sorted.end());
    const SubsampleBounds bounds =
        make_subsample_bounds(sorted, subsample_cap);

    const double r0 = coarse.best.r;
    const double eta0 = coarse.best.eta;
    const double step_r =
        grid.step_r_at(r0) /
        (r0 < grid.fine_r_limit ? grid.fine_divisor : grid.refine_divisor);
    const double step_eta =
        grid.step_eta_at(eta0) /
        (eta0 < 0.0 ? grid.fine_divisor : grid.refine_divisor);
    const long span_r = std::lround(grid.step_r_at(r0) / step_r);
    const long span_eta = std::lround(grid.step_eta_at(eta0) / step_eta);

    std::set<std::size_t> trim_set;
    for (long delta : trims.refine_deltas) {
        const long t = std::max<long>(static_cast<long>(coarse.t0) + delta, 0);
        trim_set.insert(static_cast<std::size_t>(t));
    }
    const std::vector<std::size_t> trim_values(trim_set.begin(),
                                               trim_set.end());
    const std::vector<TrimmedScale> scales =
        usable_trims(sorted, trim_values);
    if (scales.empty())
        throw AllFitsDegenerate("no refinement trim leaves a usable variance");

    std::vector<ScoredPoint> seeded;
    for (long i = -span_r; i <= span_r; ++i) {
        const double r = r0 + static_cast<double>(i) * step_r;
        if (r < kMinR) continue;
        for (long j = -span_eta; j <= span_eta; ++j) {
            const double eta = eta0 + static_cast<double>(j) * step_eta;
            if (eta < kMinEta) continue;
            seeded.push_back({r, eta, 0.0, 0, step_r, step_eta});
        }
    }
    const std::vector<ScoredPoint> refined =
        score_grid(std::move(seeded), bounds, scales, cache);

    // Union of coarse and refined points; collisions keep the better score.
    std::map<std::pair<double, double>, ScoredPoint> merged;
    for (const ScoredPoint& point : coarse.scored)
        merged.emplace(std::make_pair(point.r, point.eta), point);
    for (const ScoredPoint& point : refined) {
        const auto [it, inserted] =
            merged.emplace(std::make_pair(point.r, point.eta), point);
        if (!inserted && better(point, it->second)) it->second = point;
    }

    FitResult result;
    const ScoredPoint* best = nullptr;
    for (const auto& [key, point] : merged)
        if (best == nullptr || better(point, *best)) best = &point;
    if (best == nullptr)
        throw AllFitsDegenerate("every grid point failed tabulation");

    const std::uint64_t n = block.values.size();
    result.ks = best->ks;
    result.t_star = best->trim;
    // The winning trim came from either trim set; recompute its variance.
    result.best = GsmParams{
        best->r, best->eta,
        matched_scale_logspace(best->r, best->eta,
                               variance_of_sorted(sorted, best->trim))};
    result.p_value = kolmogorov_sf(result.ks, n);

    const double threshold =
        std::max(ks_critical_value(0.05, n), 0.01);
    for (const auto& [key, point] : merged)
        if (point.ks < threshold) result.region.push_back(point);

    double p_lo = std::numeric_limits<double>::infinity();
    double p_hi = -std::numeric_limits<double>::infinity();
    for (const ScoredPoint& point : result.region) {
        if (std::fabs(point.eta) >= point.step_eta / 2.0) continue;
        const double p = 2.0 * point.r / (1.0 + point.r);
        result.region_intersects_lper = true;
        p_lo = std::min(p_lo, p);
        p_hi = std::max(p_hi, p);
    }
    if (result.region_intersects_lper) result.lper_p_range = {p_lo, p_hi};

    result.flags = block_flags(block.values, seed);
    result.baselines = fit_baselines(block, subsample_cap);
    result.category = categorize(result, n);
    return result;
}

FitResult fit_block(const CoefficientBlock& block, const GridSpec& grid,
                    const TrimSpec& trims, UnitCdfCache& cache,
                    std::uint64_t seed, std::size_t subsample_cap) {
    const CoarseFit coarse =
        coarse_fit(block, grid, trims, cache, subsample_cap);
    return refine_fit(block, coarse, grid, trims, cache, seed,
                      subsample_cap);
}

}  // namespace ggsm
