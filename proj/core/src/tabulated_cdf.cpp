#include "ggsm/tabulated_cdf.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/special_functions/erf.hpp>
#include <boost/math/special_functions/gamma.hpp>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

namespace ggsm {

namespace {

static_assert(std::endian::native == std::endian::little,
              "cache format is little-endian");

/// Normal tail level at which the mixing integral over z is truncated.
const double kOuterTail = 1e-12;
/// Relative tolerance handed to the adaptive Gauss-Kronrod integrator.
const double kQuadRelTol = 1e-8;
/// Initial uniform knot count on the negative half-support.
const int kInitialKnots = 33;
/// Bisection depth cap; binds only when mass piles up at 0 (eta <= -1).
const int kMaxRefineDepth = 20;
/// exp() saturation threshold.
const double kExpLimit = 700.0;

const std::uint16_t kCacheVersion = 1;

double normal_pdf(double z) {
    return std::exp(-0.5 * z * z) / std::sqrt(2.0 * M_PI);
}

/// Survival of the mixing law, P(v > theta), with theta passed as log.
/// Saturates cleanly when (theta/scale)^r leaves double range.
double mixing_survival(double beta, double r, double log_scale,
                       double log_theta) {
    const double e = r * (log_theta - log_scale);
    if (e > kExpLimit) return r > 0.0 ? 0.0 : 1.0;
    if (e < -kExpLimit) {
        // u = exp(e) underflows, but P(g <= u) = u^beta / Gamma(beta+1)
        // (1 + O(u)) stays of order one when beta is tiny, so jumping to
        // the u -> 0 limit here would put a step into the integrand.
        const double log_p = beta * e - std::lgamma(beta + 1.0);
        const double p = log_p < -kExpLimit ? 0.0 : std::exp(log_p);
        return r > 0.0 ? 1.0 - p : p;
    }
    const double u = std::exp(e);
    return r > 0.0 ? boost::math::gamma_q(beta, u)
                   : boost::math::gamma_p(beta, u);
}

/// One CDF value F(T), T < 0, by quadrature over the standardized normal
/// factor. The integrand vanishes at z -> 0- and under the normal tail, so
/// the truncated interval carries all but kOuterTail of the value.
double cdf_negative(double T, double beta, double r, double log_scale,
                    double z_min) {
    const double log_abs_t = std::log(-T);
    // Integrate over s = ln(-z). The mixing survival's argument is linear
    // in s, so it traces one logistic-like step of width ~1/|r| instead of
    // a boundary layer the linear variable cannot resolve when r is small.
    // The e^s Jacobian bounds the discarded s < -40 tail by 4e-18.
    const double s_hi = std::log(-z_min);
    const double s_lo = -40.0;
    auto integrand = [&](double s) -> double {
        const double abs_z = std::exp(s);
        const double log_theta = 2.0 * (log_abs_t - s);
        return abs_z * normal_pdf(abs_z) *
               mixing_survival(beta, r, log_scale, log_theta);
    };
    double error = 0.0;
    double l1 = 0.0;
    double value;
    try {
        value = boost::math::quadrature::gauss_kronrod<double, 15>::integrate(
            integrand, s_lo, s_hi, 25, kQuadRelTol, &error, &l1);
    } catch (const std::exception& e) {
        throw QuadratureFailure(std::string("cdf quadrature: ") + e.what());
    }
    if (!std::isfinite(value) || (l1 > 0.0 && error > 1e-5 * l1 + 1e-14)) {
        std::ostringstream msg;
        msg << "cdf quadrature did not converge at T=" << T << " (error "
            << error << ", L1 " << l1 << ")";
        throw QuadratureFailure(msg.str());
    }
    return std::clamp(value, 0.0, 1.0);
}

struct Segment {
    double a, b;
    double fa, fb;
    int depth;
};

TabulatedCdf tabulate_impl(const GsmParams& record, double r, double eta,
                           double log_scale, double variance, double tail_eps,
                           double refine_tol) {
    if (!(tail_eps > 0.0 && tail_eps < 1.0)) {
        throw std::invalid_argument("tail_eps must lie in (0, 1)");
    }
    if (!(refine_tol > 0.0 && refine_tol < 1.0)) {
        throw std::invalid_argument("refine_tol must lie in (0, 1)");
    }
    const double beta = (eta + 1.5) / r;
    const double x_max = std::sqrt(variance / tail_eps);
    if (!std::isfinite(x_max)) {
        throw MomentUndefined("support bound overflows for this shape");
    }
    const double z_min = -std::sqrt(2.0) * boost::math::erfc_inv(2.0 * kOuterTail);

    auto eval = [&](double T) {
        if (T == 0.0) return 0.5;
        return cdf_negative(T, beta, r, log_scale, z_min);
    };

    // Negative half: uniform seed grid, then bisect any segment whose CDF
    // increment still exceeds the tolerance.
    std::map<double, double> table;
    std::vector<Segment> stack;
    {
        std::vector<double> seed(kInitialKnots);
        for (int i = 0; i < kInitialKnots; ++i) {
            seed[i] = -x_max + (x_max / (kInitialKnots - 1)) * i;
        }
        seed.back() = 0.0;
        std::vector<double> fs(seed.size());
        for (std::size_t i = 0; i < seed.size(); ++i) fs[i] = eval(seed[i]);
        for (std::size_t i = 0; i < seed.size(); ++i) table[seed[i]] = fs[i];
        for (std::size_t i = 0; i + 1 < seed.size(); ++i) {
            stack.push_back({seed[i], seed[i + 1], fs[i], fs[i + 1], 0});
        }
    }
    const double min_width = x_max * 1e-12;
    while (!stack.empty()) {
        const Segment s = stack.back();
        stack.pop_back();
        if (std::fabs(s.fb - s.fa) <= refine_tol) continue;
        if (s.depth >= kMaxRefineDepth || (s.b - s.a) <= min_width) continue;
        const double mid = 0.5 * (s.a + s.b);
        const double fm = eval(mid);
        table[mid] = fm;
        stack.push_back({s.a, mid, s.fa, fm, s.depth + 1});
        stack.push_back({mid, s.b, fm, s.fb, s.depth + 1});
    }

    // Assemble the symmetric table; reflection pins F(0) = 1/2 exactly and
    // a running max irons out quadrature noise below tolerance.
    std::vector<double> knots;
    std::vector<double> values;
    knots.reserve(2 * table.size());
    values.reserve(2 * table.size());
    for (const auto& [x, f] : table) {
        knots.push_back(x);
        values.push_back(std::clamp(f, 0.0, 1.0));
    }
    const std::size_t negative_count = knots.size();
    for (std::size_t i = negative_count - 1; i-- > 0;) {
        knots.push_back(-knots[i]);
        values.push_back(1.0 - values[i]);
    }
    double running = 0.0;
    for (double& v : values) {
        running = std::max(running, v);
        v = running;
    }
    return TabulatedCdf(record, std::move(knots), std::move(values));
}

}  // namespace

TabulatedCdf::TabulatedCdf(const GsmParams& params, std::vector<double> knots,
                           std::vector<double> values)
    : params_(params), knots_(std::move(knots)), values_(std::move(values)) {
    if (knots_.size() != values_.size() || knots_.size() < 2) {
        throw FormatError("tabulated cdf needs at least two (knot, value) pairs");
    }
    for (std::size_t i = 0; i < knots_.size(); ++i) {
        if (!std::isfinite(knots_[i]) || values_[i] < 0.0 || values_[i] > 1.0) {
            throw FormatError("tabulated cdf entries out of range");
        }
        if (i > 0 && !(knots_[i] > knots_[i - 1])) {
            throw FormatError("tabulated cdf knots must increase strictly");
        }
        if (i > 0 && values_[i] < values_[i - 1]) {
            throw FormatError("tabulated cdf values must be nondecreasing");
        }
    }
    build_slopes();
}

void TabulatedCdf::build_slopes() {
    // Fritsch-Carlson monotone slopes: harmonic-mean interior, clipped
    // three-point ends. Zero secants force zero slopes, so flat stretches
    // stay exactly flat.
    const std::size_t n = knots_.size();
    slopes_.assign(n, 0.0);
    std::vector<double> h(n - 1);
    std::vector<double> d(n - 1);
    for (std::size_t i = 0; i + 1 < n; ++i) {
        h[i] = knots_[i + 1] - knots_[i];
        d[i] = (values_[i + 1] - values_[i]) / h[i];
    }
    for (std::size_t i = 1; i + 1 < n; ++i) {
        if (d[i - 1] <= 0.0 || d[i] <= 0.0) {
            slopes_[i] = 0.0;
        } else {
            const double w1 = 2.0 * h[i] + h[i - 1];
            const double w2 = h[i] + 2.0 * h[i - 1];
            slopes_[i] = (w1 + w2) / (w1 / d[i - 1] + w2 / d[i]);
        }
    }
    auto end_slope = [](double h0, double h1, double d0, double d1) {
        double m = ((2.0 * h0 + h1) * d0 - h0 * d1) / (h0 + h1);
        if (m * d0 <= 0.0) return 0.0;
        if (d0 * d1 <= 0.0 && std::fabs(m) > 3.0 * std::fabs(d0)) {
            return 3.0 * d0;
        }
        return m;
    };
    if (n == 2) {
        slopes_[0] = slopes_[1] = d[0];
    } else {
        slopes_[0] = end_slope(h[0], h[1], d[0], d[1]);
        slopes_[n - 1] = end_slope(h[n - 2], h[n - 3], d[n - 2], d[n - 3]);
    }
}

double TabulatedCdf::operator()(double x) const {
    if (knots_.empty()) throw Error("evaluating an empty tabulated cdf");
    if (std::isnan(x)) throw std::invalid_argument("cdf argument is NaN");
    if (x <= knots_.front()) return values_.front();
    if (x >= knots_.back()) return values_.back();
    const auto it = std::upper_bound(knots_.begin(), knots_.end(), x);
    const std::size_t i = static_cast<std::size_t>(it - knots_.begin()) - 1;
    const double h = knots_[i + 1] - knots_[i];
    const double t = (x - knots_[i]) / h;
    const double t2 = t * t;
    const double t3 = t2 * t;
    const double value = values_[i] * (2.0 * t3 - 3.0 * t2 + 1.0) +
                         h * slopes_[i] * (t3 - 2.0 * t2 + t) +
                         values_[i + 1] * (-2.0 * t3 + 3.0 * t2) +
                         h * slopes_[i + 1] * (t3 - t2);
    return std::clamp(value, 0.0, 1.0);
}

void TabulatedCdf::evaluate_sorted(std::span<const double> sorted_x,
                                   double x_scale,
                                   std::span<double> out) const {
    if (knots_.empty()) throw Error("evaluating an empty tabulated cdf");
    if (out.size() != sorted_x.size()) {
        throw std::invalid_argument("output span size mismatch");
    }
    std::size_t seg = 0;
    const std::size_t last = knots_.size() - 1;
    for (std::size_t j = 0; j < sorted_x.size(); ++j) {
        const double x = sorted_x[j] * x_scale;
        if (x <= knots_.front()) {
            out[j] = values_.front();
            continue;
        }
        if (x >= knots_.back()) {
            out[j] = values_.back();
            continue;
        }
        while (seg + 1 < last && knots_[seg + 1] <= x) ++seg;
        const double h = knots_[seg + 1] - knots_[seg];
        const double t = (x - knots_[seg]) / h;
        const double t2 = t * t;
        const double t3 = t2 * t;
        const double value = values_[seg] * (2.0 * t3 - 3.0 * t2 + 1.0) +
                             h * slopes_[seg] * (t3 - 2.0 * t2 + t) +
                             values_[seg + 1] * (-2.0 * t3 + 3.0 * t2) +
                             h * slopes_[seg + 1] * (t3 - t2);
        out[j] = std::clamp(value, 0.0, 1.0);
    }
}

double TabulatedCdf::sup_deviation(std::span<const double> sorted_x,
                                   std::span<const double> lo,
                                   std::span<const double> hi,
                                   double x_scale) const {
    if (knots_.empty()) throw Error("evaluating an empty tabulated cdf");
    double sup = 0.0;
    std::size_t seg = 0;
    const std::size_t last = knots_.size() - 1;
    const double front = values_.front();
    const double back = values_.back();
    for (std::size_t j = 0; j < sorted_x.size(); ++j) {
        const double x = sorted_x[j] * x_scale;
        double value;
        if (x <= knots_.front()) {
            value = front;
        } else if (x >= knots_.back()) {
            value = back;
        } else {
            while (seg + 1 < last && knots_[seg + 1] <= x) ++seg;
            const double h = knots_[seg + 1] - knots_[seg];
            const double t = (x - knots_[seg]) / h;
            const double t2 = t * t;
            const double t3 = t2 * t;
            value = values_[seg] * (2.0 * t3 - 3.0 * t2 + 1.0) +
                    h * slopes_[seg] * (t3 - 2.0 * t2 + t) +
                    values_[seg + 1] * (-2.0 * t3 + 3.0 * t2) +
                    h * slopes_[seg + 1] * (t3 - t2);
            value = std::clamp(value, 0.0, 1.0);
        }
        const double above = hi[j] - value;
        const double below = value - lo[j];
        if (above > sup) sup = above;
        if (below > sup) sup = below;
    }
    return sup;
}

void TabulatedCdf::save(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot open " + path.string() + " for writing");
    out.write("GSMC", 4);
    auto put = [&out](const void* p, std::size_t n) {
        out.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
    };
    put(&kCacheVersion, sizeof kCacheVersion);
    put(&params_.r, sizeof(double));
    put(&params_.eta, sizeof(double));
    put(&params_.scale, sizeof(double));
    const std::uint64_t count = knots_.size();
    put(&count, sizeof count);
    for (std::uint64_t i = 0; i < count; ++i) {
        put(&knots_[i], sizeof(double));
        put(&values_[i], sizeof(double));
    }
    if (!out) throw Error("short write to " + path.string());
}

TabulatedCdf TabulatedCdf::load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open " + path.string());
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, "GSMC", 4) != 0) {
        throw FormatError(path.string() + ": bad magic");
    }
    auto get = [&in, &path](void* p, std::size_t n) {
        in.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
        if (!in) throw FormatError(path.string() + ": truncated");
    };
    std::uint16_t version = 0;
    get(&version, sizeof version);
    if (version != kCacheVersion) {
        throw FormatError(path.string() + ": unsupported version");
    }
    GsmParams params;
    get(&params.r, sizeof(double));
    get(&params.eta, sizeof(double));
    get(&params.scale, sizeof(double));
    std::uint64_t count = 0;
    get(&count, sizeof count);
    if (count < 2 || count > (1u << 26)) {
        throw FormatError(path.string() + ": implausible knot count");
    }
    std::vector<double> knots(count);
    std::vector<double> values(count);
    for (std::uint64_t i = 0; i < count; ++i) {
        get(&knots[i], sizeof(double));
        get(&values[i], sizeof(double));
    }
    return TabulatedCdf(params, std::move(knots), std::move(values));
}

TabulatedCdf tabulate_cdf(const GsmParams& params, double tail_eps,
                          double refine_tol) {
    validate(params);
    const double var = variance(params);  // throws MomentUndefined
    return tabulate_impl(params, params.r, params.eta, std::log(params.scale),
                         var, tail_eps, refine_tol);
}

namespace detail {

TabulatedCdf tabulate_unit_variance(double r, double eta, double tail_eps,
                                    double refine_tol) {
    const double log_scale = -log_unit_variance(r, eta);
    GsmParams record{r, eta, 0.0};
    record.scale = std::exp(std::clamp(log_scale, -kExpLimit, kExpLimit));
    return tabulate_impl(record, r, eta, log_scale, 1.0, tail_eps, refine_tol);
}

}  // namespace detail

}  // namespace ggsm
