#include <benchmark/benchmark.h>

#include <algorithm>
#include <vector>

#include "ggsm/haar.hpp"
#include "ggsm/image.hpp"
#include "ggsm/ks.hpp"
#include "ggsm/prior.hpp"
#include "ggsm/rng.hpp"
#include "ggsm/tabulated_cdf.hpp"

namespace {

void bm_haar_transform(benchmark::State& state) {
    // Full three-level 2D decomposition of one 512x512 plane.
    ggsm::ImageTensor img;
    img.dims = {512, 512};
    img.channels = 1;
    img.provenance = "bench";
    img.data.resize(512 * 512);
    ggsm::Rng rng(7);
    for (double& v : img.data) v = rng.normal();
    for (auto _ : state) {
        benchmark::DoNotOptimize(ggsm::haar_transform(img, 3));
    }
    state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations()) *
                            512 * 512);
}
BENCHMARK(bm_haar_transform)->Unit(benchmark::kMillisecond);

void bm_tabulate_cdf(benchmark::State& state) {
    const ggsm::GsmParams params{0.7, 0.3, 1.4};
    for (auto _ : state) {
        benchmark::DoNotOptimize(ggsm::tabulate_cdf(params));
    }
}
BENCHMARK(bm_tabulate_cdf)->Unit(benchmark::kMillisecond);

void bm_grid_point_score(benchmark::State& state) {
    // One (r, eta, trim) evaluation of the fitter inner loop: a sup-deviation
    // pass of 1e5 sorted samples against a unit-variance table.
    const auto table = ggsm::detail::tabulate_unit_variance(0.7, 0.3);
    auto xs = ggsm::draw_samples({0.7, 0.3, 1.4}, 100000, 1);
    std::sort(xs.begin(), xs.end());
    const auto bounds = ggsm::make_subsample_bounds(xs, 100000);
    for (auto _ : state) {
        benchmark::DoNotOptimize(
            table.sup_deviation(bounds.x, bounds.lo, bounds.hi, 1.0));
    }
}
BENCHMARK(bm_grid_point_score)->Unit(benchmark::kMicrosecond);

void bm_kolmogorov_exact(benchmark::State& state) {
    for (auto _ : state) {
        benchmark::DoNotOptimize(ggsm::kolmogorov_sf(0.0136, 10000));
    }
}
BENCHMARK(bm_kolmogorov_exact)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
