#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "ggsm/filter_bank.hpp"
#include "ggsm/fourier.hpp"
#include "ggsm/haar.hpp"
#include "ggsm/image.hpp"
#include "ggsm/rng.hpp"

using namespace ggsm;

namespace {

std::string temp_path(const std::string& name) {
    return (std::filesystem::temp_directory_path() / name).string();
}

ImageTensor make_image(std::vector<std::size_t> dims, std::size_t channels,
                       Rng& rng) {
    ImageTensor img;
    img.dims = std::move(dims);
    img.channels = channels;
    img.data.resize(img.size());
    for (double& v : img.data) v = rng.normal();
    return img;
}

double energy_of(const std::vector<double>& values) {
    double total = 0.0;
    for (double v : values) total += v * v;
    return total;
}

double decomposition_energy(const HaarDecomposition& d) {
    double total = 0.0;
    for (const HaarBand& band : d.bands) total += energy_of(band.values);
    return total;
}

const HaarBand& find_band(const HaarDecomposition& d, int layer,
                          const std::string& orientation,
                          std::size_t channel = 0) {
    for (const HaarBand& band : d.bands)
        if (band.layer == layer && band.orientation == orientation &&
            band.channel == channel)
            return band;
    REQUIRE_MESSAGE(false, "missing band layer=", layer, " orientation=",
                    orientation, " channel=", channel);
    return d.bands.front();
}

}  // namespace

// ---------------------------------------------------------------- image io

TEST_CASE("binary pgm round trip is exact at both depths") {
    ImageTensor img;
    img.dims = {3, 5};
    img.channels = 1;
    for (std::size_t i = 0; i < 15; ++i)
        img.data.push_back(static_cast<double>((i * 37) % 256));

    const std::string p8 = temp_path("ggsm_rt8.pgm");
    write_pnm(p8, img, 255);
    const ImageTensor back8 = read_image(p8);
    REQUIRE(back8.dims == img.dims);
    CHECK(back8.channels == 1);
    for (std::size_t i = 0; i < img.data.size(); ++i)
        CHECK(back8.data[i] == img.data[i]);

    for (double& v : img.data) v = std::floor(v * 257.0);
    const std::string p16 = temp_path("ggsm_rt16.pgm");
    write_pnm(p16, img, 65535);
    const ImageTensor back16 = read_image(p16);
    REQUIRE(back16.dims == img.dims);
    for (std::size_t i = 0; i < img.data.size(); ++i)
        CHECK(back16.data[i] == img.data[i]);
}

TEST_CASE("binary ppm keeps three channels planar") {
    ImageTensor img;
    img.dims = {2, 2};
    img.channels = 3;
    img.data = {// red plane, then green, then blue
                10, 20, 30, 40, 50, 60, 70, 80, 90, 100, 110, 120};
    const std::string path = temp_path("ggsm_rt.ppm");
    write_pnm(path, img, 255);
    const ImageTensor back = read_image(path);
    REQUIRE(back.channels == 3);
    REQUIRE(back.dims == img.dims);
    for (std::size_t i = 0; i < img.data.size(); ++i)
        CHECK(back.data[i] == img.data[i]);
    CHECK(back.at2(2, 1, 1) == 120.0);
}

TEST_CASE("ascii pnm headers tolerate comments and odd whitespace") {
    const std::string path = temp_path("ggsm_ascii.pgm");
    {
        std::ofstream out(path);
        out << "P2 # magic\n# full comment line\n  4 # width\n3\n255\n";
        for (int i = 0; i < 12; ++i) out << i * 3 << (i % 5 == 4 ? '\n' : ' ');
    }
    const ImageTensor img = read_image(path);
    REQUIRE(img.dims == std::vector<std::size_t>{3, 4});
    CHECK(img.channels == 1);
    CHECK(img.at2(0, 0, 0) == 0.0);
    CHECK(img.at2(0, 2, 3) == 33.0);
}

TEST_CASE("malformed rasters are rejected") {
    const std::string bad_magic = temp_path("ggsm_badmagic.pgm");
    std::ofstream(bad_magic) << "P7\n2 2\n255\n1 2 3 4\n";
    CHECK_THROWS_AS(read_image(bad_magic), FormatError);

    const std::string truncated = temp_path("ggsm_trunc.pgm");
    std::ofstream(truncated) << "P5\n4 4\n255\nab";
    CHECK_THROWS_AS(read_image(truncated), FormatError);

    // A 1-wide raster violates the tensor contract (every extent >= 2).
    const std::string skinny = temp_path("ggsm_skinny.pgm");
    std::ofstream(skinny) << "P2\n1 4\n255\n1 2 3 4\n";
    CHECK_THROWS_AS(read_image(skinny), FormatError);
}

TEST_CASE("raw volume round trip and dispatch through read_image") {
    Rng rng(99);
    const ImageTensor vol = make_image({4, 5, 6}, 1, rng);
    const std::string path = temp_path("ggsm_vol.raw");
    write_volume(path, vol);
    const ImageTensor back = read_volume(path);
    REQUIRE(back.dims == vol.dims);
    for (std::size_t i = 0; i < vol.data.size(); ++i)
        CHECK(back.data[i] == doctest::Approx(vol.data[i]).epsilon(1e-6));
    const ImageTensor dispatched = read_image(path);
    REQUIRE(dispatched.dims == vol.dims);
    CHECK(dispatched.data == back.data);
}

TEST_CASE("tensor contract violations are caught") {
    ImageTensor img;
    img.dims = {1, 5};
    img.channels = 1;
    img.data.assign(5, 0.0);
    CHECK_THROWS_AS(validate_image(img), FormatError);

    img.dims = {4, 4};
    img.data.assign(16, 0.0);
    img.channels = 2;
    CHECK_THROWS_AS(validate_image(img), FormatError);

    img.channels = 1;
    img.data.assign(10, 0.0);
    CHECK_THROWS_AS(validate_image(img), FormatError);

    img.data.assign(16, 0.0);
    img.data[3] = std::nan("");
    CHECK_THROWS_AS(validate_image(img), FormatError);

    img.data[3] = 0.0;
    CHECK_NOTHROW(validate_image(img));
}

TEST_CASE("grayscale collapse uses the luma weights") {
    ImageTensor img;
    img.dims = {2, 2};
    img.channels = 3;
    img.data.assign(12, 0.0);
    for (std::size_t i = 0; i < 4; ++i) {
        img.data[i] = 1.0;
        img.data[4 + i] = 2.0;
        img.data[8 + i] = 3.0;
    }
    const ImageTensor gray = to_grayscale(img);
    REQUIRE(gray.channels == 1);
    for (double v : gray.data)
        CHECK(v == doctest::Approx(0.299 + 2 * 0.587 + 3 * 0.114));
}

// --------------------------------------------------------------- haar (2D)

TEST_CASE("single 2x2 haar step matches the hand-computed quartet") {
    ImageTensor img;
    img.dims = {2, 2};
    img.channels = 1;
    img.data = {1, 2, 3, 4};
    const HaarDecomposition d = haar_transform(img, 1);
    CHECK(d.n_levels == 1);
    REQUIRE(d.bands.size() == 4);
    // Orthonormal step: approximation (a+b+c+d)/2, row difference
    // (a+b-c-d)/2, column difference (a-b+c-d)/2, mixed (a-b-c+d)/2.
    CHECK(find_band(d, 1, "approximation").values[0] == doctest::Approx(5.0));
    CHECK(find_band(d, 2, "horizontal").values[0] == doctest::Approx(-2.0));
    CHECK(find_band(d, 2, "vertical").values[0] == doctest::Approx(-1.0));
    CHECK(std::fabs(find_band(d, 2, "diagonal").values[0]) < 1e-12);
    // The approximation at full depth is mean * sqrt(pixel count).
    CHECK(find_band(d, 1, "approximation").values[0] ==
          doctest::Approx(2.5 * 2.0));
}

TEST_CASE("constant image has zero detail everywhere") {
    ImageTensor img;
    img.dims = {16, 16};
    img.channels = 1;
    img.data.assign(256, 7.25);
    const HaarDecomposition d = haar_transform(img, 3);
    for (const HaarBand& band : d.bands) {
        if (band.orientation == "approximation") continue;
        for (double v : band.values) CHECK(std::fabs(v) < 1e-12);
    }
}

TEST_CASE("haar conserves energy and reconstructs exactly") {
    Rng rng(2024);
    const ImageTensor img = make_image({64, 64}, 1, rng);
    const HaarDecomposition d = haar_transform(img, 3);
    CHECK(d.cropped_dims == img.dims);
    CHECK(decomposition_energy(d) ==
          doctest::Approx(energy_of(img.data)).epsilon(1e-10));
    const ImageTensor back = haar_inverse(d);
    REQUIRE(back.dims == img.dims);
    for (std::size_t i = 0; i < img.data.size(); ++i)
        CHECK(std::fabs(back.data[i] - img.data[i]) < 1e-10);
}

TEST_CASE("non-dyadic extents crop to the top-left dyadic block") {
    Rng rng(7);
    const ImageTensor img = make_image({65, 70}, 1, rng);
    const HaarDecomposition d = haar_transform(img, 3);
    REQUIRE(d.cropped_dims == std::vector<std::size_t>{64, 64});
    const ImageTensor back = haar_inverse(d);
    double cropped_energy = 0.0;
    for (std::size_t y = 0; y < 64; ++y)
        for (std::size_t x = 0; x < 64; ++x) {
            CHECK(std::fabs(back.at2(0, y, x) - img.at2(0, y, x)) < 1e-10);
            cropped_energy += img.at2(0, y, x) * img.at2(0, y, x);
        }
    CHECK(decomposition_energy(d) ==
          doctest::Approx(cropped_energy).epsilon(1e-10));
}

TEST_CASE("haar is linear and scaling equivariant") {
    Rng rng(31);
    const ImageTensor a = make_image({16, 16}, 1, rng);
    ImageTensor b = make_image({16, 16}, 1, rng);
    ImageTensor combo = a;
    for (std::size_t i = 0; i < combo.data.size(); ++i)
        combo.data[i] = 2.5 * a.data[i] - 1.25 * b.data[i];
    const HaarDecomposition da = haar_transform(a, 2);
    const HaarDecomposition db = haar_transform(b, 2);
    const HaarDecomposition dc = haar_transform(combo, 2);
    REQUIRE(da.bands.size() == dc.bands.size());
    for (std::size_t k = 0; k < da.bands.size(); ++k) {
        REQUIRE(da.bands[k].orientation == dc.bands[k].orientation);
        for (std::size_t i = 0; i < da.bands[k].values.size(); ++i)
            CHECK(dc.bands[k].values[i] ==
                  doctest::Approx(2.5 * da.bands[k].values[i] -
                                  1.25 * db.bands[k].values[i])
                      .epsilon(1e-12));
    }
}

TEST_CASE("full-depth approximation is the scaled mean, zero when centered") {
    Rng rng(55);
    ImageTensor img = make_image({8, 8}, 1, rng);
    double mean = 0.0;
    for (double v : img.data) mean += v;
    mean /= 64.0;
    const HaarDecomposition d = haar_transform(img, 3);
    const HaarBand& approx = find_band(d, 1, "approximation");
    REQUIRE(approx.values.size() == 1);
    CHECK(approx.values[0] == doctest::Approx(mean * 8.0).epsilon(1e-10));

    for (double& v : img.data) v -= mean;
    const HaarBand& centered =
        find_band(haar_transform(img, 3), 1, "approximation");
    CHECK(std::fabs(centered.values[0]) < 1e-10);
}

TEST_CASE("three-channel images decompose per channel") {
    Rng rng(81);
    const ImageTensor img = make_image({16, 16}, 3, rng);
    const HaarDecomposition d = haar_transform(img, 2);
    CHECK(d.channels == 3);
    // 3 channels x (2 levels x 3 orientations + approximation).
    CHECK(d.bands.size() == 3 * 7);
    CHECK(decomposition_energy(d) ==
          doctest::Approx(energy_of(img.data)).epsilon(1e-10));
    const ImageTensor back = haar_inverse(d);
    for (std::size_t i = 0; i < img.data.size(); ++i)
        CHECK(std::fabs(back.data[i] - img.data[i]) < 1e-10);
}

TEST_CASE("undersized extents are refused") {
    Rng rng(3);
    const ImageTensor img = make_image({4, 4}, 1, rng);
    CHECK_THROWS_AS(haar_transform(img, 3), TooSmallImage);
    CHECK_NOTHROW(haar_transform(img, 2));
    CHECK_THROWS_AS(haar_transform(img, 0), std::invalid_argument);
}

// --------------------------------------------------------------- haar (3D)

TEST_CASE("2x2x2 volume matches the hand-computed eight coefficients") {
    ImageTensor vol;
    vol.dims = {2, 2, 2};
    vol.channels = 1;
    vol.data = {0, 1, 2, 3, 4, 5, 6, 7};  // v(z,y,x) = 4z + 2y + x
    const HaarDecomposition d = haar_transform(vol, 1);
    REQUIRE(d.bands.size() == 8);
    const double s2 = std::sqrt(2.0);
    CHECK(find_band(d, 1, "approximation").values[0] ==
          doctest::Approx(7.0 * s2));
    CHECK(find_band(d, 2, "AAD").values[0] == doctest::Approx(-s2));
    CHECK(find_band(d, 2, "ADA").values[0] == doctest::Approx(-2.0 * s2));
    CHECK(find_band(d, 2, "DAA").values[0] == doctest::Approx(-4.0 * s2));
    for (const char* flat : {"ADD", "DAD", "DDA", "DDD"})
        CHECK(std::fabs(find_band(d, 2, flat).values[0]) < 1e-12);
}

TEST_CASE("volumes expose seven detail orientations per layer") {
    Rng rng(17);
    const ImageTensor vol = make_image({8, 8, 8}, 1, rng);
    const HaarDecomposition d = haar_transform(vol, 2);
    CHECK(d.bands.size() == 2 * 7 + 1);
    const std::vector<std::string> expected = {"AAD", "ADA", "ADD", "DAA",
                                               "DAD", "DDA", "DDD"};
    for (int layer : {2, 3}) {
        std::vector<std::string> seen;
        for (const HaarBand& band : d.bands)
            if (band.layer == layer) seen.push_back(band.orientation);
        std::sort(seen.begin(), seen.end());
        CHECK(seen == expected);
    }
    CHECK(decomposition_energy(d) ==
          doctest::Approx(energy_of(vol.data)).epsilon(1e-10));
    const ImageTensor back = haar_inverse(d);
    for (std::size_t i = 0; i < vol.data.size(); ++i)
        CHECK(std::fabs(back.data[i] - vol.data[i]) < 1e-10);
}

TEST_CASE("non-dyadic volumes crop per axis") {
    Rng rng(23);
    const ImageTensor vol = make_image({9, 10, 12}, 1, rng);
    const HaarDecomposition d = haar_transform(vol, 2);
    REQUIRE(d.cropped_dims == std::vector<std::size_t>{8, 8, 12});
    const ImageTensor back = haar_inverse(d);
    for (std::size_t z = 0; z < 8; ++z)
        for (std::size_t y = 0; y < 8; ++y)
            for (std::size_t x = 0; x < 12; ++x)
                CHECK(std::fabs(back.at3(0, z, y, x) - vol.at3(0, z, y, x)) <
                      1e-10);

    const ImageTensor thin = make_image({8, 8, 2}, 1, rng);
    CHECK_THROWS_AS(haar_transform(thin, 2), TooSmallImage);
}

// ----------------------------------------------------------------- fourier

TEST_CASE("constant image concentrates in the dc coefficient") {
    ImageTensor img;
    img.dims = {5, 7};
    img.channels = 1;
    img.data.assign(35, 3.25);
    const FourierCoefficients fc = fourier_transform(img);
    CHECK(fc.dc == doctest::Approx(3.25 * std::sqrt(35.0)).epsilon(1e-12));
    for (std::size_t i = 0; i < fc.re.size(); ++i) {
        CHECK(std::fabs(fc.re[i]) < 1e-9);
        CHECK(std::fabs(fc.im[i]) < 1e-9);
    }
    CHECK(fc.energy() == doctest::Approx(3.25 * 3.25 * 35.0).epsilon(1e-12));
}

TEST_CASE("pure cosine lands on one retained bin standing for the pair") {
    const std::size_t rows = 8, cols = 6;
    const double amp = 1.7, phase = 0.6;
    ImageTensor img;
    img.dims = {rows, cols};
    img.channels = 1;
    for (std::size_t y = 0; y < rows; ++y)
        for (std::size_t x = 0; x < cols; ++x)
            img.data.push_back(amp * std::cos(2.0 * M_PI *
                                                  (2.0 * y / rows +
                                                   1.0 * x / cols) +
                                              phase));
    const FourierCoefficients fc = fourier_transform(img);
    CHECK(std::fabs(fc.dc) < 1e-9);
    std::size_t hits = 0, hit = 0;
    for (std::size_t i = 0; i < fc.re.size(); ++i)
        if (fc.re[i] * fc.re[i] + fc.im[i] * fc.im[i] > 1e-18) {
            ++hits;
            hit = i;
        }
    REQUIRE(hits == 1);
    CHECK(fc.ky[hit] == 2);
    CHECK(fc.kx[hit] == 1);
    CHECK(fc.weight[hit] == 2.0);
    const double half_amp = amp * std::sqrt(48.0) / 2.0;
    CHECK(fc.re[hit] == doctest::Approx(half_amp * std::cos(phase)));
    CHECK(fc.im[hit] == doctest::Approx(half_amp * std::sin(phase)));
    CHECK(fc.energy() ==
          doctest::Approx(amp * amp * 48.0 / 2.0).epsilon(1e-12));
}

TEST_CASE("nyquist checkerboard is a weight-one self-conjugate bin") {
    const std::size_t rows = 8, cols = 6;
    const double amp = 1.3;
    ImageTensor img;
    img.dims = {rows, cols};
    img.channels = 1;
    for (std::size_t y = 0; y < rows; ++y)
        for (std::size_t x = 0; x < cols; ++x)
            img.data.push_back(((y + x) % 2 == 0 ? amp : -amp));
    const FourierCoefficients fc = fourier_transform(img);
    std::size_t hits = 0, hit = 0;
    for (std::size_t i = 0; i < fc.re.size(); ++i)
        if (fc.re[i] * fc.re[i] + fc.im[i] * fc.im[i] > 1e-18) {
            ++hits;
            hit = i;
        }
    REQUIRE(hits == 1);
    CHECK(fc.ky[hit] == rows / 2);
    CHECK(fc.kx[hit] == cols / 2);
    CHECK(fc.weight[hit] == 1.0);
    CHECK(fc.im[hit] == 0.0);
    CHECK(fc.re[hit] == doctest::Approx(amp * std::sqrt(48.0)));
    CHECK(fc.energy() == doctest::Approx(amp * amp * 48.0).epsilon(1e-12));
}

TEST_CASE("retained bins tile the full grid once for every parity") {
    Rng rng(5);
    for (auto [rows, cols] : {std::pair<std::size_t, std::size_t>{8, 6},
                              {7, 9},
                              {8, 7},
                              {7, 8}}) {
        const ImageTensor img = make_image({rows, cols}, 1, rng);
        const FourierCoefficients fc = fourier_transform(img);
        double weight_sum = 1.0;  // dc
        for (double w : fc.weight) weight_sum += w;
        CHECK(weight_sum == static_cast<double>(rows * cols));
        CHECK(fc.energy() ==
              doctest::Approx(energy_of(img.data)).epsilon(1e-10));
    }
}

TEST_CASE("retained bins match a direct dft") {
    Rng rng(13);
    for (auto [rows, cols] :
         {std::pair<std::size_t, std::size_t>{8, 6}, {7, 9}}) {
        const ImageTensor img = make_image({rows, cols}, 1, rng);
        const FourierCoefficients fc = fourier_transform(img);
        const double norm =
            1.0 / std::sqrt(static_cast<double>(rows * cols));
        for (std::size_t i = 0; i < fc.re.size(); ++i) {
            std::complex<double> acc = 0.0;
            for (std::size_t y = 0; y < rows; ++y)
                for (std::size_t x = 0; x < cols; ++x) {
                    const double angle =
                        -2.0 * M_PI *
                        (static_cast<double>(fc.ky[i]) * y / rows +
                         static_cast<double>(fc.kx[i]) * x / cols);
                    acc += img.at2(0, y, x) *
                           std::complex<double>(std::cos(angle),
                                                std::sin(angle));
                }
            acc *= norm;
            CHECK(fc.re[i] == doctest::Approx(acc.real()).epsilon(1e-9));
            if (fc.weight[i] == 1.0) {
                CHECK(fc.im[i] == 0.0);
                CHECK(std::fabs(acc.imag()) < 1e-9);
            } else {
                CHECK(fc.im[i] == doctest::Approx(acc.imag()).epsilon(1e-9));
            }
        }
    }
}

TEST_CASE("wavelengths fold aliases onto the principal frequency") {
    Rng rng(1);
    const ImageTensor img = make_image({8, 6}, 1, rng);
    const FourierCoefficients fc = fourier_transform(img);
    const auto wavelength_at = [&](std::uint32_t ky, std::uint32_t kx) {
        for (std::size_t i = 0; i < fc.re.size(); ++i)
            if (fc.ky[i] == ky && fc.kx[i] == kx) return fc.wavelength[i];
        REQUIRE(false);
        return 0.0;
    };
    CHECK(wavelength_at(1, 0) == doctest::Approx(8.0));
    CHECK(wavelength_at(0, 1) == doctest::Approx(6.0));
    // ky = 7 aliases to 1 cycle: hypot(1/8, 1/6) = 5/24.
    CHECK(wavelength_at(7, 1) == doctest::Approx(4.8));
    CHECK(wavelength_at(4, 3) == doctest::Approx(1.0 / std::hypot(0.5, 0.5)));
}

TEST_CASE("per-wavelength energy is invariant under 90 degree rotation") {
    Rng rng(41);
    const ImageTensor img = make_image({8, 8}, 1, rng);
    ImageTensor rotated = img;
    for (std::size_t y = 0; y < 8; ++y)
        for (std::size_t x = 0; x < 8; ++x)
            rotated.at2(0, y, x) = img.at2(0, x, 7 - y);
    const auto spectrum_map = [](const FourierCoefficients& fc) {
        std::map<long long, double> by_wavelength;
        for (std::size_t i = 0; i < fc.re.size(); ++i)
            by_wavelength[llround(fc.wavelength[i] * 1e9)] +=
                fc.weight[i] *
                (fc.re[i] * fc.re[i] + fc.im[i] * fc.im[i]);
        return by_wavelength;
    };
    const auto original = spectrum_map(fourier_transform(img));
    const auto turned = spectrum_map(fourier_transform(rotated));
    REQUIRE(original.size() == turned.size());
    auto it = turned.begin();
    for (const auto& [key, value] : original) {
        CHECK(key == it->first);
        CHECK(value == doctest::Approx(it->second).epsilon(1e-9));
        ++it;
    }
}

TEST_CASE("fourier rejects volumes and color planes") {
    Rng rng(2);
    const ImageTensor vol = make_image({4, 4, 4}, 1, rng);
    CHECK_THROWS_AS(fourier_transform(vol), std::invalid_argument);
    const ImageTensor color = make_image({4, 4}, 3, rng);
    CHECK_THROWS_AS(fourier_transform(color), std::invalid_argument);
}

// ------------------------------------------------------------- wavelength bands

namespace {

/// Groups at log-spaced wavelengths filled with seeded centered normals.
std::vector<WavelengthGroup> make_groups(
    const std::vector<double>& wavelengths, const std::vector<double>& sigmas,
    std::size_t per_group, std::uint64_t seed) {
    std::vector<WavelengthGroup> groups(wavelengths.size());
    for (std::size_t i = 0; i < wavelengths.size(); ++i) {
        Rng rng(derive_seed(seed, i));
        groups[i].wavelength = wavelengths[i];
        groups[i].values.resize(per_group);
        for (double& v : groups[i].values) v = sigmas[i] * rng.normal();
    }
    return groups;
}

}  // namespace

TEST_CASE("an exchangeable ensemble stays a single band") {
    std::vector<double> wavelengths(64), sigmas(64, 1.0);
    for (std::size_t i = 0; i < 64; ++i)
        wavelengths[i] = 2.0 * std::pow(32.0, i / 63.0);
    const auto groups = make_groups(wavelengths, sigmas, 1600, 1234);
    const FourierBandPartition part = partition_bands(groups);
    CHECK(part.n_bands() == 1);
    CHECK(part.recorded_boundaries.empty());
    CHECK(part.dropped_long_bands == 0);
    CHECK(part.fit_residual == 0.0);
    CHECK(part.geometric_ratio > 1.0);
    CHECK(part.band_of(64.0) == 0);
    CHECK(part.band_of(2.0) == 0);
    CHECK(part.band_of(1.0) == 0);   // clamps below the shortest edge
    CHECK(part.band_of(65.0) == -1);  // above the longest edge
}

TEST_CASE("a scale-per-wavelength field splits on a clean geometric law") {
    const std::size_t n_groups = 256;
    std::vector<double> wavelengths(n_groups), sigmas(n_groups);
    for (std::size_t i = 0; i < n_groups; ++i) {
        wavelengths[i] = 2.0 * std::pow(32.0, i / 255.0);
        sigmas[i] = wavelengths[i];  // variance grows as wavelength squared
    }
    const auto groups = make_groups(wavelengths, sigmas, 100, 777);
    const FourierBandPartition part = partition_bands(groups);
    // Noise alone rejects exchangeability at this threshold, so bisection
    // runs to the sample floor and the boundaries sit at the half-integer
    // log positions: an exact geometric ladder.
    CHECK(part.recorded_boundaries.size() == n_groups - 1);
    CHECK(part.n_bands() == n_groups);
    CHECK(part.dropped_long_bands == 0);
    CHECK(part.fit_residual < 0.05 * std::log(32.0));
    CHECK(part.fit_residual < 1e-6);
    CHECK(part.geometric_ratio ==
          doctest::Approx(std::pow(32.0, 1.0 / 255.0)).epsilon(1e-4));
    for (std::size_t i = 0; i + 1 < part.band_edges.size(); ++i)
        CHECK(part.band_edges[i] > part.band_edges[i + 1]);
    // Every group lands in exactly one band, longest wavelengths in band 0.
    CHECK(part.band_of(wavelengths[n_groups - 1]) == 0);
    CHECK(part.band_of(wavelengths[0]) ==
          static_cast<int>(part.n_bands()) - 1);
    for (double w : wavelengths) CHECK(part.band_of(w) >= 0);
}

TEST_CASE("a variance jump at the midpoint is localized within the gap") {
    std::vector<double> wavelengths(64), sigmas(64);
    for (std::size_t i = 0; i < 64; ++i) {
        wavelengths[i] = std::pow(2.0, i / 8.0);
        sigmas[i] = i <= 31 ? 1.0 : 3.0;
    }
    const auto groups = make_groups(wavelengths, sigmas, 100, 4242);
    const FourierBandPartition part = partition_bands(groups, 0.2, 100);
    REQUIRE(part.recorded_boundaries.size() == 1);
    CHECK(part.n_bands() == 2);
    // The split lands between the last quiet and first loud wavelength.
    CHECK(part.band_edges[1] > wavelengths[31]);
    CHECK(part.band_edges[1] < wavelengths[32]);
    CHECK(part.band_of(wavelengths[31]) == 1);
    CHECK(part.band_of(wavelengths[32]) == 0);
    CHECK(part.geometric_ratio > 1.0);
}

TEST_CASE("snapped edges shed an undersampled long-wavelength band") {
    // Group positions are chosen (as powers of w = 1000^pos) so recursion
    // records the concave boundary triple {0.5, 0.4795, 0.2495} in log
    // position. Its least-squares snap puts the top edge at 0.53492, above
    // every sample but the 30 at the far end, which the floor then sheds.
    const std::vector<double> pos = {0.0, 0.10, 0.46, 0.499, 0.51, 0.52, 1.0};
    const std::vector<double> sig = {1.0, 1.0, 3.0, 15.0, 50.0, 50.0, 50.0};
    const std::vector<std::size_t> count = {150, 150, 300, 300, 40, 40, 30};
    std::vector<WavelengthGroup> groups(pos.size());
    for (std::size_t i = 0; i < pos.size(); ++i) {
        Rng rng(derive_seed(99, i));
        groups[i].wavelength = std::pow(1000.0, pos[i]);
        groups[i].values.resize(count[i]);
        for (double& v : groups[i].values) v = sig[i] * rng.normal();
    }
    const FourierBandPartition part = partition_bands(groups, 0.2, 100);
    REQUIRE(part.recorded_boundaries.size() == 3);
    CHECK(part.recorded_boundaries[0] ==
          doctest::Approx(std::pow(1000.0, 0.5)).epsilon(1e-12));
    CHECK(part.recorded_boundaries[1] ==
          doctest::Approx(std::pow(1000.0, 0.4795)).epsilon(1e-12));
    CHECK(part.recorded_boundaries[2] ==
          doctest::Approx(std::pow(1000.0, 0.2495)).epsilon(1e-12));
    CHECK(part.dropped_long_bands == 1);
    CHECK(part.n_bands() == 3);
    // Least squares through the three boundaries by hand: slope
    // -(0.5 - 0.2495)/2 per step, top edge one step above the mean.
    const double mean_pos = (0.5 + 0.4795 + 0.2495) / 3.0;
    const double step = (0.5 - 0.2495) / 2.0;
    CHECK(part.band_edges.front() ==
          doctest::Approx(std::pow(1000.0, mean_pos + step)).epsilon(1e-9));
    // The far group now sits above the surviving edges.
    CHECK(part.band_of(1000.0) == -1);
    CHECK(part.band_of(groups[4].wavelength) == 0);
    CHECK(part.band_of(1.0) == 2);
    CHECK(part.fit_residual > 0.1);
    CHECK(part.geometric_ratio ==
          doctest::Approx(std::pow(1000.0, step)).epsilon(1e-9));
}

TEST_CASE("band partitioning is deterministic and guards its inputs") {
    std::vector<double> wavelengths(8), sigmas(8, 1.0);
    for (std::size_t i = 0; i < 8; ++i)
        wavelengths[i] = std::pow(2.0, static_cast<double>(i));
    const auto groups = make_groups(wavelengths, sigmas, 50, 11);
    const FourierBandPartition a = partition_bands(groups, 0.01, 100);
    const FourierBandPartition b = partition_bands(groups, 0.01, 100);
    CHECK(a.band_edges == b.band_edges);
    CHECK(a.recorded_boundaries == b.recorded_boundaries);

    const auto starved = make_groups({2.0, 4.0}, {1.0, 1.0}, 30, 5);
    CHECK_THROWS_AS(partition_bands(starved, 0.01, 100),
                    DegeneratePartition);
    auto bad = groups;
    bad[0].wavelength = -1.0;
    CHECK_THROWS_AS(partition_bands(bad, 0.01, 100), std::invalid_argument);
    CHECK_THROWS_AS(partition_bands(groups, 0.01, 0), std::invalid_argument);
}

// --------------------------------------------------------------- filter bank

namespace {

Filter make_filter(std::string id, std::string category, std::size_t h,
                   std::size_t w, std::vector<double> weights,
                   std::size_t stride = 1, std::size_t channels = 1) {
    Filter f;
    f.id = std::move(id);
    f.category = std::move(category);
    f.height = h;
    f.width = w;
    f.channels = channels;
    f.stride = stride;
    f.weights = std::move(weights);
    return f;
}

}  // namespace

TEST_CASE("identity kernel reproduces the image") {
    Rng rng(6);
    const ImageTensor img = make_image({5, 6}, 1, rng);
    const Filter f = make_filter("id", "blob", 1, 1, {1.0});
    const FilterResponse r = apply_filter(img, f);
    CHECK(r.rows == 5);
    CHECK(r.cols == 6);
    CHECK(r.filter_id == "id");
    CHECK(r.category == "blob");
    for (std::size_t i = 0; i < r.values.size(); ++i)
        CHECK(r.values[i] == doctest::Approx(img.data[i]));
}

TEST_CASE("zero-mean kernel annihilates constant images") {
    ImageTensor img;
    img.dims = {6, 6};
    img.channels = 1;
    img.data.assign(36, 4.5);
    const Filter f =
        make_filter("edge", "single-edge", 2, 2, {1.0, -1.0, 2.0, -2.0});
    for (double v : apply_filter(img, f).values)
        CHECK(std::fabs(v) < 1e-12);
}

TEST_CASE("impulse response is the point-reflected kernel") {
    ImageTensor img;
    img.dims = {5, 5};
    img.channels = 1;
    img.data.assign(25, 0.0);
    img.at2(0, 2, 2) = 1.0;
    const std::vector<double> kernel = {1, 2, 3, 4, 5, 6, 7, 8, 9};
    const Filter f = make_filter("k", "texture", 3, 3, kernel);
    const FilterResponse r = apply_filter(img, f);
    REQUIRE(r.rows == 3);
    REQUIRE(r.cols == 3);
    // Cross-correlating an impulse samples the kernel reversed in both axes.
    for (std::size_t y = 0; y < 3; ++y)
        for (std::size_t x = 0; x < 3; ++x)
            CHECK(r.values[y * 3 + x] ==
                  doctest::Approx(kernel[(2 - y) * 3 + (2 - x)]));
}

TEST_CASE("stride subsamples the response grid") {
    Rng rng(8);
    const ImageTensor img = make_image({7, 7}, 1, rng);
    const Filter dense = make_filter("d", "multi-edge", 2, 2, {1, 2, 3, 4});
    const Filter strided =
        make_filter("s", "multi-edge", 2, 2, {1, 2, 3, 4}, 2);
    const FilterResponse rd = apply_filter(img, dense);
    const FilterResponse rs = apply_filter(img, strided);
    REQUIRE(rd.rows == 6);
    REQUIRE(rs.rows == 3);
    for (std::size_t y = 0; y < rs.rows; ++y)
        for (std::size_t x = 0; x < rs.cols; ++x)
            CHECK(rs.values[y * rs.cols + x] ==
                  doctest::Approx(rd.values[2 * y * rd.cols + 2 * x]));
}

TEST_CASE("filtering commutes with translation up to the crop") {
    Rng rng(14);
    const ImageTensor img = make_image({10, 10}, 1, rng);
    ImageTensor shifted;
    shifted.dims = {9, 8};
    shifted.channels = 1;
    shifted.data.resize(72);
    for (std::size_t y = 0; y < 9; ++y)
        for (std::size_t x = 0; x < 8; ++x)
            shifted.at2(0, y, x) = img.at2(0, y + 1, x + 2);
    const Filter f =
        make_filter("t", "texture", 3, 3, {1, -2, 3, 0, 1, -1, 2, 2, -4});
    const FilterResponse base = apply_filter(img, f);
    const FilterResponse moved = apply_filter(shifted, f);
    for (std::size_t y = 0; y < moved.rows; ++y)
        for (std::size_t x = 0; x < moved.cols; ++x)
            CHECK(moved.values[y * moved.cols + x] ==
                  doctest::Approx(
                      base.values[(y + 1) * base.cols + (x + 2)]));
}

TEST_CASE("multichannel kernels contract the channel axis") {
    ImageTensor img;
    img.dims = {2, 2};
    img.channels = 3;
    img.data = {1, 2, 3, 4, 10, 20, 30, 40, 100, 200, 300, 400};
    // 1x1 kernel with per-channel weights 1, 2, 3 (channel-fastest layout).
    const Filter f = make_filter("c", "color", 1, 1, {1, 2, 3}, 1, 3);
    const FilterResponse r = apply_filter(img, f);
    REQUIRE(r.values.size() == 4);
    CHECK(r.values[0] == doctest::Approx(1 + 2 * 10 + 3 * 100));
    CHECK(r.values[3] == doctest::Approx(4 + 2 * 40 + 3 * 400));

    const Filter mono = make_filter("m", "color", 1, 1, {1.0});
    CHECK_THROWS_AS(apply_filter(img, mono), std::invalid_argument);
}

TEST_CASE("oversized kernels are refused") {
    Rng rng(9);
    const ImageTensor img = make_image({5, 5}, 1, rng);
    const Filter tall =
        make_filter("tall", "eye", 7, 2, std::vector<double>(14, 1.0));
    CHECK_THROWS_AS(apply_filter(img, tall), KernelLargerThanImage);
    const ImageTensor vol = make_image({4, 4, 4}, 1, rng);
    const Filter flat = make_filter("f", "eye", 2, 2, {1, 1, 1, 1});
    CHECK_THROWS_AS(apply_filter(vol, flat), std::invalid_argument);
}

TEST_CASE("filter bank json round trip preserves every field") {
    FilterBank bank;
    bank.filters.push_back(
        make_filter("edge-0", "single-edge", 2, 3, {1, 2, 3, 4, 5, 6}, 2));
    bank.filters.push_back(
        make_filter("blob-1", "blob", 1, 1, {0.5, -0.25, 0.125}, 1, 3));
    const std::string path = temp_path("ggsm_bank.json");
    save_filter_bank(path, bank);
    const FilterBank back = load_filter_bank(path);
    CHECK(back.source == path);
    REQUIRE(back.filters.size() == 2);
    for (std::size_t i = 0; i < 2; ++i) {
        CHECK(back.filters[i].id == bank.filters[i].id);
        CHECK(back.filters[i].category == bank.filters[i].category);
        CHECK(back.filters[i].height == bank.filters[i].height);
        CHECK(back.filters[i].width == bank.filters[i].width);
        CHECK(back.filters[i].channels == bank.filters[i].channels);
        CHECK(back.filters[i].stride == bank.filters[i].stride);
        CHECK(back.filters[i].weights == bank.filters[i].weights);
    }
    Rng rng(3);
    FilterBank mono;
    mono.filters.push_back(make_filter("a", "eye", 2, 2, {1, 0, 0, -1}));
    mono.filters.push_back(make_filter("b", "blob", 1, 1, {2}));
    const std::vector<FilterResponse> responses =
        apply_filter_bank(make_image({6, 6}, 1, rng), mono);
    REQUIRE(responses.size() == 2);
    CHECK(responses[0].filter_id == "a");
    CHECK(responses[1].filter_id == "b");
}

TEST_CASE("invalid banks are rejected with the precise complaint") {
    FilterBank bank;
    bank.filters.push_back(make_filter("x", "mystery", 1, 1, {1.0}));
    CHECK_THROWS_AS(validate_filter_bank(bank), FormatError);
    bank.filters[0].category = "eye";
    CHECK_NOTHROW(validate_filter_bank(bank));

    bank.filters.push_back(make_filter("x", "blob", 1, 1, {2.0}));
    CHECK_THROWS_AS(validate_filter_bank(bank), FormatError);  // duplicate id
    bank.filters[1].id = "y";
    bank.filters[1].weights = {1.0, 2.0};
    CHECK_THROWS_AS(validate_filter_bank(bank), FormatError);  // size mismatch
    bank.filters[1].weights = {std::nan("")};
    CHECK_THROWS_AS(validate_filter_bank(bank), FormatError);  // non-finite
    bank.filters[1].weights = {1.0};
    bank.filters[1].stride = 0;
    CHECK_THROWS_AS(validate_filter_bank(bank), FormatError);
    bank.filters[1].stride = 1;
    bank.filters[1].channels = 2;
    CHECK_THROWS_AS(validate_filter_bank(bank), FormatError);

    const std::string path = temp_path("ggsm_bank_bad.json");
    std::ofstream(path) << "{\"version\": 9, \"filters\": []}";
    CHECK_THROWS_AS(load_filter_bank(path), FormatError);
    std::ofstream(path) << "{\"version\": 1}";
    CHECK_THROWS_AS(load_filter_bank(path), FormatError);
    std::ofstream(path) << "not json";
    CHECK_THROWS_AS(load_filter_bank(path), FormatError);
    CHECK_THROWS_AS(load_filter_bank(temp_path("ggsm_absent.json")),
                    FormatError);
}
