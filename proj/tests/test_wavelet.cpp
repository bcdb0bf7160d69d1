// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 morphdet contributors

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <cstdio>
#include <filesystem>

#include "doctest.h"
#include "morphdet/errors.hpp"
#include "morphdet/hash.hpp"
#include "morphdet/rng.hpp"
#include "morphdet/wavelet.hpp"

using namespace morphdet;
using namespace morphdet::wavelet;

namespace {

// Independent oracle: direct 2-D circular convolution with the separable
// kernel hrow[k] * hcol[l], taps dilated by `dilation`.
Plane circ_conv2d(const Plane& in, const std::vector<double>& hrow, const std::vector<double>& hcol,
                  int dilation) {
    Plane out(in.rows, in.cols);
    for (int y = 0; y < in.rows; ++y) {
        for (int x = 0; x < in.cols; ++x) {
            double acc = 0.0;
            for (std::size_t k = 0; k < hrow.size(); ++k) {
                for (std::size_t l = 0; l < hcol.size(); ++l) {
                    int sy = (y - static_cast<int>(k) * dilation) % in.rows;
                    int sx = (x - static_cast<int>(l) * dilation) % in.cols;
                    if (sy < 0) sy += in.rows;
                    if (sx < 0) sx += in.cols;
                    acc += hrow[k] * hcol[l] * in.at(sy, sx);
                }
            }
            out.at(y, x) = acc;
        }
    }
    return out;
}

const std::vector<double>& row_filter(const WaveletSpec& spec, Band b) {
    return (b == Band::LL || b == Band::LH) ? spec.lo : spec.hi;
}

const std::vector<double>& col_filter(const WaveletSpec& spec, Band b) {
    return (b == Band::LL || b == Band::HL) ? spec.lo : spec.hi;
}

// Recompute one decompose channel by filtering the three path steps directly.
Plane path_oracle(const Plane& image, const WaveletSpec& spec, const SubbandPath& path) {
    Plane cur = image;
    for (int level = 1; level <= 3; ++level) {
        const Band b = path.steps[static_cast<std::size_t>(level - 1)];
        cur = circ_conv2d(cur, row_filter(spec, b), col_filter(spec, b), 1 << (level - 1));
    }
    return cur;
}

Plane random_plane(int rows, int cols, Rng& rng) {
    Plane p(rows, cols);
    for (auto& v : p.v) v = rng.uniform();
    return p;
}

Plane circular_shift(const Plane& in, int dy, int dx) {
    Plane out(in.rows, in.cols);
    for (int y = 0; y < in.rows; ++y)
        for (int x = 0; x < in.cols; ++x)
            out.at((y + dy) % in.rows, (x + dx) % in.cols) = in.at(y, x);
    return out;
}

double max_abs_diff(const Plane& a, const Plane& b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a.v[i] - b.v[i]));
    return m;
}

}  // namespace

TEST_CASE("haar filters have the defining taps") {
    const auto spec = build_filters(Family::Haar);
    const double s = 0.7071067811865476;
    REQUIRE(spec.lo.size() == 2);
    CHECK(spec.lo[0] == doctest::Approx(s).epsilon(1e-14));
    CHECK(spec.lo[1] == doctest::Approx(s).epsilon(1e-14));
    CHECK(spec.hi[0] == doctest::Approx(s).epsilon(1e-14));
    CHECK(spec.hi[1] == doctest::Approx(-s).epsilon(1e-14));
}

TEST_CASE("filter sums and the quadrature mirror relation hold for both families") {
    for (Family f : {Family::Haar, Family::DB2}) {
        const auto spec = build_filters(f);
        double slo = 0.0, shi = 0.0;
        for (double x : spec.lo) slo += x;
        for (double x : spec.hi) shi += x;
        CHECK(std::abs(slo - std::sqrt(2.0)) < 1e-12);
        CHECK(std::abs(shi) < 1e-12);
        const std::size_t L = spec.lo.size();
        for (std::size_t k = 0; k < L; ++k) {
            const double expect = (k % 2 == 0 ? 1.0 : -1.0) * spec.lo[L - 1 - k];
            CHECK(spec.hi[k] == doctest::Approx(expect).epsilon(1e-14));
        }
    }
}

TEST_CASE("db2 taps satisfy the four-tap orthogonality constraints and match tabulated values") {
    const auto spec = build_filters(Family::DB2);
    REQUIRE(spec.lo.size() == 4);
    double sum = 0.0, sumsq = 0.0, even_shift = 0.0, hi_sum = 0.0, hi_moment = 0.0;
    for (std::size_t k = 0; k < 4; ++k) {
        sum += spec.lo[k];
        sumsq += spec.lo[k] * spec.lo[k];
        hi_sum += spec.hi[k];
        hi_moment += static_cast<double>(k) * spec.hi[k];
    }
    even_shift = spec.lo[0] * spec.lo[2] + spec.lo[1] * spec.lo[3];
    CHECK(std::abs(sum - std::sqrt(2.0)) < 1e-12);
    CHECK(std::abs(sumsq - 1.0) < 1e-12);
    CHECK(std::abs(even_shift) < 1e-12);       // orthogonality of even shifts
    CHECK(std::abs(hi_sum) < 1e-12);           // first vanishing moment
    CHECK(std::abs(hi_moment) < 1e-12);        // second vanishing moment

    const double tabulated[4] = {0.48296291314469025, 0.8365163037378079, 0.22414386804185735,
                                 -0.12940952255092145};
    for (std::size_t k = 0; k < 4; ++k) CHECK(std::abs(spec.lo[k] - tabulated[k]) < 1e-12);
}

TEST_CASE("unknown family names are a configuration error") {
    CHECK_THROWS_AS(family_from_string("meyer"), ConfigError);
    CHECK(family_from_string("haar") == Family::Haar);
    CHECK(family_to_string(Family::DB2) == "db2");
}

TEST_CASE("analysis_step maps constants to 2c in LL and annihilates them elsewhere") {
    for (Family f : {Family::Haar, Family::DB2}) {
        const auto spec = build_filters(f);
        const Plane plane(9, 13, 0.37);
        for (int level = 1; level <= 3; ++level) {
            const auto bands = analysis_step(plane, spec, level);
            for (double v : bands[0].v) CHECK(v == doctest::Approx(2.0 * 0.37).epsilon(1e-12));
            for (int b = 1; b < 4; ++b)
                for (double v : bands[static_cast<std::size_t>(b)].v) CHECK(std::abs(v) < 1e-10);
        }
    }
}

TEST_CASE("analysis_step is linear") {
    Rng rng(11);
    const auto spec = build_filters(Family::DB2);
    const Plane a = random_plane(12, 10, rng);
    const Plane b = random_plane(12, 10, rng);
    Plane sum(12, 10);
    for (std::size_t i = 0; i < sum.size(); ++i) sum.v[i] = a.v[i] + b.v[i];
    const auto ba = analysis_step(a, spec, 2);
    const auto bb = analysis_step(b, spec, 2);
    const auto bs = analysis_step(sum, spec, 2);
    for (int k = 0; k < 4; ++k) {
        Plane expect(12, 10);
        for (std::size_t i = 0; i < expect.size(); ++i)
            expect.v[i] = ba[static_cast<std::size_t>(k)].v[i] + bb[static_cast<std::size_t>(k)].v[i];
        CHECK(max_abs_diff(expect, bs[static_cast<std::size_t>(k)]) < 1e-12);
    }
}

TEST_CASE("a corner impulse reproduces the outer product of the periodic taps") {
    const auto spec = build_filters(Family::Haar);
    Plane impulse(4, 4);
    impulse.at(0, 0) = 1.0;
    const auto bands = analysis_step(impulse, spec, 1);
    const Band order[4] = {Band::LL, Band::LH, Band::HL, Band::HH};
    for (int b = 0; b < 4; ++b) {
        const auto& hr = row_filter(spec, order[b]);
        const auto& hc = col_filter(spec, order[b]);
        // direct 2-D circular convolution oracle
        const Plane expect = circ_conv2d(impulse, hr, hc, 1);
        CHECK(max_abs_diff(expect, bands[static_cast<std::size_t>(b)]) < 1e-15);
        // and the closed form: taps land at (y, x) in {0,1}^2
        for (int y = 0; y < 4; ++y)
            for (int x = 0; x < 4; ++x) {
                const double want = (y < 2 && x < 2) ? hr[static_cast<std::size_t>(y)] * hc[static_cast<std::size_t>(x)] : 0.0;
                CHECK(bands[static_cast<std::size_t>(b)].at(y, x) == doctest::Approx(want).epsilon(1e-14));
            }
    }
}

TEST_CASE("analysis_step matches the brute-force convolution oracle at every level") {
    Rng rng(23);
    for (Family f : {Family::Haar, Family::DB2}) {
        const auto spec = build_filters(f);
        const Plane plane = random_plane(16, 12, rng);
        const Band order[4] = {Band::LL, Band::LH, Band::HL, Band::HH};
        for (int level = 1; level <= 3; ++level) {
            const auto bands = analysis_step(plane, spec, level);
            for (int b = 0; b < 4; ++b) {
                const Plane expect =
                    circ_conv2d(plane, row_filter(spec, order[b]), col_filter(spec, order[b]), 1 << (level - 1));
                CHECK(max_abs_diff(expect, bands[static_cast<std::size_t>(b)]) < 1e-12);
            }
        }
    }
}

TEST_CASE("decompose rejects degenerate inputs") {
    const auto spec = build_filters(Family::Haar);
    CHECK_THROWS_AS(decompose(Plane(7, 16), spec), InputError);
    CHECK_THROWS_AS(decompose(Plane(16, 7), spec), InputError);
    CHECK_THROWS_AS(analysis_step(Plane(), spec, 1), InputError);
    CHECK_THROWS_AS(analysis_step(Plane(4, 4), spec, 0), InputError);
}

TEST_CASE("constant images vanish in all 48 sub-bands") {
    const auto spec = build_filters(Family::Haar);
    const auto stack = decompose(Plane(16, 16, 0.6), spec);
    REQUIRE(stack.channels == 48);
    double m = 0.0;
    for (double v : stack.data) m = std::max(m, std::abs(v));
    CHECK(m < 1e-8);
}

TEST_CASE("a 160x160 image decomposes into 48 x 160 x 160") {
    Rng rng(5);
    const auto spec = build_filters(Family::Haar);
    const auto stack = decompose(random_plane(160, 160, rng), spec);
    CHECK(stack.channels == 48);
    CHECK(stack.height == 160);
    CHECK(stack.width == 160);
    CHECK(stack.data.size() == 48u * 160u * 160u);
    CHECK(stack.paths.size() == 48);
}

TEST_CASE("channel order is the documented lexicographic contract") {
    const auto& paths = all_subband_paths();
    REQUIRE(paths.size() == 48);
    CHECK(paths[0].to_string() == "LH.LL.LL");
    CHECK(paths[47].to_string() == "HH.HH.HH");
    CHECK(paths[16].to_string() == "HL.LL.LL");
    for (int c = 0; c < 48; ++c) {
        CHECK(channel_of(path_at(c)) == c);
        CHECK(path_at(c).steps[0] != Band::LL);
    }
    CHECK(SubbandPath::from_string("LH.HL.HH").to_string() == "LH.HL.HH");
    CHECK_THROWS_AS(SubbandPath::from_string("LL.LL.LL"), CorruptDataError);
}

TEST_CASE("decompose equals composing analysis steps path by path") {
    Rng rng(31);
    for (Family f : {Family::Haar, Family::DB2}) {
        const auto spec = build_filters(f);
        const Plane image = random_plane(16, 16, rng);
        const auto stack = decompose(image, spec);
        for (int c = 0; c < 48; ++c) {
            const Plane expect = path_oracle(image, spec, stack.paths[static_cast<std::size_t>(c)]);
            double m = 0.0;
            for (int i = 0; i < 16 * 16; ++i)
                m = std::max(m, std::abs(expect.v[static_cast<std::size_t>(i)] - stack.channel(c)[i]));
            CHECK(m < 1e-8);
        }
    }
}

TEST_CASE("the undecimated periodic transform is shift-equivariant") {
    Rng rng(37);
    const auto spec = build_filters(Family::Haar);
    const Plane image = random_plane(16, 16, rng);
    const auto base = decompose(image, spec);
    const auto shifted = decompose(circular_shift(image, 3, 5), spec);
    double m = 0.0;
    for (int c = 0; c < 48; ++c) {
        Plane chan(16, 16);
        std::copy(base.channel(c), base.channel(c) + 256, chan.v.begin());
        const Plane expect = circular_shift(chan, 3, 5);
        for (int i = 0; i < 256; ++i)
            m = std::max(m, std::abs(expect.v[static_cast<std::size_t>(i)] - shifted.channel(c)[i]));
    }
    CHECK(m <= 1e-10);
}

TEST_CASE("decompose is linear") {
    Rng rng(41);
    const auto spec = build_filters(Family::DB2);
    const Plane a = random_plane(16, 16, rng), b = random_plane(16, 16, rng);
    Plane mix(16, 16);
    for (std::size_t i = 0; i < mix.size(); ++i) mix.v[i] = 0.7 * a.v[i] - 1.3 * b.v[i];
    const auto sa = decompose(a, spec), sb = decompose(b, spec), sm = decompose(mix, spec);
    double m = 0.0;
    for (std::size_t i = 0; i < sm.data.size(); ++i)
        m = std::max(m, std::abs(sm.data[i] - (0.7 * sa.data[i] - 1.3 * sb.data[i])));
    CHECK(m < 1e-10);
}

TEST_CASE("one undecimated haar step conserves 4x the input energy") {
    Rng rng(43);
    const auto spec = build_filters(Family::Haar);
    const Plane x = random_plane(16, 16, rng);
    const auto bands = analysis_step(x, spec, 1);
    double in_e = 0.0, out_e = 0.0;
    for (double v : x.v) in_e += v * v;
    for (const auto& b : bands)
        for (double v : b.v) out_e += v * v;
    CHECK(out_e == doctest::Approx(4.0 * in_e).epsilon(1e-8));
}

TEST_CASE("stack files round-trip and re-serialize byte-identically") {
    Rng rng(47);
    const auto spec = build_filters(Family::Haar);
    const auto stack = decompose(random_plane(16, 16, rng), spec);

    const auto dir = std::filesystem::temp_directory_path() / "morphdet_wavelet_test";
    std::filesystem::create_directories(dir);
    const std::string p1 = (dir / "a.sbs").string(), p2 = (dir / "b.sbs").string();
    write_stack(stack, p1);

    const auto loaded = read_stack(p1);
    CHECK(loaded.channels == 48);
    CHECK(loaded.height == 16);
    CHECK(loaded.width == 16);
    CHECK(loaded.paths == stack.paths);
    for (std::size_t i = 0; i < stack.data.size(); ++i)
        CHECK(loaded.data[i] == static_cast<double>(static_cast<float>(stack.data[i])));

    write_stack(loaded, p2);
    CHECK(file_hash(p1) == file_hash(p2));

    const auto sliced = read_stack_f32(p1, {0, 17, 47});
    CHECK(sliced.channels == 3);
    CHECK(sliced.paths[0].to_string() == "LH.LL.LL");
    CHECK(sliced.paths[2].to_string() == "HH.HH.HH");
    for (int i = 0; i < 16 * 16; ++i)
        CHECK(sliced.data[static_cast<std::size_t>(i)] == static_cast<float>(stack.channel(0)[i]));
    CHECK_THROWS_AS(read_stack_f32(p1, {48}), ArtifactError);
    std::filesystem::remove_all(dir);
}
