// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 morphdet contributors

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <filesystem>

#include "doctest.h"
#include "morphdet/errors.hpp"
#include "morphdet/rng.hpp"
#include "morphdet/sparsity.hpp"

using namespace morphdet;
using namespace morphdet::sparsity;
using morphdet::nn::Tensor4;

namespace {

Tensor4<double> random_conv1(int n, int c, Rng& rng) {
    Tensor4<double> w(n, c, 3, 3);
    for (auto& v : w.v) v = rng.uniform(-1.0, 1.0);
    return w;
}

// brute-force group norm: square, sum, sqrt, element by element
double norm_oracle(const Tensor4<double>& w, int c) {
    double acc = 0.0;
    for (int n = 0; n < w.n; ++n)
        for (int y = 0; y < w.h; ++y)
            for (int x = 0; x < w.w; ++x) acc += w.at(n, c, y, x) * w.at(n, c, y, x);
    return std::sqrt(acc);
}

}  // namespace

TEST_CASE("group norms match the elementwise oracle") {
    Tensor4<double> zero(4, 3, 3, 3);
    for (double n : group_norms(zero)) CHECK(n == 0.0);

    Tensor4<double> pyth(2, 2, 3, 3);
    pyth.at(0, 1, 0, 0) = 3.0;
    pyth.at(1, 1, 2, 2) = 4.0;
    const auto norms = group_norms(pyth);
    CHECK(norms[0] == 0.0);
    CHECK(norms[1] == doctest::Approx(5.0).epsilon(1e-15));

    Rng rng(1);
    const auto w = random_conv1(32, 48, rng);
    const auto got = group_norms(w);
    REQUIRE(got.size() == 48);
    for (int c = 0; c < 48; ++c) CHECK(std::abs(got[static_cast<std::size_t>(c)] - norm_oracle(w, c)) < 1e-10);
}

TEST_CASE("penalty is lambda times the norm sum") {
    Rng rng(2);
    const auto w = random_conv1(8, 6, rng);
    CHECK(penalty(w, 0.0) == 0.0);
    CHECK_THROWS_AS(penalty(w, -0.1), ConfigError);

    Tensor4<double> single(1, 1, 3, 3);
    single.at(0, 0, 0, 0) = 3.0;
    single.at(0, 0, 1, 1) = 4.0;
    CHECK(penalty(single, 0.003) == doctest::Approx(0.015).epsilon(1e-14));

    double sum = 0.0;
    for (double n : group_norms(w)) sum += n;
    CHECK(std::abs(penalty(w, 0.7) - 0.7 * sum) < 1e-12);
}

TEST_CASE("penalty is absolutely homogeneous in the weights") {
    Rng rng(3);
    auto w = random_conv1(4, 5, rng);
    const double base = penalty(w, 0.2);
    auto scaled = w;
    for (auto& v : scaled.v) v *= -2.5;
    CHECK(penalty(scaled, 0.2) == doctest::Approx(2.5 * base).epsilon(1e-12));
}

TEST_CASE("the subgradient is zero at the kink and lambda * w / norm elsewhere") {
    Tensor4<double> w(2, 3, 3, 3);
    w.at(0, 1, 0, 0) = 7.0;  // group 1 holds a single entry
    const auto g = penalty_subgradient(w, 0.01);
    CHECK(g.at(0, 1, 0, 0) == doctest::Approx(0.01).epsilon(1e-14));
    for (int n = 0; n < 2; ++n)
        for (int y = 0; y < 3; ++y)
            for (int x = 0; x < 3; ++x) {
                CHECK(g.at(n, 0, y, x) == 0.0);  // zero group: zero block
                CHECK(g.at(n, 2, y, x) == 0.0);
            }
    CHECK_THROWS_AS(penalty_subgradient(w, 0.01, 0.0), ConfigError);
}

TEST_CASE("the subgradient matches finite differences of the penalty for active groups") {
    Rng rng(5);
    auto w = random_conv1(3, 4, rng);
    const double lambda = 0.37;
    const auto g = penalty_subgradient(w, lambda);
    const double eps = 1e-6;
    for (std::size_t i = 0; i < w.v.size(); i += 7) {
        const double keep = w.v[i];
        w.v[i] = keep + eps;
        const double up = penalty(w, lambda);
        w.v[i] = keep - eps;
        const double dn = penalty(w, lambda);
        w.v[i] = keep;
        const double fd = (up - dn) / (2.0 * eps);
        CHECK(std::abs(g.v[i] - fd) / std::max(std::abs(fd), 1e-9) < 1e-6);
    }
}

TEST_CASE("subgradient blocks obey the dual-norm bound with equality on active groups") {
    Rng rng(7);
    auto w = random_conv1(6, 5, rng);
    // park one group exactly at zero
    for (int n = 0; n < 6; ++n)
        for (int y = 0; y < 3; ++y)
            for (int x = 0; x < 3; ++x) w.at(n, 3, y, x) = 0.0;
    const double lambda = 0.11;
    const auto g = penalty_subgradient(w, lambda);
    const auto gnorms = group_norms(g);
    const auto wnorms = group_norms(w);
    for (int c = 0; c < 5; ++c) {
        CHECK(gnorms[static_cast<std::size_t>(c)] <= lambda + 1e-12);
        if (wnorms[static_cast<std::size_t>(c)] > 1e-9)
            CHECK(gnorms[static_cast<std::size_t>(c)] == doctest::Approx(lambda).epsilon(1e-12));
    }
}

TEST_CASE("prox shrinks group norms by exactly tau and zeroes small groups") {
    Tensor4<double> w(1, 1, 3, 3);
    w.at(0, 0, 0, 0) = 3.0;
    w.at(0, 0, 1, 1) = 4.0;  // norm 5
    auto a = w;
    prox_group(a, 0.0);
    CHECK(a.v == w.v);  // identity prox

    auto b = w;
    prox_group(b, 2.0);
    CHECK(b.at(0, 0, 0, 0) == doctest::Approx(3.0 * 0.6).epsilon(1e-15));
    CHECK(b.at(0, 0, 1, 1) == doctest::Approx(4.0 * 0.6).epsilon(1e-15));
    CHECK(group_norms(b)[0] == doctest::Approx(3.0).epsilon(1e-12));

    auto c = w;
    prox_group(c, 5.0);  // tau == norm: exact zero block
    for (double v : c.v) CHECK(v == 0.0);
    CHECK_THROWS_AS(prox_group(c, -1.0), ConfigError);
}

TEST_CASE("prox satisfies the subgradient optimality condition on random groups") {
    Rng rng(11);
    for (int trial = 0; trial < 200; ++trial) {
        const int n = 1 + static_cast<int>(rng.below(4));
        const int c = 1 + static_cast<int>(rng.below(4));
        auto w0 = random_conv1(n, c, rng);
        const double tau = rng.uniform(0.0, 6.0);
        auto w = w0;
        prox_group(w, tau);
        const auto before = group_norms(w0);
        const auto after = group_norms(w);
        for (int g = 0; g < c; ++g) {
            // post-norm = max(0, pre-norm - tau)
            CHECK(std::abs(after[static_cast<std::size_t>(g)] -
                           std::max(0.0, before[static_cast<std::size_t>(g)] - tau)) < 1e-10);
            CHECK(after[static_cast<std::size_t>(g)] <= before[static_cast<std::size_t>(g)] + 1e-15);

            // optimality of argmin 0.5||w - w0||^2 + tau * ||g||:
            // nonzero groups: w - w0 + tau * w/||w|| = 0; zero groups: ||w0|| <= tau
            if (after[static_cast<std::size_t>(g)] > 0.0) {
                double residual = 0.0;
                for (int nn = 0; nn < n; ++nn)
                    for (int i = 0; i < 9; ++i) {
                        const std::size_t off = (static_cast<std::size_t>(nn) * c + g) * 9 + i;
                        const double r =
                            w.v[off] - w0.v[off] + tau * w.v[off] / after[static_cast<std::size_t>(g)];
                        residual += r * r;
                    }
                CHECK(std::sqrt(residual) < 1e-8);
            } else {
                CHECK(before[static_cast<std::size_t>(g)] <= tau + 1e-12);
            }
        }
    }
}

TEST_CASE("selection keeps channels at or above the threshold") {
    Tensor4<double> w(1, 4, 1, 1);
    w.at(0, 0, 0, 0) = 0.0005;
    w.at(0, 1, 0, 0) = 0.5;
    w.at(0, 2, 0, 0) = 0.0009;
    w.at(0, 3, 0, 0) = -0.2;
    const auto sel = select_subbands(w, 0.003, 0.001);
    CHECK(sel.selected == std::vector<int>{1, 3});
    CHECK(sel.lambda == 0.003);
    CHECK(sel.norms.size() == 4);

    Rng rng(13);
    auto big = random_conv1(32, 48, rng);
    const auto all = select_subbands(big, 0.0, 0.001);
    CHECK(all.selected.size() == 48);  // random taps are far above 1e-3

    Tensor4<double> tiny(1, 3, 1, 1);
    tiny.at(0, 0, 0, 0) = 1e-5;
    CHECK_THROWS_WITH_AS(select_subbands(tiny, 0.1, 0.001), doctest::Contains("norms"), SelectionError);
    CHECK_THROWS_AS(select_subbands(w, 0.0, 0.0), ConfigError);
}

TEST_CASE("selection is idempotent after zeroing the discarded groups") {
    Rng rng(17);
    auto w = random_conv1(4, 6, rng);
    for (auto& v : w.v) v *= 0.01;  // push some groups under the threshold
    w.at(0, 1, 0, 0) = 1.0;
    w.at(0, 4, 1, 1) = 0.8;
    const double thr = 0.5;
    const auto first = select_subbands(w, 0.0, thr);
    auto thresholded = w;
    const auto norms = group_norms(w);
    for (int c = 0; c < 6; ++c)
        if (norms[static_cast<std::size_t>(c)] < thr)
            for (int n = 0; n < 4; ++n)
                for (int i = 0; i < 9; ++i) thresholded.v[(static_cast<std::size_t>(n) * 6 + c) * 9 + i] = 0.0;
    const auto second = select_subbands(thresholded, 0.0, thr);
    CHECK(first.selected == second.selected);
}

TEST_CASE("selection results serialize to json and back") {
    Tensor4<double> w(2, 48, 3, 3);
    for (int n = 0; n < 2; ++n) w.at(n, 7, 1, 1) = 1.0;
    w.at(0, 20, 0, 0) = 0.7;
    const auto sel = select_subbands(w, 0.003, 0.001, wavelet::all_subband_paths(), "proximal");
    CHECK(sel.selected == std::vector<int>{7, 20});
    REQUIRE(sel.paths.size() == 2);
    CHECK(sel.paths[0].to_string() == wavelet::path_at(7).to_string());

    const auto dir = std::filesystem::temp_directory_path() / "morphdet_sparsity_test";
    std::filesystem::create_directories(dir);
    const std::string path = (dir / "selection.json").string();
    write_selection(sel, path);
    const auto loaded = read_selection(path);
    CHECK(loaded.selected == sel.selected);
    CHECK(loaded.lambda == sel.lambda);
    CHECK(loaded.threshold == sel.threshold);
    CHECK(loaded.mode == "proximal");
    CHECK(loaded.norms == sel.norms);
    REQUIRE(loaded.paths.size() == 2);
    CHECK(loaded.paths[1].to_string() == sel.paths[1].to_string());
    std::filesystem::remove_all(dir);
}
