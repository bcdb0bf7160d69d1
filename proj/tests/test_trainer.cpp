// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 morphdet contributors

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <filesystem>

#include "doctest.h"
#include "morphdet/errors.hpp"
#include "morphdet/rng.hpp"
#include "morphdet/trainer.hpp"

using namespace morphdet;
using namespace morphdet::train;

namespace {

// Tiny separable dataset: morphs carry an alternating-sign pattern in
// channel 0; bona fides are low-amplitude noise.
DecomposedDataset make_dataset(int per_split_pairs, double strength = 3.0) {
    DecomposedDataset ds;
    ds.channels = 4;
    ds.height = 8;
    ds.width = 8;
    for (int c = 0; c < 4; ++c) ds.paths.push_back(wavelet::path_at(c));
    Rng rng(321);
    auto make = [&](bool morph) {
        StackSample s;
        s.label = morph ? data::Label::Morph : data::Label::BonaFide;
        s.x.resize(4 * 64);
        for (auto& v : s.x) v = static_cast<float>(rng.uniform(-0.1, 0.1));
        if (morph)
            for (int i = 0; i < 64; ++i)
                s.x[static_cast<std::size_t>(i)] += static_cast<float>(strength * (i % 2 ? 1.0 : -1.0));
        return s;
    };
    for (auto* split : {&ds.train, &ds.val, &ds.test})
        for (int i = 0; i < per_split_pairs; ++i) {
            split->push_back(make(false));
            split->push_back(make(true));
        }
    return ds;
}

TrainConfig quick_config(double lambda, int epochs = 8) {
    TrainConfig cfg;
    cfg.lambda = lambda;
    cfg.epochs = epochs;
    cfg.batch_size = 8;
    cfg.seed = 99;
    cfg.threads = 2;
    return cfg;
}

}  // namespace

TEST_CASE("learning rate decays by ten every twenty epochs") {
    CHECK(lr_at(0, 1e-3) == 1e-3);
    CHECK(lr_at(19, 1e-3) == 1e-3);
    CHECK(lr_at(20, 1e-3) == doctest::Approx(1e-4).epsilon(1e-15));
    CHECK(lr_at(40, 1e-3) == doctest::Approx(1e-5).epsilon(1e-15));
    CHECK(lr_at(149, 1e-3) == doctest::Approx(1e-3 / 1e7).epsilon(1e-12));
    for (int e = 1; e < 160; ++e) CHECK(lr_at(e, 1e-3) <= lr_at(e - 1, 1e-3));
    CHECK_THROWS_AS(lr_at(-1, 1e-3), InputError);
}

TEST_CASE("adam leaves parameters alone under zero gradients") {
    nn::ModelConfig mc;
    mc.in_channels = 2;
    mc.image_size = 4;
    mc.conv_channels = {1, 1, 1};
    auto params = nn::init_model<double>(mc, 7);
    const auto before = params.p;
    auto grads = nn::zeros_like(params.p);
    auto state = make_adam_state(params.p);
    adam_step(params.p, grads, state, 1e-3, AdamConfig{});
    auto va = params.p.views();
    auto vb = before.views();
    for (std::size_t t = 0; t < va.size(); ++t)
        for (std::size_t i = 0; i < va[t].size(); ++i) CHECK(va[t][i] == vb[t][i]);
}

TEST_CASE("the first adam step moves a scalar by minus lr") {
    nn::ModelConfig mc;
    mc.in_channels = 1;
    mc.image_size = 4;
    mc.conv_channels = {1, 1, 1};
    auto params = nn::init_model<double>(mc, 7);
    for (auto view : params.p.views())
        for (auto& v : view) v = 0.0;
    auto grads = nn::zeros_like(params.p);
    grads.fc_b[0] = 1.0;
    auto state = make_adam_state(params.p);
    adam_step(params.p, grads, state, 1e-3, AdamConfig{});
    // bias-corrected mhat/sqrt(vhat) is exactly 1, damped only by eps
    CHECK(std::abs(params.p.fc_b[0] + 1e-3) < 1e-9);
}

TEST_CASE("a five-step scalar trajectory matches the unrolled recurrence") {
    nn::ModelConfig mc;
    mc.in_channels = 1;
    mc.image_size = 4;
    mc.conv_channels = {1, 1, 1};
    auto params = nn::init_model<double>(mc, 7);
    for (auto view : params.p.views())
        for (auto& v : view) v = 0.0;
    params.p.fc_b[0] = 0.5;
    auto state = make_adam_state(params.p);
    const AdamConfig ac;
    const double lr = 0.01;
    const double gs[5] = {1.0, -2.0, 0.5, 3.0, -1.0};

    // independent unroll of the textbook recurrence
    double w = 0.5, m = 0.0, v = 0.0;
    for (int t = 1; t <= 5; ++t) {
        const double g = gs[t - 1];
        m = ac.beta1 * m + (1.0 - ac.beta1) * g;
        v = ac.beta2 * v + (1.0 - ac.beta2) * g * g;
        const double mhat = m / (1.0 - std::pow(ac.beta1, t));
        const double vhat = v / (1.0 - std::pow(ac.beta2, t));
        w -= lr * mhat / (std::sqrt(vhat) + ac.eps);

        auto grads = nn::zeros_like(params.p);
        grads.fc_b[0] = g;
        adam_step(params.p, grads, state, lr, ac);
        CHECK(std::abs(params.p.fc_b[0] - w) < 1e-12);
    }
}

TEST_CASE("non-finite gradients abort the adam step") {
    nn::ModelConfig mc;
    mc.in_channels = 1;
    mc.image_size = 4;
    mc.conv_channels = {1, 1, 1};
    auto params = nn::init_model<double>(mc, 7);
    auto grads = nn::zeros_like(params.p);
    grads.w1.v[0] = std::nan("");
    auto state = make_adam_state(params.p);
    CHECK_THROWS_AS(adam_step(params.p, grads, state, 1e-3, AdamConfig{}), NumericError);
}

TEST_CASE("training with zero lambda reports a zero penalty throughout") {
    const auto ds = make_dataset(4);
    const auto report = train_phase1(ds, quick_config(0.0, 5));
    REQUIRE(report.loss_history.size() == 5);
    for (const auto& e : report.loss_history) {
        CHECK(e.penalty == 0.0);
        CHECK(e.total == e.classification);
    }
    CHECK_FALSE(report.diverged);
}

TEST_CASE("the loss bookkeeping identity holds per epoch") {
    const auto ds = make_dataset(4);
    TrainConfig cfg = quick_config(0.02, 6);
    const auto report = train_phase1(ds, cfg);
    REQUIRE(report.norm_history.size() == report.loss_history.size());
    for (std::size_t e = 0; e < report.loss_history.size(); ++e) {
        double sum = 0.0;
        for (double n : report.norm_history[e]) sum += n;
        CHECK(std::abs(report.loss_history[e].penalty - cfg.lambda * sum) < 1e-9);
        CHECK(std::abs(report.loss_history[e].total -
                       (report.loss_history[e].classification + report.loss_history[e].penalty)) < 1e-9);
    }
}

TEST_CASE("identical configs and seeds replay identical histories") {
    const auto ds = make_dataset(3);
    const TrainConfig cfg = quick_config(0.01, 4);
    const auto a = train_phase1(ds, cfg);
    const auto b = train_phase1(ds, cfg);
    REQUIRE(a.loss_history.size() == b.loss_history.size());
    for (std::size_t e = 0; e < a.loss_history.size(); ++e) {
        CHECK(a.loss_history[e].classification == b.loss_history[e].classification);
        CHECK(a.loss_history[e].total == b.loss_history[e].total);
    }
    CHECK(a.val_auc == b.val_auc);
    CHECK(a.final_params.p.w1.v == b.final_params.p.w1.v);

    TrainConfig one_thread = cfg;
    one_thread.threads = 1;
    const auto c = train_phase1(ds, one_thread);
    CHECK(a.loss_history.back().total == c.loss_history.back().total);  // thread-count invariant
}

TEST_CASE("training descends on the separable toy dataset") {
    const auto ds = make_dataset(6);
    const auto report = train_phase1(ds, quick_config(0.0, 10));
    CHECK(report.loss_history.back().total < report.loss_history.front().total);
    CHECK(report.val_auc == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("heavy proximal runs drive whole groups to bitwise zero") {
    const auto ds = make_dataset(4);
    TrainConfig cfg = quick_config(50.0, 8);
    cfg.lr0 = 0.01;  // tau = lr * lambda = 0.5 per step: the snap must fire
    cfg.mode = sparsity::TrainMode::Proximal;
    const auto report = train_phase1(ds, cfg);
    const auto norms = sparsity::group_norms(report.final_params.p.w1);
    int exact_zero = 0;
    for (int c = 0; c < 4; ++c) {
        if (norms[static_cast<std::size_t>(c)] == 0.0) {
            ++exact_zero;
            for (int n = 0; n < report.final_params.p.w1.n; ++n)
                for (int i = 0; i < 9; ++i)
                    CHECK(report.final_params.p.w1.v[(static_cast<std::size_t>(n) * 4 + c) * 9 + i] == 0.0f);
        }
    }
    CHECK(exact_zero >= 1);
}

TEST_CASE("proximal training shrinks uninformative groups and keeps the signal on top") {
    const auto ds = make_dataset(8);
    TrainConfig cfg = quick_config(0.5, 30);
    cfg.batch_size = 2;  // enough optimizer steps for the penalty to grind
    cfg.lr0 = 2e-3;
    cfg.mode = sparsity::TrainMode::Proximal;
    const auto sparse = train_phase1(ds, cfg);
    TrainConfig dense_cfg = cfg;
    dense_cfg.lambda = 0.0;
    const auto dense = train_phase1(ds, dense_cfg);

    const auto sparse_norms = sparsity::group_norms(sparse.final_params.p.w1);
    const auto dense_norms = sparsity::group_norms(dense.final_params.p.w1);
    double sparse_sum = 0.0, dense_sum = 0.0;
    for (int c = 0; c < 4; ++c) {
        sparse_sum += sparse_norms[static_cast<std::size_t>(c)];
        dense_sum += dense_norms[static_cast<std::size_t>(c)];
    }
    CHECK(sparse_sum * 2.0 < dense_sum);  // the penalty bites
    // channel 0 carries the class signal and must own the largest norm
    for (int c = 1; c < 4; ++c) CHECK(sparse_norms[0] > sparse_norms[static_cast<std::size_t>(c)]);
    CHECK(sparse.val_auc == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("subgradient training also separates the toy data") {
    const auto ds = make_dataset(4);
    TrainConfig cfg = quick_config(0.01, 8);
    cfg.mode = sparsity::TrainMode::Subgradient;
    const auto report = train_phase1(ds, cfg);
    CHECK_FALSE(report.diverged);
    CHECK(report.val_auc > 0.9);
}

TEST_CASE("divergence keeps the last finite parameters and flags the run") {
    const auto ds = make_dataset(3);
    TrainConfig cfg = quick_config(0.0, 4);
    cfg.lr0 = 1e25;
    const auto report = train_phase1(ds, cfg);
    CHECK(report.diverged);
    CHECK(report.completed_epochs < 4);
    for (float v : report.final_params.p.w1.v) CHECK(std::isfinite(v));
}

TEST_CASE("sweeps pick the highest validation auc with ties toward larger lambda") {
    const auto ds = make_dataset(4);
    const TrainConfig cfg = quick_config(0.0, 6);

    const auto single = sweep_lambda(ds, {0.0}, cfg);
    CHECK(single.best_lambda == 0.0);
    REQUIRE(single.entries.size() == 1);
    CHECK_FALSE(single.entries[0].failed);

    const auto sweep = sweep_lambda(ds, {0.0, 0.01, 1.0}, cfg);
    REQUIRE(sweep.entries.size() == 3);
    CHECK(sweep.entries[2].n_selected <= sweep.entries[0].n_selected);  // heavier penalty, sparser model

    // the toy task is easy enough that both tiny lambdas reach the same auc
    const auto tie = sweep_lambda(ds, {1e-5, 2e-5}, cfg);
    if (tie.entries[0].val_auc == tie.entries[1].val_auc) CHECK(tie.best_lambda == 2e-5);
}

TEST_CASE("phase two retrains fresh on the reduced stack") {
    const auto ds = make_dataset(5);
    TrainConfig cfg = quick_config(0.03, 8);
    const auto phase1 = train_phase1(ds, cfg);
    const auto sel = sparsity::select_subbands(phase1.final_params.p.w1, cfg.lambda, cfg.threshold);
    REQUIRE(!sel.selected.empty());

    const auto reduced = slice_channels(ds, sel.selected);
    CHECK(reduced.channels == static_cast<int>(sel.selected.size()));
    CHECK(reduced.paths.size() == sel.selected.size());

    const auto phase2 = train_phase2(reduced, cfg);
    CHECK(phase2.final_params.p.w1.c == reduced.channels);
    CHECK(phase2.final_params.p.w1.n == 32);
    for (const auto& e : phase2.loss_history) CHECK(e.penalty == 0.0);
    CHECK(phase2.val_auc >= phase1.val_auc - 0.02);

    // identity selection keeps the original architecture
    const auto same = slice_channels(ds, {0, 1, 2, 3});
    CHECK(same.channels == ds.channels);
    CHECK_THROWS_AS(slice_channels(ds, {}), SelectionError);
    CHECK_THROWS_AS(slice_channels(ds, {4}), SelectionError);
}

TEST_CASE("datasets load from stack manifests with optional slicing") {
    namespace fs = std::filesystem;
    const auto dir = fs::temp_directory_path() / "morphdet_trainer_load";
    fs::remove_all(dir);
    fs::create_directories(dir);

    const auto spec = wavelet::build_filters(wavelet::Family::Haar);
    Rng rng(5);
    data::DatasetManifest m;
    const char* splits[3] = {"train", "train", "val"};
    for (int i = 0; i < 6; ++i) {
        Plane img(8, 8);
        for (auto& v : img.v) v = rng.uniform();
        const auto stack = wavelet::decompose(img, spec);
        const std::string name = "s" + std::to_string(i) + ".sbs";
        wavelet::write_stack(stack, (dir / name).string());
        m.entries.push_back({name, i % 2 ? data::Label::Morph : data::Label::BonaFide,
                             data::split_from_string(splits[i / 2])});
    }
    data::write_manifest(m, (dir / "stacks.jsonl").string());

    const auto full = load_dataset((dir / "stacks.jsonl").string());
    CHECK(full.channels == 48);
    CHECK(full.train.size() == 4);
    CHECK(full.val.size() == 2);
    CHECK(full.test.empty());

    const auto sliced = load_dataset((dir / "stacks.jsonl").string(), {0, 47});
    CHECK(sliced.channels == 2);
    CHECK(sliced.paths[1].to_string() == "HH.HH.HH");
    CHECK(sliced.train[0].x.size() == 2u * 64u);

    CHECK_THROWS_AS(load_dataset((dir / "nope.jsonl").string()), FileNotFoundError);
    fs::remove_all(dir);
}
