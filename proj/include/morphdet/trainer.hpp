// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 morphdet contributors

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "morphdet/convnet.hpp"
#include "morphdet/dataio.hpp"
#include "morphdet/sparsity.hpp"
#include "morphdet/wavelet.hpp"

namespace morphdet::train {

struct AdamConfig {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

struct TrainConfig {
    double lambda = 0.0;
    int epochs = 150;
    double lr0 = 1e-3;
    int batch_size = 32;
    std::uint64_t seed = 7;
    sparsity::TrainMode mode = sparsity::TrainMode::Proximal;
    double threshold = 1e-3;
    AdamConfig adam;
    int threads = 0;  // 0 = hardware concurrency; never affects results

    void validate() const;
};

// lr0 / 10^floor(epoch / 20)
double lr_at(int epoch, double lr0);

// Per-tensor first/second moments plus the shared step counter.
template <typename T>
struct AdamState {
    std::vector<std::vector<T>> m, v;
    long t = 0;
};

template <typename T>
AdamState<T> make_adam_state(nn::ParamSet<T>& params);

// Standard bias-corrected Adam update. Throws NumericError on non-finite
// gradients before touching the parameters.
template <typename T>
void adam_step(nn::ParamSet<T>& params, const nn::ParamSet<T>& grads, AdamState<T>& state,
               double lr, const AdamConfig& cfg);

// One decomposed sample: selected channels of a sub-band stack, f32.
struct StackSample {
    std::vector<float> x;  // C x H x W
    data::Label label = data::Label::BonaFide;
};

struct DecomposedDataset {
    int channels = 0;
    int height = 0;
    int width = 0;
    std::vector<wavelet::SubbandPath> paths;
    std::vector<StackSample> train, val, test;

    void validate_for_training() const;
};

// Loads every stack named by a stacks manifest (JSON-lines over .sbs files),
// optionally slicing to `selected` channel indices.
DecomposedDataset load_dataset(const std::string& stacks_manifest, const std::vector<int>& selected = {});

DecomposedDataset slice_channels(const DecomposedDataset& full, const std::vector<int>& selected);

struct EpochLoss {
    double classification = 0.0;
    double penalty = 0.0;
    double total = 0.0;
};

struct TrainReport {
    std::vector<EpochLoss> loss_history;
    std::vector<std::vector<double>> norm_history;  // conv1 group norms per epoch
    nn::Params<float> final_params;
    double val_auc = 0.0;
    bool diverged = false;
    int completed_epochs = 0;
};

// Phase 1: minimize BCE + lambda * ||w_l1||_{1,2}. The penalty subgradient
// rides in the Adam gradient in both modes; Proximal additionally applies
// the exact-zero block soft-threshold (tau = lr * lambda) to conv1 after
// each step. Epoch order is shuffled deterministically from cfg.seed. On
// divergence the last finite epoch's parameters are kept and `diverged` is
// set.
TrainReport train_phase1(const DecomposedDataset& dataset, const TrainConfig& cfg);

// Phase 2: fresh init on the reduced stack, no penalty.
TrainReport train_phase2(const DecomposedDataset& reduced, const TrainConfig& cfg);

// Morph-likelihood (sigmoid of logit) for every sample of a split.
std::vector<double> score_samples(const nn::Params<float>& params, const std::vector<StackSample>& samples,
                                  int threads);

struct SweepEntry {
    double lambda = 0.0;
    double val_auc = 0.0;
    int n_selected = 0;
    bool failed = false;
};

struct SweepResult {
    std::vector<SweepEntry> entries;
    double best_lambda = 0.0;  // argmax val AUC, ties toward larger lambda
    int best_index = -1;
};

inline const std::vector<double> kDefaultLambdaGrid{1e-4, 3e-4, 1e-3, 3e-3, 1e-2, 3e-2};

SweepResult sweep_lambda(const DecomposedDataset& dataset, const std::vector<double>& grid,
                         const TrainConfig& cfg,
                         std::vector<TrainReport>* reports = nullptr);

std::string report_to_json(const TrainReport& report, const TrainConfig& cfg, int phase);

}  // namespace morphdet::train
