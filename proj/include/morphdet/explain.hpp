// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 morphdet contributors

#pragma once

#include <string>
#include <vector>

#include "morphdet/convnet.hpp"
#include "morphdet/plane.hpp"

namespace morphdet::explain {

enum class TargetClass { BonaFide, Morph };

// With a single-logit head the class score is the logit for Morph and its
// negation for BonaFide.
double class_sign(TargetClass target);

// Non-negative heat map over the final conv feature-map grid.
struct CamMap {
    Plane values;  // H' x W', all >= 0
    TargetClass target = TargetClass::Morph;
};

template <typename T>
struct CamIntermediates {
    std::vector<double> alpha;    // per feature map: mean of dy/dA over the grid
    std::vector<T> feature_maps;  // K x H' x W' activation A
    int k = 0, h = 0, w = 0;
    int z = 0;  // H' * W'
};

// ReLU(sum_k alpha_k A^k) at the final conv block, alpha_k the global
// average of dy/dA^k for the requested class score.
template <typename T>
CamMap grad_cam(const nn::Params<T>& params, const T* x, TargetClass target,
                CamIntermediates<T>* intermediates = nullptr);

// The weighted-sum-then-ReLU composition on its own (alpha: K, maps: K x H x W).
Plane cam_compose(const std::vector<double>& alpha, const std::vector<double>& maps, int k, int h, int w);

// Global-average-pooled final conv activations, one row per sample.
template <typename T>
std::vector<std::vector<T>> extract_embeddings(const nn::Params<T>& params, const T* batch, int batch_size,
                                               int threads);

// CSV with header label,f0..f{K-1}.
void write_embeddings_csv(const std::vector<std::vector<float>>& rows, const std::vector<int>& labels,
                          const std::string& path);

// Min-max normalizes the map (all-zero and constant maps become all-zero),
// bilinearly upsamples to the base image size and writes <prefix>.pgm, plus
// the unnormalized grid as <prefix>.csv.
void render_cam(const CamMap& cam, const Plane& base_image, const std::string& out_prefix);

}  // namespace morphdet::explain
