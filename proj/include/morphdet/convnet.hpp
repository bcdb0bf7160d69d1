// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 morphdet contributors

#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "morphdet/errors.hpp"
#include "morphdet/rng.hpp"

namespace morphdet::nn {

// N x C x KH x KW weight block (or any 4-D tensor), row-major.
template <typename T>
struct Tensor4 {
    int n = 0, c = 0, h = 0, w = 0;
    std::vector<T> v;

    Tensor4() = default;
    Tensor4(int n_, int c_, int h_, int w_)
        : n(n_), c(c_), h(h_), w(w_), v(static_cast<std::size_t>(n_) * c_ * h_ * w_, T(0)) {}

    T& at(int i, int j, int y, int x) { return v[((static_cast<std::size_t>(i) * c + j) * h + y) * w + x]; }
    T at(int i, int j, int y, int x) const { return v[((static_cast<std::size_t>(i) * c + j) * h + y) * w + x]; }
    std::size_t size() const { return v.size(); }
    T* data() { return v.data(); }
    const T* data() const { return v.data(); }
};

// Three 3x3 conv blocks (stride 1, zero-pad 1, ReLU), 2x2 max pool after the
// first two, global average pool, then a single-logit linear head. The first
// layer keeps the constrained shape: 32 filters over C input sub-bands.
struct ModelConfig {
    int in_channels = 48;
    int image_size = 64;
    std::array<int, 3> conv_channels{32, 64, 128};

    void validate() const;
    std::size_t param_count() const;
};

ModelConfig reduce_input_channels(const ModelConfig& cfg, const std::vector<int>& selected);

template <typename T>
struct ParamSet {
    Tensor4<T> w1, w2, w3;          // conv weights, N x C x 3 x 3
    std::vector<T> b1, b2, b3;      // conv biases
    std::vector<T> fc_w;            // final-channel-count weights of the logit head
    std::vector<T> fc_b;            // single element

    // Tensor views in declaration order; shared by Adam, serialization and
    // the finite-difference harness.
    std::vector<std::span<T>> views() {
        return {std::span<T>(w1.v), std::span<T>(b1), std::span<T>(w2.v), std::span<T>(b2),
                std::span<T>(w3.v), std::span<T>(b3), std::span<T>(fc_w), std::span<T>(fc_b)};
    }
    std::vector<std::span<const T>> views() const {
        return {std::span<const T>(w1.v), std::span<const T>(b1), std::span<const T>(w2.v), std::span<const T>(b2),
                std::span<const T>(w3.v), std::span<const T>(b3), std::span<const T>(fc_w), std::span<const T>(fc_b)};
    }
};

template <typename T>
struct Params {
    ModelConfig cfg;
    ParamSet<T> p;
};

// He fan-in normal init for weights, zero biases; one mt19937_64 stream per
// seed, so identical seeds give identical parameters.
template <typename T>
Params<T> init_model(const ModelConfig& cfg, std::uint64_t seed);

template <typename T>
ParamSet<T> zeros_like(const ParamSet<T>& p);

// Activations retained for backprop and Grad-CAM, one sample at a time.
template <typename T>
struct SampleCache {
    ModelConfig cfg;
    std::vector<T> x;                  // C x H x W input copy
    std::vector<T> z1, z2, z3;         // pre-ReLU conv outputs
    std::vector<T> a1, a2;             // post-ReLU, post-pool (conv2/conv3 inputs)
    std::vector<T> a3;                 // post-ReLU final conv block (Grad-CAM target)
    std::vector<std::uint8_t> i1, i2;  // pool argmax in {0,1,2,3}
    std::vector<T> gap;                // global average pool of a3
    T logit = T(0);
};

template <typename T>
void forward_sample(const Params<T>& params, const T* x, SampleCache<T>& cache);

// Gradient of `dlogit * logit` w.r.t. every parameter, accumulated into
// `grad` (callers zero it first). `wt2`/`wt3` are the rotated,
// channel-transposed conv2/conv3 weights used for the input-gradient passes;
// they depend only on params, so batch drivers build them once.
template <typename T>
void backward_sample(const Params<T>& params, const SampleCache<T>& cache, T dlogit,
                     const Tensor4<T>& wt2, const Tensor4<T>& wt3, ParamSet<T>& grad);

template <typename T>
Tensor4<T> transpose_rot180(const Tensor4<T>& w);

// Throws InputError when (C, H, W) does not match the model config.
void validate_batch_dims(const ModelConfig& cfg, int channels, int height, int width);

// B x C x H x W batch helpers. Work fans out over samples; per-sample
// results land in index-addressed slots and are reduced in index order, so
// logits and gradients do not depend on the worker count.
template <typename T>
std::vector<T> forward_batch(const Params<T>& params, const T* batch, int batch_size,
                             int channels, int height, int width, int threads);

template <typename T>
struct BatchGrad {
    ParamSet<T> grad;   // gradient of the mean BCE over the batch
    double loss = 0.0;  // mean BCE
};

template <typename T>
BatchGrad<T> forward_backward_batch(const Params<T>& params, const T* batch, const int* labels,
                                    int batch_size, int channels, int height, int width, int threads);

// Numerically stable scalar pieces.
double sigmoid(double z);
double bce_from_logit(double logit, int label);  // softplus form

// Mean binary cross-entropy between logits and {0,1} labels.
double bce_loss(const std::vector<double>& logits, const std::vector<int>& labels);

// "CKPT1" container: magic line, key=value config lines, then the parameter
// tensors in declaration order as little-endian f32 with u32 shape headers.
// `meta` lines ride along in the config block (lambda, mode, selection, ...).
template <typename T>
void save_checkpoint(const Params<T>& params, const std::vector<std::pair<std::string, std::string>>& meta,
                     const std::string& path);

template <typename T>
struct Checkpoint {
    Params<T> params;
    std::vector<std::pair<std::string, std::string>> meta;
    std::string meta_value(const std::string& key) const;  // "" when absent
};

template <typename T>
Checkpoint<T> load_checkpoint(const std::string& path);

}  // namespace morphdet::nn
