// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 morphdet contributors

#include "morphdet/convnet.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>
#include <sstream>
#include <thread>

#include "morphdet/errors.hpp"

namespace morphdet::nn {

void ModelConfig::validate() const {
    if (in_channels < 1) throw ConfigError("model: in_channels must be >= 1");
    if (image_size < 4 || image_size % 4 != 0)
        throw ConfigError("model: image_size must be a positive multiple of 4 (two 2x2 pools)");
    for (int c : conv_channels)
        if (c < 1) throw ConfigError("model: conv channel counts must be >= 1");
}

std::size_t ModelConfig::param_count() const {
    const std::size_t k1 = static_cast<std::size_t>(conv_channels[0]) * in_channels * 9 + conv_channels[0];
    const std::size_t k2 = static_cast<std::size_t>(conv_channels[1]) * conv_channels[0] * 9 + conv_channels[1];
    const std::size_t k3 = static_cast<std::size_t>(conv_channels[2]) * conv_channels[1] * 9 + conv_channels[2];
    return k1 + k2 + k3 + conv_channels[2] + 1;
}

ModelConfig reduce_input_channels(const ModelConfig& cfg, const std::vector<int>& selected) {
    if (selected.empty()) throw SelectionError("channel reduction: empty selection");
    for (std::size_t i = 0; i < selected.size(); ++i) {
        if (selected[i] < 0 || selected[i] >= cfg.in_channels)
            throw SelectionError("channel reduction: index out of range: " + std::to_string(selected[i]));
        if (i > 0 && selected[i] <= selected[i - 1])
            throw SelectionError("channel reduction: indices must be strictly increasing");
    }
    ModelConfig out = cfg;
    out.in_channels = static_cast<int>(selected.size());
    return out;
}

void validate_batch_dims(const ModelConfig& cfg, int channels, int height, int width) {
    if (channels != cfg.in_channels)
        throw InputError("batch has " + std::to_string(channels) + " channels, model expects " +
                         std::to_string(cfg.in_channels));
    if (height != cfg.image_size || width != cfg.image_size)
        throw InputError("batch is " + std::to_string(height) + "x" + std::to_string(width) +
                         ", model expects " + std::to_string(cfg.image_size) + "x" +
                         std::to_string(cfg.image_size));
}

template <typename T>
Params<T> init_model(const ModelConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    Params<T> out;
    out.cfg = cfg;
    auto& p = out.p;
    p.w1 = Tensor4<T>(cfg.conv_channels[0], cfg.in_channels, 3, 3);
    p.w2 = Tensor4<T>(cfg.conv_channels[1], cfg.conv_channels[0], 3, 3);
    p.w3 = Tensor4<T>(cfg.conv_channels[2], cfg.conv_channels[1], 3, 3);
    p.b1.assign(static_cast<std::size_t>(cfg.conv_channels[0]), T(0));
    p.b2.assign(static_cast<std::size_t>(cfg.conv_channels[1]), T(0));
    p.b3.assign(static_cast<std::size_t>(cfg.conv_channels[2]), T(0));
    p.fc_w.assign(static_cast<std::size_t>(cfg.conv_channels[2]), T(0));
    p.fc_b.assign(1, T(0));

    Rng rng(mix64(seed, 0x1717c0de));
    auto he_fill = [&rng](std::vector<T>& v, int fan_in) {
        const double std = std::sqrt(2.0 / fan_in);
        for (auto& x : v) x = static_cast<T>(rng.normal() * std);
    };
    he_fill(p.w1.v, cfg.in_channels * 9);
    he_fill(p.w2.v, cfg.conv_channels[0] * 9);
    he_fill(p.w3.v, cfg.conv_channels[1] * 9);
    he_fill(p.fc_w, cfg.conv_channels[2]);
    return out;
}

template <typename T>
ParamSet<T> zeros_like(const ParamSet<T>& p) {
    ParamSet<T> z;
    z.w1 = Tensor4<T>(p.w1.n, p.w1.c, p.w1.h, p.w1.w);
    z.w2 = Tensor4<T>(p.w2.n, p.w2.c, p.w2.h, p.w2.w);
    z.w3 = Tensor4<T>(p.w3.n, p.w3.c, p.w3.h, p.w3.w);
    z.b1.assign(p.b1.size(), T(0));
    z.b2.assign(p.b2.size(), T(0));
    z.b3.assign(p.b3.size(), T(0));
    z.fc_w.assign(p.fc_w.size(), T(0));
    z.fc_b.assign(p.fc_b.size(), T(0));
    return z;
}

namespace {

// Zero-padded copy of a C x H x W block into C x (H+2) x (W+2).
template <typename T>
void pad_input(const T* in, int C, int H, int W, std::vector<T>& pad) {
    const int PH = H + 2, PW = W + 2;
    pad.assign(static_cast<std::size_t>(C) * PH * PW, T(0));
    for (int c = 0; c < C; ++c)
        for (int y = 0; y < H; ++y)
            std::memcpy(&pad[(static_cast<std::size_t>(c) * PH + y + 1) * PW + 1],
                        &in[(static_cast<std::size_t>(c) * H + y) * W], sizeof(T) * W);
}

// 3x3 convolution, stride 1, pad 1, from a pre-padded input.
// pad: C x (H+2) x (W+2), w: N x C x 3 x 3, out: N x H x W.
template <typename T>
void conv3x3_from_padded(const T* pad, int C, int H, int W, const T* w, const T* bias, int N, T* out) {
    const int PW = W + 2;
    const std::size_t plane = static_cast<std::size_t>(H) * W;
    for (int n = 0; n < N; ++n) {
        T* outp = out + static_cast<std::size_t>(n) * plane;
        const T b = bias ? bias[n] : T(0);
        std::fill(outp, outp + plane, b);
        for (int c = 0; c < C; ++c) {
            const T* w9 = w + (static_cast<std::size_t>(n) * C + c) * 9;
            const T w00 = w9[0], w01 = w9[1], w02 = w9[2];
            const T w10 = w9[3], w11 = w9[4], w12 = w9[5];
            const T w20 = w9[6], w21 = w9[7], w22 = w9[8];
            const T* padc = pad + static_cast<std::size_t>(c) * (H + 2) * PW;
            for (int y = 0; y < H; ++y) {
                const T* r0 = padc + static_cast<std::size_t>(y) * PW;
                const T* r1 = r0 + PW;
                const T* r2 = r1 + PW;
                T* o = outp + static_cast<std::size_t>(y) * W;
                for (int x = 0; x < W; ++x) {
                    o[x] += w00 * r0[x] + w01 * r0[x + 1] + w02 * r0[x + 2] +
                            w10 * r1[x] + w11 * r1[x + 1] + w12 * r1[x + 2] +
                            w20 * r2[x] + w21 * r2[x + 1] + w22 * r2[x + 2];
                }
            }
        }
    }
}

// Weight gradient: dW[n,c,ky,kx] = sum_{y,x} dout[n,y,x] * pad[c,y+ky,x+kx].
template <typename T>
void conv3x3_weight_grad(const T* pad, int C, int H, int W, const T* dout, int N, T* dw) {
    const int PW = W + 2;
    const std::size_t plane = static_cast<std::size_t>(H) * W;
    for (int n = 0; n < N; ++n) {
        const T* g = dout + static_cast<std::size_t>(n) * plane;
        for (int c = 0; c < C; ++c) {
            const T* padc = pad + static_cast<std::size_t>(c) * (H + 2) * PW;
            T s00 = 0, s01 = 0, s02 = 0, s10 = 0, s11 = 0, s12 = 0, s20 = 0, s21 = 0, s22 = 0;
            for (int y = 0; y < H; ++y) {
                const T* r0 = padc + static_cast<std::size_t>(y) * PW;
                const T* r1 = r0 + PW;
                const T* r2 = r1 + PW;
                const T* gr = g + static_cast<std::size_t>(y) * W;
#pragma omp simd reduction(+ : s00, s01, s02, s10, s11, s12, s20, s21, s22)
                for (int x = 0; x < W; ++x) {
                    const T gv = gr[x];
                    s00 += gv * r0[x];
                    s01 += gv * r0[x + 1];
                    s02 += gv * r0[x + 2];
                    s10 += gv * r1[x];
                    s11 += gv * r1[x + 1];
                    s12 += gv * r1[x + 2];
                    s20 += gv * r2[x];
                    s21 += gv * r2[x + 1];
                    s22 += gv * r2[x + 2];
                }
            }
            T* dw9 = dw + (static_cast<std::size_t>(n) * C + c) * 9;
            dw9[0] += s00; dw9[1] += s01; dw9[2] += s02;
            dw9[3] += s10; dw9[4] += s11; dw9[5] += s12;
            dw9[6] += s20; dw9[7] += s21; dw9[8] += s22;
        }
    }
}

// 2x2 max pool (stride 2) over ReLU(z), recording the argmax corner.
template <typename T>
void pool_relu_forward(const T* z, int N, int H, int W, T* out, std::uint8_t* idx) {
    const int OH = H / 2, OW = W / 2;
    for (int n = 0; n < N; ++n) {
        const T* zp = z + static_cast<std::size_t>(n) * H * W;
        T* op = out + static_cast<std::size_t>(n) * OH * OW;
        std::uint8_t* ip = idx + static_cast<std::size_t>(n) * OH * OW;
        for (int y = 0; y < OH; ++y) {
            for (int x = 0; x < OW; ++x) {
                const T* base = zp + static_cast<std::size_t>(2 * y) * W + 2 * x;
                T best = base[0] > T(0) ? base[0] : T(0);
                std::uint8_t bi = 0;
                const T cands[3] = {base[1], base[W], base[W + 1]};
                for (std::uint8_t k = 0; k < 3; ++k) {
                    const T v = cands[k] > T(0) ? cands[k] : T(0);
                    if (v > best) {
                        best = v;
                        bi = static_cast<std::uint8_t>(k + 1);
                    }
                }
                op[static_cast<std::size_t>(y) * OW + x] = best;
                ip[static_cast<std::size_t>(y) * OW + x] = bi;
            }
        }
    }
}

// Routes pooled gradients back through the argmax and the ReLU mask.
template <typename T>
void pool_relu_backward(const T* dout, const std::uint8_t* idx, const T* z, int N, int H, int W, T* dz) {
    const int OH = H / 2, OW = W / 2;
    std::fill(dz, dz + static_cast<std::size_t>(N) * H * W, T(0));
    for (int n = 0; n < N; ++n) {
        const T* dp = dout + static_cast<std::size_t>(n) * OH * OW;
        const std::uint8_t* ip = idx + static_cast<std::size_t>(n) * OH * OW;
        const T* zp = z + static_cast<std::size_t>(n) * H * W;
        T* gp = dz + static_cast<std::size_t>(n) * H * W;
        for (int y = 0; y < OH; ++y) {
            for (int x = 0; x < OW; ++x) {
                const std::uint8_t k = ip[static_cast<std::size_t>(y) * OW + x];
                const std::size_t pos =
                    static_cast<std::size_t>(2 * y + k / 2) * W + (2 * x + k % 2);
                if (zp[pos] > T(0)) gp[pos] += dp[static_cast<std::size_t>(y) * OW + x];
            }
        }
    }
}

}  // namespace

template <typename T>
Tensor4<T> transpose_rot180(const Tensor4<T>& w) {
    Tensor4<T> t(w.c, w.n, w.h, w.w);
    for (int n = 0; n < w.n; ++n)
        for (int c = 0; c < w.c; ++c)
            for (int y = 0; y < w.h; ++y)
                for (int x = 0; x < w.w; ++x) t.at(c, n, w.h - 1 - y, w.w - 1 - x) = w.at(n, c, y, x);
    return t;
}

template <typename T>
void forward_sample(const Params<T>& params, const T* x, SampleCache<T>& cache) {
    const ModelConfig& cfg = params.cfg;
    const int C = cfg.in_channels, S = cfg.image_size;
    const int N1 = cfg.conv_channels[0], N2 = cfg.conv_channels[1], N3 = cfg.conv_channels[2];
    const int S2 = S / 2, S4 = S / 4;
    cache.cfg = cfg;

    cache.x.assign(x, x + static_cast<std::size_t>(C) * S * S);
    cache.z1.resize(static_cast<std::size_t>(N1) * S * S);
    cache.a1.resize(static_cast<std::size_t>(N1) * S2 * S2);
    cache.i1.resize(cache.a1.size());
    cache.z2.resize(static_cast<std::size_t>(N2) * S2 * S2);
    cache.a2.resize(static_cast<std::size_t>(N2) * S4 * S4);
    cache.i2.resize(cache.a2.size());
    cache.z3.resize(static_cast<std::size_t>(N3) * S4 * S4);
    cache.a3.resize(cache.z3.size());
    cache.gap.resize(static_cast<std::size_t>(N3));

    std::vector<T> pad;
    pad_input(cache.x.data(), C, S, S, pad);
    conv3x3_from_padded(pad.data(), C, S, S, params.p.w1.data(), params.p.b1.data(), N1, cache.z1.data());
    pool_relu_forward(cache.z1.data(), N1, S, S, cache.a1.data(), cache.i1.data());

    pad_input(cache.a1.data(), N1, S2, S2, pad);
    conv3x3_from_padded(pad.data(), N1, S2, S2, params.p.w2.data(), params.p.b2.data(), N2, cache.z2.data());
    pool_relu_forward(cache.z2.data(), N2, S2, S2, cache.a2.data(), cache.i2.data());

    pad_input(cache.a2.data(), N2, S4, S4, pad);
    conv3x3_from_padded(pad.data(), N2, S4, S4, params.p.w3.data(), params.p.b3.data(), N3, cache.z3.data());
    for (std::size_t i = 0; i < cache.z3.size(); ++i) cache.a3[i] = cache.z3[i] > T(0) ? cache.z3[i] : T(0);

    const std::size_t plane3 = static_cast<std::size_t>(S4) * S4;
    T logit = params.p.fc_b[0];
    for (int k = 0; k < N3; ++k) {
        T acc = 0;
        const T* a = cache.a3.data() + static_cast<std::size_t>(k) * plane3;
        for (std::size_t i = 0; i < plane3; ++i) acc += a[i];
        cache.gap[static_cast<std::size_t>(k)] = acc / static_cast<T>(plane3);
        logit += params.p.fc_w[static_cast<std::size_t>(k)] * cache.gap[static_cast<std::size_t>(k)];
    }
    cache.logit = logit;
}

template <typename T>
void backward_sample(const Params<T>& params, const SampleCache<T>& cache, T dlogit,
                     const Tensor4<T>& wt2, const Tensor4<T>& wt3, ParamSet<T>& grad) {
    const ModelConfig& cfg = params.cfg;
    if (cache.cfg.in_channels != cfg.in_channels || cache.cfg.image_size != cfg.image_size ||
        cache.cfg.conv_channels != cfg.conv_channels)
        throw std::logic_error("backward_sample: cache does not match the parameters");
    const int C = cfg.in_channels, S = cfg.image_size;
    const int N1 = cfg.conv_channels[0], N2 = cfg.conv_channels[1], N3 = cfg.conv_channels[2];
    const int S2 = S / 2, S4 = S / 4;
    const std::size_t plane3 = static_cast<std::size_t>(S4) * S4;

    // head
    grad.fc_b[0] += dlogit;
    std::vector<T> dz3(static_cast<std::size_t>(N3) * plane3);
    for (int k = 0; k < N3; ++k) {
        grad.fc_w[static_cast<std::size_t>(k)] += dlogit * cache.gap[static_cast<std::size_t>(k)];
        const T da3 = dlogit * params.p.fc_w[static_cast<std::size_t>(k)] / static_cast<T>(plane3);
        const T* z = cache.z3.data() + static_cast<std::size_t>(k) * plane3;
        T* d = dz3.data() + static_cast<std::size_t>(k) * plane3;
        for (std::size_t i = 0; i < plane3; ++i) d[i] = z[i] > T(0) ? da3 : T(0);
    }

    // conv3
    std::vector<T> pad;
    pad_input(cache.a2.data(), N2, S4, S4, pad);
    conv3x3_weight_grad(pad.data(), N2, S4, S4, dz3.data(), N3, grad.w3.data());
    for (int n = 0; n < N3; ++n) {
        T acc = 0;
        const T* d = dz3.data() + static_cast<std::size_t>(n) * plane3;
        for (std::size_t i = 0; i < plane3; ++i) acc += d[i];
        grad.b3[static_cast<std::size_t>(n)] += acc;
    }
    std::vector<T> da2(static_cast<std::size_t>(N2) * plane3);
    pad_input(dz3.data(), N3, S4, S4, pad);
    conv3x3_from_padded(pad.data(), N3, S4, S4, wt3.data(), static_cast<const T*>(nullptr), N2, da2.data());

    // pool2 + relu2 + conv2
    std::vector<T> dz2(static_cast<std::size_t>(N2) * S2 * S2);
    pool_relu_backward(da2.data(), cache.i2.data(), cache.z2.data(), N2, S2, S2, dz2.data());
    pad_input(cache.a1.data(), N1, S2, S2, pad);
    conv3x3_weight_grad(pad.data(), N1, S2, S2, dz2.data(), N2, grad.w2.data());
    const std::size_t plane2 = static_cast<std::size_t>(S2) * S2;
    for (int n = 0; n < N2; ++n) {
        T acc = 0;
        const T* d = dz2.data() + static_cast<std::size_t>(n) * plane2;
        for (std::size_t i = 0; i < plane2; ++i) acc += d[i];
        grad.b2[static_cast<std::size_t>(n)] += acc;
    }
    std::vector<T> da1(static_cast<std::size_t>(N1) * plane2);
    pad_input(dz2.data(), N2, S2, S2, pad);
    conv3x3_from_padded(pad.data(), N2, S2, S2, wt2.data(), static_cast<const T*>(nullptr), N1, da1.data());

    // pool1 + relu1 + conv1
    std::vector<T> dz1(static_cast<std::size_t>(N1) * S * S);
    pool_relu_backward(da1.data(), cache.i1.data(), cache.z1.data(), N1, S, S, dz1.data());
    pad_input(cache.x.data(), C, S, S, pad);
    conv3x3_weight_grad(pad.data(), C, S, S, dz1.data(), N1, grad.w1.data());
    const std::size_t plane1 = static_cast<std::size_t>(S) * S;
    for (int n = 0; n < N1; ++n) {
        T acc = 0;
        const T* d = dz1.data() + static_cast<std::size_t>(n) * plane1;
        for (std::size_t i = 0; i < plane1; ++i) acc += d[i];
        grad.b1[static_cast<std::size_t>(n)] += acc;
    }
}

namespace {

int resolve_threads(int threads, int batch_size) {
    if (threads <= 0) threads = static_cast<int>(std::thread::hardware_concurrency());
    if (threads < 1) threads = 1;
    return std::min(threads, std::max(1, batch_size));
}

}  // namespace

template <typename T>
std::vector<T> forward_batch(const Params<T>& params, const T* batch, int batch_size,
                             int channels, int height, int width, int threads) {
    if (batch_size < 1) throw InputError("forward_batch: empty batch");
    validate_batch_dims(params.cfg, channels, height, width);
    const std::size_t sample = static_cast<std::size_t>(channels) * height * width;
    std::vector<T> logits(static_cast<std::size_t>(batch_size));
    const int nt = resolve_threads(threads, batch_size);
#pragma omp parallel num_threads(nt)
    {
        SampleCache<T> cache;
#pragma omp for schedule(static)
        for (int b = 0; b < batch_size; ++b) {
            forward_sample(params, batch + sample * static_cast<std::size_t>(b), cache);
            logits[static_cast<std::size_t>(b)] = cache.logit;
        }
    }
    return logits;
}

template <typename T>
BatchGrad<T> forward_backward_batch(const Params<T>& params, const T* batch, const int* labels,
                                    int batch_size, int channels, int height, int width, int threads) {
    if (batch_size < 1) throw InputError("forward_backward_batch: empty batch");
    validate_batch_dims(params.cfg, channels, height, width);
    for (int b = 0; b < batch_size; ++b)
        if (labels[b] != 0 && labels[b] != 1) throw InputError("labels must be 0 or 1");

    const std::size_t sample = static_cast<std::size_t>(channels) * height * width;
    const Tensor4<T> wt2 = transpose_rot180(params.p.w2);
    const Tensor4<T> wt3 = transpose_rot180(params.p.w3);

    std::vector<ParamSet<T>> slots;
    slots.reserve(static_cast<std::size_t>(batch_size));
    for (int b = 0; b < batch_size; ++b) slots.push_back(zeros_like(params.p));
    std::vector<double> losses(static_cast<std::size_t>(batch_size));

    const int nt = resolve_threads(threads, batch_size);
#pragma omp parallel num_threads(nt)
    {
        SampleCache<T> cache;
#pragma omp for schedule(static)
        for (int b = 0; b < batch_size; ++b) {
            forward_sample(params, batch + sample * static_cast<std::size_t>(b), cache);
            losses[static_cast<std::size_t>(b)] = bce_from_logit(static_cast<double>(cache.logit), labels[b]);
            const double dlogit =
                (sigmoid(static_cast<double>(cache.logit)) - labels[b]) / static_cast<double>(batch_size);
            backward_sample(params, cache, static_cast<T>(dlogit), wt2, wt3, slots[static_cast<std::size_t>(b)]);
        }
    }

    BatchGrad<T> out;
    out.grad = zeros_like(params.p);
    auto dst = out.grad.views();
    for (int b = 0; b < batch_size; ++b) {  // fixed reduction order
        auto src = slots[static_cast<std::size_t>(b)].views();
        for (std::size_t t = 0; t < dst.size(); ++t)
            for (std::size_t i = 0; i < dst[t].size(); ++i) dst[t][i] += src[t][i];
        out.loss += losses[static_cast<std::size_t>(b)];
    }
    out.loss /= batch_size;
    return out;
}

double sigmoid(double z) {
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

double bce_from_logit(double logit, int label) {
    if (label != 0 && label != 1) throw InputError("bce: label must be 0 or 1");
    const double softplus = logit > 0.0 ? logit + std::log1p(std::exp(-logit)) : std::log1p(std::exp(logit));
    return softplus - label * logit;
}

double bce_loss(const std::vector<double>& logits, const std::vector<int>& labels) {
    if (logits.empty()) throw InputError("bce_loss: empty batch");
    if (logits.size() != labels.size()) throw InputError("bce_loss: size mismatch");
    double acc = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) acc += bce_from_logit(logits[i], labels[i]);
    return acc / static_cast<double>(logits.size());
}

namespace {

void put_u32le(std::ostream& out, std::uint32_t x) {
    unsigned char b[4] = {static_cast<unsigned char>(x), static_cast<unsigned char>(x >> 8),
                          static_cast<unsigned char>(x >> 16), static_cast<unsigned char>(x >> 24)};
    out.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t get_u32le(std::istream& in, const std::string& path) {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    if (!in) throw CorruptDataError("truncated checkpoint: " + path);
    return std::uint32_t(b[0]) | (std::uint32_t(b[1]) << 8) | (std::uint32_t(b[2]) << 16) |
           (std::uint32_t(b[3]) << 24);
}

template <typename T>
void write_tensor(std::ostream& out, std::span<const T> v, const std::vector<std::uint32_t>& dims) {
    put_u32le(out, static_cast<std::uint32_t>(dims.size()));
    std::size_t expect = 1;
    for (auto d : dims) {
        put_u32le(out, d);
        expect *= d;
    }
    (void)expect;
    for (const T x : v) {
        const float f = static_cast<float>(x);
        std::uint32_t bits;
        std::memcpy(&bits, &f, 4);
        put_u32le(out, bits);
    }
}

template <typename T>
void read_tensor(std::istream& in, std::span<T> v, const std::string& path) {
    const std::uint32_t rank = get_u32le(in, path);
    if (rank < 1 || rank > 4) throw CorruptDataError("bad tensor rank in checkpoint: " + path);
    std::size_t count = 1;
    for (std::uint32_t i = 0; i < rank; ++i) count *= get_u32le(in, path);
    if (count != v.size()) throw CorruptDataError("tensor shape mismatch in checkpoint: " + path);
    for (std::size_t i = 0; i < count; ++i) {
        const std::uint32_t bits = get_u32le(in, path);
        float f;
        std::memcpy(&f, &bits, 4);
        v[i] = static_cast<T>(f);
    }
}

}  // namespace

template <typename T>
void save_checkpoint(const Params<T>& params, const std::vector<std::pair<std::string, std::string>>& meta,
                     const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open for writing: " + path);
    out << "CKPT1\n";
    out << "in_channels=" << params.cfg.in_channels << '\n';
    out << "image_size=" << params.cfg.image_size << '\n';
    out << "conv_channels=" << params.cfg.conv_channels[0] << ',' << params.cfg.conv_channels[1] << ','
        << params.cfg.conv_channels[2] << '\n';
    for (const auto& [k, v] : meta) out << k << '=' << v << '\n';
    out << "tensors=8\n";

    const auto& p = params.p;
    auto u32 = [](int x) { return static_cast<std::uint32_t>(x); };
    write_tensor<T>(out, std::span<const T>(p.w1.v), {u32(p.w1.n), u32(p.w1.c), 3, 3});
    write_tensor<T>(out, std::span<const T>(p.b1), {u32(static_cast<int>(p.b1.size()))});
    write_tensor<T>(out, std::span<const T>(p.w2.v), {u32(p.w2.n), u32(p.w2.c), 3, 3});
    write_tensor<T>(out, std::span<const T>(p.b2), {u32(static_cast<int>(p.b2.size()))});
    write_tensor<T>(out, std::span<const T>(p.w3.v), {u32(p.w3.n), u32(p.w3.c), 3, 3});
    write_tensor<T>(out, std::span<const T>(p.b3), {u32(static_cast<int>(p.b3.size()))});
    write_tensor<T>(out, std::span<const T>(p.fc_w), {u32(static_cast<int>(p.fc_w.size()))});
    write_tensor<T>(out, std::span<const T>(p.fc_b), {1});
    if (!out) throw IoError("write failed: " + path);
}

template <typename T>
std::string Checkpoint<T>::meta_value(const std::string& key) const {
    for (const auto& [k, v] : meta)
        if (k == key) return v;
    return "";
}

template <typename T>
Checkpoint<T> load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FileNotFoundError("no such checkpoint: " + path);
    std::string line;
    if (!std::getline(in, line) || line != "CKPT1") throw CorruptDataError("bad checkpoint magic: " + path);

    ModelConfig cfg;
    Checkpoint<T> out;
    bool have_tensors = false;
    while (std::getline(in, line)) {
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw CorruptDataError("bad checkpoint header line: " + path);
        const std::string key = line.substr(0, eq), value = line.substr(eq + 1);
        if (key == "in_channels") {
            cfg.in_channels = std::stoi(value);
        } else if (key == "image_size") {
            cfg.image_size = std::stoi(value);
        } else if (key == "conv_channels") {
            std::stringstream ss(value);
            std::string tok;
            for (int i = 0; i < 3; ++i) {
                if (!std::getline(ss, tok, ',')) throw CorruptDataError("bad conv_channels: " + path);
                cfg.conv_channels[static_cast<std::size_t>(i)] = std::stoi(tok);
            }
        } else if (key == "tensors") {
            if (std::stoi(value) != 8) throw CorruptDataError("unexpected tensor count: " + path);
            have_tensors = true;
            break;
        } else {
            out.meta.emplace_back(key, value);
        }
    }
    if (!have_tensors) throw CorruptDataError("checkpoint missing tensor block: " + path);
    cfg.validate();

    out.params.cfg = cfg;
    auto& p = out.params.p;
    p.w1 = Tensor4<T>(cfg.conv_channels[0], cfg.in_channels, 3, 3);
    p.w2 = Tensor4<T>(cfg.conv_channels[1], cfg.conv_channels[0], 3, 3);
    p.w3 = Tensor4<T>(cfg.conv_channels[2], cfg.conv_channels[1], 3, 3);
    p.b1.assign(static_cast<std::size_t>(cfg.conv_channels[0]), T(0));
    p.b2.assign(static_cast<std::size_t>(cfg.conv_channels[1]), T(0));
    p.b3.assign(static_cast<std::size_t>(cfg.conv_channels[2]), T(0));
    p.fc_w.assign(static_cast<std::size_t>(cfg.conv_channels[2]), T(0));
    p.fc_b.assign(1, T(0));
    for (auto view : p.views()) read_tensor<T>(in, view, path);
    return out;
}

// training runs in f32; verification harnesses instantiate f64
template Params<float> init_model<float>(const ModelConfig&, std::uint64_t);
template Params<double> init_model<double>(const ModelConfig&, std::uint64_t);
template ParamSet<float> zeros_like<float>(const ParamSet<float>&);
template ParamSet<double> zeros_like<double>(const ParamSet<double>&);
template Tensor4<float> transpose_rot180<float>(const Tensor4<float>&);
template Tensor4<double> transpose_rot180<double>(const Tensor4<double>&);
template void forward_sample<float>(const Params<float>&, const float*, SampleCache<float>&);
template void forward_sample<double>(const Params<double>&, const double*, SampleCache<double>&);
template void backward_sample<float>(const Params<float>&, const SampleCache<float>&, float,
                                     const Tensor4<float>&, const Tensor4<float>&, ParamSet<float>&);
template void backward_sample<double>(const Params<double>&, const SampleCache<double>&, double,
                                      const Tensor4<double>&, const Tensor4<double>&, ParamSet<double>&);
template std::vector<float> forward_batch<float>(const Params<float>&, const float*, int, int, int, int, int);
template std::vector<double> forward_batch<double>(const Params<double>&, const double*, int, int, int, int,
                                                   int);
template BatchGrad<float> forward_backward_batch<float>(const Params<float>&, const float*, const int*, int,
                                                        int, int, int, int);
template BatchGrad<double> forward_backward_batch<double>(const Params<double>&, const double*, const int*,
                                                          int, int, int, int, int);
template void save_checkpoint<float>(const Params<float>&,
                                     const std::vector<std::pair<std::string, std::string>>&,
                                     const std::string&);
template void save_checkpoint<double>(const Params<double>&,
                                      const std::vector<std::pair<std::string, std::string>>&,
                                      const std::string&);
template struct Checkpoint<float>;
template struct Checkpoint<double>;
template Checkpoint<float> load_checkpoint<float>(const std::string&);
template Checkpoint<double> load_checkpoint<double>(const std::string&);

}  // namespace morphdet::nn
