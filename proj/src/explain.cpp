// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 morphdet contributors

#include "morphdet/explain.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "morphdet/errors.hpp"
#include "morphdet/image_io.hpp"

namespace morphdet::explain {

double class_sign(TargetClass target) {
    return target == TargetClass::Morph ? 1.0 : -1.0;
}

template <typename T>
CamMap grad_cam(const nn::Params<T>& params, const T* x, TargetClass target,
                CamIntermediates<T>* intermediates) {
    nn::SampleCache<T> cache;
    nn::forward_sample(params, x, cache);

    const int K = params.cfg.conv_channels[2];
    const int S4 = params.cfg.image_size / 4;
    const int Z = S4 * S4;
    const double sign = class_sign(target);

    // y = sign * (fc_w . gap(A) + fc_b) with A the post-ReLU final conv
    // activation, so dy/dA[k,i,j] = sign * fc_w[k] / Z everywhere and the
    // grid average alpha_k equals that constant.
    std::vector<double> alpha(static_cast<std::size_t>(K));
    for (int k = 0; k < K; ++k)
        alpha[static_cast<std::size_t>(k)] = sign * static_cast<double>(params.p.fc_w[static_cast<std::size_t>(k)]) / Z;

    CamMap cam;
    cam.target = target;
    cam.values = Plane(S4, S4);
    for (int i = 0; i < S4; ++i) {
        for (int j = 0; j < S4; ++j) {
            double acc = 0.0;
            for (int k = 0; k < K; ++k)
                acc += alpha[static_cast<std::size_t>(k)] *
                       static_cast<double>(cache.a3[(static_cast<std::size_t>(k) * S4 + i) * S4 + j]);
            cam.values.at(i, j) = acc > 0.0 ? acc : 0.0;
        }
    }

    if (intermediates) {
        intermediates->alpha = std::move(alpha);
        intermediates->feature_maps = cache.a3;
        intermediates->k = K;
        intermediates->h = S4;
        intermediates->w = S4;
        intermediates->z = Z;
    }
    return cam;
}

Plane cam_compose(const std::vector<double>& alpha, const std::vector<double>& maps, int k, int h, int w) {
    if (alpha.size() != static_cast<std::size_t>(k) || maps.size() != static_cast<std::size_t>(k) * h * w)
        throw InputError("cam_compose: shape mismatch");
    Plane out(h, w);
    for (int i = 0; i < h; ++i) {
        for (int j = 0; j < w; ++j) {
            double acc = 0.0;
            for (int m = 0; m < k; ++m) acc += alpha[static_cast<std::size_t>(m)] * maps[(static_cast<std::size_t>(m) * h + i) * w + j];
            out.at(i, j) = acc > 0.0 ? acc : 0.0;
        }
    }
    return out;
}

template <typename T>
std::vector<std::vector<T>> extract_embeddings(const nn::Params<T>& params, const T* batch, int batch_size,
                                               int threads) {
    if (batch_size < 1) throw InputError("extract_embeddings: empty batch");
    (void)threads;  // per-sample loop below is cheap relative to training
    const int C = params.cfg.in_channels, S = params.cfg.image_size;
    const std::size_t sample = static_cast<std::size_t>(C) * S * S;
    std::vector<std::vector<T>> rows(static_cast<std::size_t>(batch_size));
    nn::SampleCache<T> cache;
    for (int b = 0; b < batch_size; ++b) {
        nn::forward_sample(params, batch + sample * static_cast<std::size_t>(b), cache);
        rows[static_cast<std::size_t>(b)] = cache.gap;
    }
    return rows;
}

void write_embeddings_csv(const std::vector<std::vector<float>>& rows, const std::vector<int>& labels,
                          const std::string& path) {
    if (rows.size() != labels.size()) throw InputError("embeddings/labels size mismatch");
    std::ofstream out(path);
    if (!out) throw IoError("cannot open for writing: " + path);
    const std::size_t dim = rows.empty() ? 0 : rows.front().size();
    out << "label";
    for (std::size_t i = 0; i < dim; ++i) out << ",f" << i;
    out << '\n';
    out.precision(9);
    for (std::size_t r = 0; r < rows.size(); ++r) {
        out << labels[r];
        for (const float v : rows[r]) out << ',' << v;
        out << '\n';
    }
    if (!out) throw IoError("write failed: " + path);
}

void render_cam(const CamMap& cam, const Plane& base_image, const std::string& out_prefix) {
    for (double v : cam.values.v)
        if (!std::isfinite(v)) throw InputError("render_cam: non-finite CAM values");

    // raw, unnormalized grid
    {
        std::ofstream out(out_prefix + ".csv");
        if (!out) throw IoError("cannot open for writing: " + out_prefix + ".csv");
        out.precision(17);
        for (int y = 0; y < cam.values.rows; ++y) {
            for (int x = 0; x < cam.values.cols; ++x) {
                if (x) out << ',';
                out << cam.values.at(y, x);
            }
            out << '\n';
        }
    }

    double lo = cam.values.v[0], hi = cam.values.v[0];
    for (double v : cam.values.v) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    Plane norm(cam.values.rows, cam.values.cols);
    if (hi > lo) {
        for (std::size_t i = 0; i < norm.size(); ++i) norm.v[i] = (cam.values.v[i] - lo) / (hi - lo);
    }
    // constant (incl. all-zero) maps stay all-zero
    Plane up = bilinear_resize(norm, base_image.rows, base_image.cols);
    write_pgm(up, out_prefix + ".pgm");
}

template CamMap grad_cam<float>(const nn::Params<float>&, const float*, TargetClass, CamIntermediates<float>*);
template CamMap grad_cam<double>(const nn::Params<double>&, const double*, TargetClass,
                                 CamIntermediates<double>*);
template std::vector<std::vector<float>> extract_embeddings<float>(const nn::Params<float>&, const float*,
                                                                   int, int);
template std::vector<std::vector<double>> extract_embeddings<double>(const nn::Params<double>&, const double*,
                                                                     int, int);

}  // namespace morphdet::explain
