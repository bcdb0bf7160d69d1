// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 morphdet contributors

#include "morphdet/sparsity.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "morphdet/errors.hpp"

using nlohmann::json;

namespace morphdet::sparsity {

namespace {

// sum of squares over the slice w[:, c, :, :], accumulated in double
template <typename T>
double group_sq(const nn::Tensor4<T>& w, int c) {
    double acc = 0.0;
    for (int n = 0; n < w.n; ++n) {
        const T* block = w.data() + (static_cast<std::size_t>(n) * w.c + c) * w.h * w.w;
        for (int i = 0; i < w.h * w.w; ++i) acc += static_cast<double>(block[i]) * static_cast<double>(block[i]);
    }
    return acc;
}

template <typename T>
void scale_group(nn::Tensor4<T>& w, int c, double factor) {
    for (int n = 0; n < w.n; ++n) {
        T* block = w.data() + (static_cast<std::size_t>(n) * w.c + c) * w.h * w.w;
        for (int i = 0; i < w.h * w.w; ++i)
            block[i] = factor == 0.0 ? T(0) : static_cast<T>(block[i] * factor);
    }
}

}  // namespace

template <typename T>
std::vector<double> group_norms(const nn::Tensor4<T>& conv1_w) {
    std::vector<double> norms(static_cast<std::size_t>(conv1_w.c));
    for (int c = 0; c < conv1_w.c; ++c) norms[static_cast<std::size_t>(c)] = std::sqrt(group_sq(conv1_w, c));
    return norms;
}

template <typename T>
double penalty(const nn::Tensor4<T>& conv1_w, double lambda) {
    if (lambda < 0.0) throw ConfigError("penalty: lambda must be >= 0");
    double acc = 0.0;
    for (int c = 0; c < conv1_w.c; ++c) acc += std::sqrt(group_sq(conv1_w, c));
    return lambda * acc;
}

template <typename T>
nn::Tensor4<T> penalty_subgradient(const nn::Tensor4<T>& conv1_w, double lambda, double eps) {
    if (eps <= 0.0) throw ConfigError("penalty_subgradient: eps must be > 0");
    nn::Tensor4<T> g(conv1_w.n, conv1_w.c, conv1_w.h, conv1_w.w);
    for (int c = 0; c < conv1_w.c; ++c) {
        const double norm = std::sqrt(group_sq(conv1_w, c));
        if (norm <= eps) continue;  // zero block: the chosen subgradient at the kink
        const double scale = lambda / norm;
        const int block = conv1_w.h * conv1_w.w;
        for (int n = 0; n < conv1_w.n; ++n) {
            const T* src = conv1_w.data() + (static_cast<std::size_t>(n) * conv1_w.c + c) * block;
            T* dst = g.data() + (static_cast<std::size_t>(n) * conv1_w.c + c) * block;
            for (int i = 0; i < block; ++i) dst[i] = static_cast<T>(src[i] * scale);
        }
    }
    return g;
}

template <typename T>
void prox_group(nn::Tensor4<T>& conv1_w, double tau) {
    if (tau < 0.0) throw ConfigError("prox_group: tau must be >= 0");
    if (tau == 0.0) return;
    for (int c = 0; c < conv1_w.c; ++c) {
        const double norm = std::sqrt(group_sq(conv1_w, c));
        if (norm <= tau) {
            scale_group(conv1_w, c, 0.0);
        } else {
            scale_group(conv1_w, c, 1.0 - tau / norm);
        }
    }
}

const char* train_mode_name(TrainMode m) {
    return m == TrainMode::Subgradient ? "subgradient" : "proximal";
}

TrainMode train_mode_from_string(const std::string& s) {
    if (s == "subgradient") return TrainMode::Subgradient;
    if (s == "proximal") return TrainMode::Proximal;
    throw ConfigError("unknown training mode: " + s + " (expected subgradient or proximal)");
}

template <typename T>
SelectionResult select_subbands(const nn::Tensor4<T>& conv1_w, double lambda, double threshold,
                                const std::vector<wavelet::SubbandPath>& paths, const std::string& mode) {
    if (threshold <= 0.0) throw ConfigError("select_subbands: threshold must be > 0");
    SelectionResult sel;
    sel.lambda = lambda;
    sel.threshold = threshold;
    sel.mode = mode;
    sel.norms = group_norms(conv1_w);
    for (int c = 0; c < conv1_w.c; ++c) {
        if (sel.norms[static_cast<std::size_t>(c)] >= threshold) {
            sel.selected.push_back(c);
            if (!paths.empty()) sel.paths.push_back(paths.at(static_cast<std::size_t>(c)));
        }
    }
    if (sel.selected.empty()) {
        std::ostringstream oss;
        oss << "selection is empty at threshold " << threshold << "; group norms:";
        for (double n : sel.norms) oss << ' ' << n;
        throw SelectionError(oss.str());
    }
    return sel;
}

std::string SelectionResult::to_json() const {
    json j;
    j["lambda"] = lambda;
    j["threshold"] = threshold;
    j["mode"] = mode;
    j["norms"] = norms;
    j["selected"] = selected;
    std::vector<std::string> path_strs;
    path_strs.reserve(paths.size());
    for (const auto& p : paths) path_strs.push_back(p.to_string());
    j["paths"] = path_strs;
    return j.dump(2) + "\n";
}

SelectionResult SelectionResult::from_json(const std::string& text) {
    SelectionResult sel;
    try {
        json j = json::parse(text);
        sel.lambda = j.at("lambda").get<double>();
        sel.threshold = j.at("threshold").get<double>();
        sel.mode = j.value("mode", "");
        sel.norms = j.at("norms").get<std::vector<double>>();
        sel.selected = j.at("selected").get<std::vector<int>>();
        for (const auto& s : j.at("paths").get<std::vector<std::string>>())
            sel.paths.push_back(wavelet::SubbandPath::from_string(s));
    } catch (const json::exception& e) {
        throw CorruptDataError(std::string("bad selection JSON: ") + e.what());
    }
    return sel;
}

void write_selection(const SelectionResult& sel, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open for writing: " + path);
    out << sel.to_json();
    if (!out) throw IoError("write failed: " + path);
}

SelectionResult read_selection(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw FileNotFoundError("no such selection file: " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return SelectionResult::from_json(ss.str());
}

template std::vector<double> group_norms<float>(const nn::Tensor4<float>&);
template std::vector<double> group_norms<double>(const nn::Tensor4<double>&);
template double penalty<float>(const nn::Tensor4<float>&, double);
template double penalty<double>(const nn::Tensor4<double>&, double);
template nn::Tensor4<float> penalty_subgradient<float>(const nn::Tensor4<float>&, double, double);
template nn::Tensor4<double> penalty_subgradient<double>(const nn::Tensor4<double>&, double, double);
template void prox_group<float>(nn::Tensor4<float>&, double);
template void prox_group<double>(nn::Tensor4<double>&, double);
template SelectionResult select_subbands<float>(const nn::Tensor4<float>&, double, double,
                                                const std::vector<wavelet::SubbandPath>&, const std::string&);
template SelectionResult select_subbands<double>(const nn::Tensor4<double>&, double, double,
                                                 const std::vector<wavelet::SubbandPath>&, const std::string&);

}  // namespace morphdet::sparsity
