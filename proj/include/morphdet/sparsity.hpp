// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 morphdet contributors

#pragma once

#include <string>
#include <vector>

#include "morphdet/convnet.hpp"
#include "morphdet/wavelet.hpp"

namespace morphdet::sparsity {

// Channel group g of input channel c is the conv1 slice weights[:, c, :, :].
// All group arithmetic accumulates in double regardless of the weight type.

// Euclidean norm of every channel group of a first-layer weight tensor.
template <typename T>
std::vector<double> group_norms(const nn::Tensor4<T>& conv1_w);

// lambda * sum_c ||w[:, c, :, :]||_2  (the mixed L1,2 norm of the first layer)
template <typename T>
double penalty(const nn::Tensor4<T>& conv1_w, double lambda);

// Subgradient of the penalty: lambda * w / ||group|| per active group, zero
// block where the group norm is <= eps (the chosen subgradient at the kink).
template <typename T>
nn::Tensor4<T> penalty_subgradient(const nn::Tensor4<T>& conv1_w, double lambda, double eps = 1e-12);

// Block soft-threshold: each group scaled by max(0, 1 - tau/||g||); groups
// with ||g|| <= tau become exactly zero. In place. tau = step * lambda.
template <typename T>
void prox_group(nn::Tensor4<T>& conv1_w, double tau);

enum class TrainMode { Subgradient, Proximal };
const char* train_mode_name(TrainMode m);
TrainMode train_mode_from_string(const std::string& s);

struct SelectionResult {
    double lambda = 0.0;
    double threshold = 1e-3;
    std::string mode;                     // training mode recorded for audit
    std::vector<double> norms;            // all channel groups
    std::vector<int> selected;            // ascending, norms[c] >= threshold
    std::vector<wavelet::SubbandPath> paths;  // per selected index

    std::string to_json() const;
    static SelectionResult from_json(const std::string& text);
};

// Keep channels whose group norm clears the threshold. Empty selection
// throws SelectionError with the full norm dump. `paths` names the input
// channels (pass the stack paths; may be empty when unknown).
template <typename T>
SelectionResult select_subbands(const nn::Tensor4<T>& conv1_w, double lambda, double threshold,
                                const std::vector<wavelet::SubbandPath>& paths = {},
                                const std::string& mode = "");

void write_selection(const SelectionResult& sel, const std::string& path);
SelectionResult read_selection(const std::string& path);

}  // namespace morphdet::sparsity
