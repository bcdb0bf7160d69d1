// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 morphdet contributors

#include "morphdet/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "json.hpp"
#include "morphdet/errors.hpp"
#include "morphdet/metrics.hpp"

using nlohmann::json;

namespace morphdet::train {

void TrainConfig::validate() const {
    if (lambda < 0.0) throw ConfigError("train: lambda must be >= 0");
    if (epochs < 1) throw ConfigError("train: epochs must be >= 1");
    if (lr0 <= 0.0) throw ConfigError("train: lr0 must be > 0");
    if (batch_size < 1) throw ConfigError("train: batch_size must be >= 1");
    if (threshold <= 0.0) throw ConfigError("train: threshold must be > 0");
}

double lr_at(int epoch, double lr0) {
    if (epoch < 0) throw InputError("lr_at: epoch must be >= 0");
    double div = 1.0;
    for (int k = 0; k < epoch / 20; ++k) div *= 10.0;
    return lr0 / div;
}

template <typename T>
AdamState<T> make_adam_state(nn::ParamSet<T>& params) {
    AdamState<T> st;
    for (auto view : params.views()) {
        st.m.emplace_back(view.size(), T(0));
        st.v.emplace_back(view.size(), T(0));
    }
    return st;
}

template <typename T>
void adam_step(nn::ParamSet<T>& params, const nn::ParamSet<T>& grads, AdamState<T>& state, double lr,
               const AdamConfig& cfg) {
    const auto gviews = grads.views();
    for (const auto& g : gviews)
        for (const T x : g)
            if (!std::isfinite(static_cast<double>(x)))
                throw NumericError("adam_step: non-finite gradient; training aborted");

    auto pviews = params.views();
    if (pviews.size() != gviews.size() || pviews.size() != state.m.size())
        throw std::logic_error("adam_step: state does not match parameters");

    state.t += 1;
    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.t));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.t));
    for (std::size_t t = 0; t < pviews.size(); ++t) {
        if (pviews[t].size() != gviews[t].size()) throw std::logic_error("adam_step: shape mismatch");
        T* m = state.m[t].data();
        T* v = state.v[t].data();
        T* w = pviews[t].data();
        const T* g = gviews[t].data();
        for (std::size_t i = 0; i < pviews[t].size(); ++i) {
            const double gi = static_cast<double>(g[i]);
            const double mi = cfg.beta1 * static_cast<double>(m[i]) + (1.0 - cfg.beta1) * gi;
            const double vi = cfg.beta2 * static_cast<double>(v[i]) + (1.0 - cfg.beta2) * gi * gi;
            m[i] = static_cast<T>(mi);
            v[i] = static_cast<T>(vi);
            const double mhat = mi / bc1;
            const double vhat = vi / bc2;
            w[i] = static_cast<T>(static_cast<double>(w[i]) - lr * mhat / (std::sqrt(vhat) + cfg.eps));
        }
    }
}

void DecomposedDataset::validate_for_training() const {
    if (channels < 1 || height < 1 || width < 1) throw InputError("dataset has no geometry");
    auto has_both = [](const std::vector<StackSample>& v) {
        bool bona = false, morph = false;
        for (const auto& s : v) (s.label == data::Label::Morph ? morph : bona) = true;
        return bona && morph;
    };
    if (train.empty() || !has_both(train))
        throw InputError("train split needs at least one bona fide and one morph sample");
    if (val.empty() || !has_both(val))
        throw InputError("val split needs at least one bona fide and one morph sample");
}

DecomposedDataset load_dataset(const std::string& stacks_manifest, const std::vector<int>& selected) {
    const data::DatasetManifest manifest = data::read_manifest(stacks_manifest);
    DecomposedDataset ds;
    bool first = true;
    for (const auto& e : manifest.entries) {
        wavelet::StackF32 stack = wavelet::read_stack_f32(e.path, selected);
        if (first) {
            ds.channels = stack.channels;
            ds.height = stack.height;
            ds.width = stack.width;
            ds.paths = stack.paths;
            first = false;
        } else if (stack.channels != ds.channels || stack.height != ds.height || stack.width != ds.width ||
                   stack.paths != ds.paths) {
            throw ArtifactError("stack geometry mismatch at " + e.path);
        }
        StackSample s;
        s.x = std::move(stack.data);
        s.label = e.label;
        switch (e.split) {
            case data::Split::Train: ds.train.push_back(std::move(s)); break;
            case data::Split::Val: ds.val.push_back(std::move(s)); break;
            case data::Split::Test: ds.test.push_back(std::move(s)); break;
        }
    }
    if (first) throw ArtifactError("stacks manifest is empty: " + stacks_manifest);
    return ds;
}

DecomposedDataset slice_channels(const DecomposedDataset& full, const std::vector<int>& selected) {
    if (selected.empty()) throw SelectionError("slice_channels: empty selection");
    DecomposedDataset out;
    out.channels = static_cast<int>(selected.size());
    out.height = full.height;
    out.width = full.width;
    const std::size_t plane = static_cast<std::size_t>(full.height) * full.width;
    for (int c : selected) {
        if (c < 0 || c >= full.channels) throw SelectionError("slice_channels: index out of range");
        out.paths.push_back(full.paths.at(static_cast<std::size_t>(c)));
    }
    auto slice_all = [&](const std::vector<StackSample>& src, std::vector<StackSample>& dst) {
        dst.reserve(src.size());
        for (const auto& s : src) {
            StackSample t;
            t.label = s.label;
            t.x.resize(selected.size() * plane);
            for (std::size_t i = 0; i < selected.size(); ++i)
                std::copy_n(s.x.data() + static_cast<std::size_t>(selected[i]) * plane, plane,
                            t.x.data() + i * plane);
            dst.push_back(std::move(t));
        }
    };
    slice_all(full.train, out.train);
    slice_all(full.val, out.val);
    slice_all(full.test, out.test);
    return out;
}

std::vector<double> score_samples(const nn::Params<float>& params, const std::vector<StackSample>& samples,
                                  int threads) {
    std::vector<double> scores;
    scores.reserve(samples.size());
    if (samples.empty()) return scores;
    const int C = params.cfg.in_channels, S = params.cfg.image_size;
    const std::size_t sample_len = static_cast<std::size_t>(C) * S * S;
    const int chunk = 64;
    std::vector<float> batch(static_cast<std::size_t>(chunk) * sample_len);
    for (std::size_t start = 0; start < samples.size(); start += chunk) {
        const int nb = static_cast<int>(std::min<std::size_t>(chunk, samples.size() - start));
        for (int b = 0; b < nb; ++b) {
            const auto& x = samples[start + static_cast<std::size_t>(b)].x;
            if (x.size() != sample_len) throw InputError("sample/model geometry mismatch");
            std::copy(x.begin(), x.end(), batch.begin() + static_cast<std::size_t>(b) * sample_len);
        }
        const auto logits = nn::forward_batch(params, batch.data(), nb, C, S, S, threads);
        for (int b = 0; b < nb; ++b) scores.push_back(nn::sigmoid(static_cast<double>(logits[static_cast<std::size_t>(b)])));
    }
    return scores;
}

namespace {

double val_auc_of(const nn::Params<float>& params, const std::vector<StackSample>& val, int threads) {
    const auto scores = score_samples(params, val, threads);
    metrics::ScoreSet set;
    set.reserve(scores.size());
    for (std::size_t i = 0; i < scores.size(); ++i)
        set.push_back({scores[i], val[i].label == data::Label::Morph});
    return metrics::auc(set);
}

TrainReport run_training(const DecomposedDataset& dataset, const TrainConfig& cfg, double lambda) {
    cfg.validate();
    dataset.validate_for_training();
    if (dataset.height != dataset.width)
        throw InputError("training expects square stacks");

    nn::ModelConfig mc;
    mc.in_channels = dataset.channels;
    mc.image_size = dataset.height;
    mc.validate();

    nn::Params<float> params = init_model<float>(mc, cfg.seed);
    AdamState<float> adam = make_adam_state(params.p);

    const int n_train = static_cast<int>(dataset.train.size());
    const std::size_t sample_len = static_cast<std::size_t>(dataset.channels) * dataset.height * dataset.width;
    std::vector<float> batch(static_cast<std::size_t>(cfg.batch_size) * sample_len);
    std::vector<int> labels(static_cast<std::size_t>(cfg.batch_size));
    std::vector<int> order(static_cast<std::size_t>(n_train));
    std::iota(order.begin(), order.end(), 0);

    TrainReport report;
    nn::Params<float> last_good = params;

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        const double lr = lr_at(epoch, cfg.lr0);
        Rng shuffle_rng(mix64(cfg.seed, 0xe90c0000u + static_cast<std::uint64_t>(epoch)));
        shuffle_rng.shuffle(order);

        double loss_acc = 0.0;
        bool finite = true;
        for (int start = 0; start < n_train && finite; start += cfg.batch_size) {
            const int nb = std::min(cfg.batch_size, n_train - start);
            for (int b = 0; b < nb; ++b) {
                const auto& s = dataset.train[static_cast<std::size_t>(order[static_cast<std::size_t>(start + b)])];
                std::copy(s.x.begin(), s.x.end(), batch.begin() + static_cast<std::size_t>(b) * sample_len);
                labels[static_cast<std::size_t>(b)] = static_cast<int>(s.label);
            }
            try {
                auto bg = nn::forward_backward_batch(params, batch.data(), labels.data(), nb,
                                                     dataset.channels, dataset.height, dataset.width,
                                                     cfg.threads);
                if (!std::isfinite(bg.loss)) {
                    finite = false;
                    break;
                }
                if (lambda > 0.0) {
                    // Adam sees the full regularized objective in both modes.
                    // A bare prox pass (tau = lr * lambda) is numerically too
                    // weak against Adam's normalized steps to empty a group
                    // within a desk-scale schedule, so proximal mode layers
                    // the exact-zero block soft-threshold on top instead of
                    // replacing the penalty gradient.
                    const auto sub = sparsity::penalty_subgradient(params.p.w1, lambda);
                    for (std::size_t i = 0; i < sub.v.size(); ++i) bg.grad.w1.v[i] += sub.v[i];
                }
                adam_step(params.p, bg.grad, adam, lr, cfg.adam);
                if (cfg.mode == sparsity::TrainMode::Proximal && lambda > 0.0)
                    sparsity::prox_group(params.p.w1, lr * lambda);
                loss_acc += bg.loss * nb;
            } catch (const NumericError&) {
                finite = false;
            }
        }

        if (!finite) {
            report.diverged = true;
            report.final_params = last_good;  // last finite epoch (or the init)
            report.val_auc = val_auc_of(report.final_params, dataset.val, cfg.threads);
            return report;
        }

        EpochLoss el;
        el.classification = loss_acc / n_train;
        el.penalty = sparsity::penalty(params.p.w1, lambda);
        el.total = el.classification + el.penalty;
        report.loss_history.push_back(el);
        report.norm_history.push_back(sparsity::group_norms(params.p.w1));
        report.completed_epochs = epoch + 1;
        last_good = params;
    }

    report.final_params = std::move(params);
    report.val_auc = val_auc_of(report.final_params, dataset.val, cfg.threads);
    return report;
}

}  // namespace

TrainReport train_phase1(const DecomposedDataset& dataset, const TrainConfig& cfg) {
    return run_training(dataset, cfg, cfg.lambda);
}

TrainReport train_phase2(const DecomposedDataset& reduced, const TrainConfig& cfg) {
    // fresh initialization on the reduced stack, no sparsity penalty
    return run_training(reduced, cfg, 0.0);
}

SweepResult sweep_lambda(const DecomposedDataset& dataset, const std::vector<double>& grid,
                         const TrainConfig& cfg, std::vector<TrainReport>* reports) {
    if (grid.empty()) throw ConfigError("sweep: empty lambda grid");
    SweepResult result;
    for (double lambda : grid) {
        TrainConfig c = cfg;
        c.lambda = lambda;
        SweepEntry entry;
        entry.lambda = lambda;
        TrainReport rep = train_phase1(dataset, c);
        entry.failed = rep.diverged;
        entry.val_auc = rep.val_auc;
        if (!rep.diverged) {
            try {
                entry.n_selected = static_cast<int>(
                    sparsity::select_subbands(rep.final_params.p.w1, lambda, cfg.threshold).selected.size());
            } catch (const SelectionError&) {
                entry.n_selected = 0;
            }
        }
        result.entries.push_back(entry);
        if (reports) reports->push_back(std::move(rep));
    }
    for (std::size_t i = 0; i < result.entries.size(); ++i) {
        const auto& e = result.entries[i];
        if (e.failed) continue;
        if (result.best_index < 0) {
            result.best_index = static_cast<int>(i);
            continue;
        }
        const auto& best = result.entries[static_cast<std::size_t>(result.best_index)];
        if (e.val_auc > best.val_auc || (e.val_auc == best.val_auc && e.lambda > best.lambda))
            result.best_index = static_cast<int>(i);
    }
    if (result.best_index < 0) throw NumericError("sweep: every lambda diverged");
    result.best_lambda = result.entries[static_cast<std::size_t>(result.best_index)].lambda;
    return result;
}

std::string report_to_json(const TrainReport& report, const TrainConfig& cfg, int phase) {
    json j;
    j["phase"] = phase;
    j["lambda"] = phase == 2 ? 0.0 : cfg.lambda;
    j["mode"] = sparsity::train_mode_name(cfg.mode);
    j["epochs"] = cfg.epochs;
    j["completed_epochs"] = report.completed_epochs;
    j["seed"] = cfg.seed;
    j["lr0"] = cfg.lr0;
    j["batch_size"] = cfg.batch_size;
    j["threshold"] = cfg.threshold;
    j["diverged"] = report.diverged;
    j["val_auc"] = report.val_auc;
    json hist = json::array();
    for (const auto& e : report.loss_history) {
        json h;
        h["classification"] = e.classification;
        h["penalty"] = e.penalty;
        h["total"] = e.total;
        hist.push_back(h);
    }
    j["loss_history"] = hist;
    j["norm_history"] = report.norm_history;
    return j.dump(2) + "\n";
}

template AdamState<float> make_adam_state<float>(nn::ParamSet<float>&);
template AdamState<double> make_adam_state<double>(nn::ParamSet<double>&);
template void adam_step<float>(nn::ParamSet<float>&, const nn::ParamSet<float>&, AdamState<float>&, double,
                               const AdamConfig&);
template void adam_step<double>(nn::ParamSet<double>&, const nn::ParamSet<double>&, AdamState<double>&,
                                double, const AdamConfig&);

}  // namespace morphdet::train
