// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 morphdet contributors

#include "morphdet/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "json.hpp"
#include "morphdet/errors.hpp"

namespace morphdet::metrics {

namespace {

struct Counts {
    int n_bona = 0;
    int n_morph = 0;
};

Counts count_labels(const ScoreSet& scores) {
    Counts c;
    for (const auto& e : scores) {
        if (!std::isfinite(e.score)) throw MetricError("scores must be finite");
        if (e.is_morph)
            ++c.n_morph;
        else
            ++c.n_bona;
    }
    return c;
}

void require_morph(const Counts& c) {
    if (c.n_morph < 1) throw MetricError("score set has no morph entries");
}

void require_bona(const Counts& c) {
    if (c.n_bona < 1) throw MetricError("score set has no bona fide entries");
}

}  // namespace

std::vector<double> candidate_thresholds(const ScoreSet& scores) {
    if (scores.empty()) throw MetricError("empty score set");
    std::vector<double> vals;
    vals.reserve(scores.size());
    for (const auto& e : scores) vals.push_back(e.score);
    std::sort(vals.begin(), vals.end());
    vals.erase(std::unique(vals.begin(), vals.end()), vals.end());

    std::vector<double> out;
    out.reserve(2 * vals.size() + 1);
    out.push_back(vals.front() - 1.0);  // everything classified morph
    for (std::size_t i = 0; i < vals.size(); ++i) {
        out.push_back(vals[i]);
        if (i + 1 < vals.size()) out.push_back(0.5 * (vals[i] + vals[i + 1]));
    }
    out.push_back(vals.back() + 1.0);  // everything classified bona fide
    return out;
}

double apcer(const ScoreSet& scores, double t) {
    const Counts c = count_labels(scores);
    require_morph(c);
    int miss = 0;
    for (const auto& e : scores) miss += e.is_morph && e.score < t;
    return static_cast<double>(miss) / c.n_morph;
}

double bpcer(const ScoreSet& scores, double t) {
    const Counts c = count_labels(scores);
    require_bona(c);
    int false_alarm = 0;
    for (const auto& e : scores) false_alarm += !e.is_morph && e.score >= t;
    return static_cast<double>(false_alarm) / c.n_bona;
}

double d_eer(const ScoreSet& scores) {
    const Counts c = count_labels(scores);
    require_morph(c);
    require_bona(c);
    double best_gap = -1.0, best_value = 0.0;
    for (double t : candidate_thresholds(scores)) {
        const double a = apcer(scores, t);
        const double b = bpcer(scores, t);
        const double gap = std::abs(a - b);
        if (best_gap < 0.0 || gap < best_gap) {  // strict: ties keep the smaller threshold
            best_gap = gap;
            best_value = 0.5 * (a + b);
        }
    }
    return best_value;
}

double bpcer_at_apcer(const ScoreSet& scores, double target) {
    if (target < 0.0 || target > 1.0) throw ConfigError("bpcer_at_apcer: target must be in [0,1]");
    const Counts c = count_labels(scores);
    require_morph(c);
    require_bona(c);
    double result = 1.0;
    bool found = false;
    for (double t : candidate_thresholds(scores)) {  // ascending: keep the largest feasible
        if (apcer(scores, t) <= target) {
            result = bpcer(scores, t);
            found = true;
        }
    }
    if (!found) throw MetricError("no feasible threshold for the APCER target");  // unreachable: t -> -inf gives 0
    return result;
}

double auc(const ScoreSet& scores) {
    const Counts c = count_labels(scores);
    require_morph(c);
    require_bona(c);

    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return scores[a].score < scores[b].score; });

    // midranks over tied runs, then the Mann-Whitney statistic
    std::vector<double> rank(scores.size());
    std::size_t i = 0;
    while (i < order.size()) {
        std::size_t j = i;
        while (j + 1 < order.size() && scores[order[j + 1]].score == scores[order[i]].score) ++j;
        const double mid = 0.5 * (static_cast<double>(i + 1) + static_cast<double>(j + 1));
        for (std::size_t k = i; k <= j; ++k) rank[order[k]] = mid;
        i = j + 1;
    }
    double morph_rank_sum = 0.0;
    for (std::size_t k = 0; k < scores.size(); ++k)
        if (scores[k].is_morph) morph_rank_sum += rank[k];
    const double nm = c.n_morph, nb = c.n_bona;
    return (morph_rank_sum - nm * (nm + 1.0) / 2.0) / (nm * nb);
}

DetCurve det_curve(const ScoreSet& scores) {
    const Counts c = count_labels(scores);
    require_morph(c);
    require_bona(c);
    DetCurve curve;
    for (double t : candidate_thresholds(scores))
        curve.points.push_back({t, apcer(scores, t), bpcer(scores, t)});
    return curve;
}

void write_det_csv(const DetCurve& curve, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open for writing: " + path);
    out << "threshold,apcer,bpcer\n";
    out.precision(17);
    for (const auto& p : curve.points) out << p.threshold << ',' << p.apcer << ',' << p.bpcer << '\n';
    if (!out) throw IoError("write failed: " + path);
}

MetricsReport compute_report(const ScoreSet& scores) {
    const Counts c = count_labels(scores);
    MetricsReport r;
    r.d_eer = d_eer(scores);
    r.bpcer5 = bpcer_at_apcer(scores, 0.05);
    r.bpcer10 = bpcer_at_apcer(scores, 0.10);
    r.auc = auc(scores);
    r.n_bonafide = c.n_bona;
    r.n_morph = c.n_morph;
    return r;
}

std::string report_to_json(const MetricsReport& r) {
    nlohmann::json j;
    j["d_eer"] = r.d_eer;
    j["bpcer5"] = r.bpcer5;
    j["bpcer10"] = r.bpcer10;
    j["auc"] = r.auc;
    j["n_bonafide"] = r.n_bonafide;
    j["n_morph"] = r.n_morph;
    return j.dump(2) + "\n";
}

}  // namespace morphdet::metrics
