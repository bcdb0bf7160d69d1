// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 morphdet contributors

#pragma once

#include <string>
#include <vector>

namespace morphdet::metrics {

// Morph-likelihood score with its ground truth. Classification rule
// everywhere in this module: predict Morph iff score >= t.
struct ScoreEntry {
    double score = 0.0;
    bool is_morph = false;
};

using ScoreSet = std::vector<ScoreEntry>;

// Candidate operating points: every distinct score, the midpoints between
// neighbours, and one sentinel on each side. Finite-sample metrics sweep
// exactly this set.
std::vector<double> candidate_thresholds(const ScoreSet& scores);

// Fraction of morphs called bona fide at t (score < t). Needs >= 1 morph.
double apcer(const ScoreSet& scores, double t);

// Fraction of bona fides called morph at t (score >= t). Needs >= 1 bona fide.
double bpcer(const ScoreSet& scores, double t);

// Detection equal error rate: (APCER+BPCER)/2 at the candidate threshold
// minimizing |APCER-BPCER|, ties toward the smaller threshold.
double d_eer(const ScoreSet& scores);

// BPCER at the largest candidate threshold with APCER <= target.
double bpcer_at_apcer(const ScoreSet& scores, double target);

// Rank-based (Mann-Whitney) probability that a random morph outscores a
// random bona fide; ties count one half.
double auc(const ScoreSet& scores);

struct DetPoint {
    double threshold = 0.0;
    double apcer = 0.0;
    double bpcer = 0.0;
};

struct DetCurve {
    std::vector<DetPoint> points;  // threshold-ascending
};

DetCurve det_curve(const ScoreSet& scores);
void write_det_csv(const DetCurve& curve, const std::string& path);

struct MetricsReport {
    double d_eer = 0.0;
    double bpcer5 = 0.0;
    double bpcer10 = 0.0;
    double auc = 0.0;
    int n_bonafide = 0;
    int n_morph = 0;
};

MetricsReport compute_report(const ScoreSet& scores);
std::string report_to_json(const MetricsReport& r);

}  // namespace morphdet::metrics
