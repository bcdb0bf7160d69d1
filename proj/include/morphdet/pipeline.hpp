// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 morphdet contributors

#pragma once

#include <string>
#include <vector>

#include "morphdet/dataio.hpp"
#include "morphdet/explain.hpp"
#include "morphdet/metrics.hpp"
#include "morphdet/trainer.hpp"
#include "morphdet/wavelet.hpp"

namespace morphdet::pipeline {

// Staged runs with on-disk artifacts. Every stage writes a provenance.json
// (inputs with content hashes, effective config, timestamp); timestamps live
// only there, so everything else is byte-reproducible.

// Refuses to reuse a non-empty directory unless force is set.
void claim_out_dir(const std::string& dir, bool force);

void write_provenance(const std::string& dir, const std::string& command,
                      const std::vector<std::string>& input_paths,
                      const std::vector<std::pair<std::string, std::string>>& config);

// synth: images + manifest.jsonl under out_dir. Returns the manifest path.
std::string synth_stage(const data::SynthConfig& cfg, const std::string& out_dir, bool force);

// decompose: one .sbs per manifest entry plus stacks.jsonl under out_dir.
// image_size 0 keeps source sizes.
std::string decompose_stage(const std::string& manifest_path, const std::string& out_dir,
                            wavelet::Family family, int image_size, bool force);

// train (phase 1) / retrain (phase 2): run directory with config.txt,
// report.json and phase<N>.ckpt. Returns the checkpoint path.
std::string train_stage(const std::string& stacks_manifest, const train::TrainConfig& cfg,
                        const std::string& out_dir, bool force);
std::string retrain_stage(const std::string& stacks_manifest, const std::string& selection_path,
                          const train::TrainConfig& cfg, const std::string& out_dir, bool force);

// select: selection.json from a phase-1 checkpoint (lambda/mode/threshold
// and the channel paths ride in the checkpoint; threshold <= 0 keeps the
// recorded one).
std::string select_stage(const std::string& checkpoint_path, const std::string& out_path,
                         double threshold_override, bool force);

// sweep: per-lambda run directories plus sweep.json under out_dir.
std::string sweep_stage(const std::string& stacks_manifest, const std::vector<double>& grid,
                        const train::TrainConfig& cfg, const std::string& out_dir, bool force);

// eval: report.json (metrics), scores.csv, embeddings.csv, det.csv.
metrics::MetricsReport eval_stage(const std::string& checkpoint_path, const std::string& stacks_manifest,
                                  data::Split split, const std::string& out_dir, bool force, int threads = 0);

// gradcam: <prefix>.pgm + <prefix>.csv for one stack file.
void gradcam_stage(const std::string& checkpoint_path, const std::string& stack_path,
                   explain::TargetClass target, const std::string& out_prefix, bool force);

// export-det: DET curve CSV from an eval scores.csv.
void export_det_stage(const std::string& scores_csv, const std::string& out_csv, bool force);

metrics::ScoreSet read_scores_csv(const std::string& path);

}  // namespace morphdet::pipeline
