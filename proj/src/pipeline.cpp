// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 morphdet contributors

#include "morphdet/pipeline.hpp"

#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "morphdet/errors.hpp"
#include "morphdet/hash.hpp"
#include "morphdet/image_io.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace morphdet::pipeline {

namespace {

std::string iso_timestamp() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
    return buf;
}

void guard_file(const std::string& path, bool force) {
    if (!force && fs::exists(path))
        throw ArtifactError("refusing to overwrite " + path + " (use --force)");
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open for writing: " + path);
    out << text;
    if (!out) throw IoError("write failed: " + path);
}

std::string join_ints(const std::vector<int>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) s += ',';
        s += std::to_string(v[i]);
    }
    return s;
}

std::vector<int> parse_ints(const std::string& s) {
    std::vector<int> out;
    std::stringstream ss(s);
    std::string tok;
    while (std::getline(ss, tok, ',')) out.push_back(std::stoi(tok));
    return out;
}

std::string join_paths(const std::vector<wavelet::SubbandPath>& paths) {
    std::string s;
    for (std::size_t i = 0; i < paths.size(); ++i) {
        if (i) s += ',';
        s += paths[i].to_string();
    }
    return s;
}

std::vector<wavelet::SubbandPath> parse_paths(const std::string& s) {
    std::vector<wavelet::SubbandPath> out;
    std::stringstream ss(s);
    std::string tok;
    while (std::getline(ss, tok, ',')) out.push_back(wavelet::SubbandPath::from_string(tok));
    return out;
}

std::string fmt_double(double v) {
    char buf[48];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::vector<std::pair<std::string, std::string>> train_config_pairs(const train::TrainConfig& cfg,
                                                                    double lambda, int phase) {
    return {{"phase", std::to_string(phase)},
            {"lambda", fmt_double(lambda)},
            {"epochs", std::to_string(cfg.epochs)},
            {"lr0", fmt_double(cfg.lr0)},
            {"batch_size", std::to_string(cfg.batch_size)},
            {"seed", std::to_string(cfg.seed)},
            {"mode", sparsity::train_mode_name(cfg.mode)},
            {"threshold", fmt_double(cfg.threshold)}};
}

void write_config_txt(const std::string& path, const std::vector<std::pair<std::string, std::string>>& kv) {
    std::string text;
    for (const auto& [k, v] : kv) text += k + "=" + v + "\n";
    write_text(path, text);
}

}  // namespace

void claim_out_dir(const std::string& dir, bool force) {
    if (fs::exists(dir) && !fs::is_directory(dir))
        throw ArtifactError("output path exists and is not a directory: " + dir);
    if (fs::exists(dir) && !fs::is_empty(dir) && !force)
        throw ArtifactError("output directory " + dir + " is not empty (use --force)");
    fs::create_directories(dir);
}

void write_provenance(const std::string& dir, const std::string& command,
                      const std::vector<std::string>& input_paths,
                      const std::vector<std::pair<std::string, std::string>>& config) {
    json j;
    j["command"] = command;
    json inputs = json::object();
    for (const auto& p : input_paths) inputs[p] = file_hash(p);
    j["inputs"] = inputs;
    json cfg = json::object();
    for (const auto& [k, v] : config) cfg[k] = v;
    j["config"] = cfg;
    j["timestamp"] = iso_timestamp();
    write_text((fs::path(dir) / "provenance.json").string(), j.dump(2) + "\n");
}

std::string synth_stage(const data::SynthConfig& cfg, const std::string& out_dir, bool force) {
    cfg.validate();
    claim_out_dir(out_dir, force);
    const data::SynthResult result = data::synth_dataset(cfg, out_dir);
    const std::string manifest_path = (fs::path(out_dir) / "manifest.jsonl").string();
    data::write_manifest(result.manifest, manifest_path);
    write_provenance(out_dir, "synth", {},
                     {{"image_size", std::to_string(cfg.image_size)},
                      {"n_pairs", std::to_string(cfg.n_pairs)},
                      {"blob_count", std::to_string(cfg.blob_count)},
                      {"artifact_amplitude", fmt_double(cfg.artifact_amplitude)},
                      {"artifact_period", std::to_string(cfg.artifact_period)},
                      {"alpha", fmt_double(cfg.alpha)},
                      {"seed", std::to_string(cfg.seed)},
                      {"clamp_fraction", fmt_double(result.clamp_fraction)}});
    return manifest_path;
}

std::string decompose_stage(const std::string& manifest_path, const std::string& out_dir,
                            wavelet::Family family, int image_size, bool force) {
    const data::DatasetManifest manifest = data::read_manifest(manifest_path);
    if (manifest.entries.empty()) throw ArtifactError("manifest is empty: " + manifest_path);
    claim_out_dir(out_dir, force);

    const wavelet::WaveletSpec spec = wavelet::build_filters(family);
    data::DatasetManifest stacks;
    stacks.name = "stacks";
    std::vector<std::string> inputs{manifest_path};
    char name[64];
    for (std::size_t i = 0; i < manifest.entries.size(); ++i) {
        const auto& e = manifest.entries[i];
        const Plane img = data::load_image(e.path, image_size);
        const wavelet::SubbandStack stack = wavelet::decompose(img, spec);
        std::snprintf(name, sizeof name, "%05zu_%s.sbs", i, fs::path(e.path).stem().string().c_str());
        wavelet::write_stack(stack, (fs::path(out_dir) / name).string());
        stacks.entries.push_back({name, e.label, e.split});  // relative: dirs stay relocatable
        inputs.push_back(e.path);
    }
    const std::string stacks_path = (fs::path(out_dir) / "stacks.jsonl").string();
    data::write_manifest(stacks, stacks_path);
    write_provenance(out_dir, "decompose", inputs,
                     {{"family", wavelet::family_to_string(family)},
                      {"image_size", std::to_string(image_size)}});
    return stacks_path;
}

namespace {

std::vector<std::string> stack_input_paths(const std::string& stacks_manifest) {
    std::vector<std::string> inputs{stacks_manifest};
    for (const auto& e : data::read_manifest(stacks_manifest).entries) inputs.push_back(e.path);
    return inputs;
}

std::string write_run_dir(const std::string& out_dir, const train::TrainReport& report,
                          const train::TrainConfig& cfg, double lambda, int phase,
                          const std::vector<std::pair<std::string, std::string>>& extra_meta,
                          const train::DecomposedDataset& dataset) {
    write_text((fs::path(out_dir) / "report.json").string(), train::report_to_json(report, cfg, phase));
    auto kv = train_config_pairs(cfg, lambda, phase);
    write_config_txt((fs::path(out_dir) / "config.txt").string(), kv);

    std::vector<std::pair<std::string, std::string>> meta = kv;
    meta.emplace_back("paths", join_paths(dataset.paths));
    meta.emplace_back("val_auc", fmt_double(report.val_auc));
    meta.emplace_back("diverged", report.diverged ? "1" : "0");
    for (const auto& m : extra_meta) meta.push_back(m);
    const std::string ckpt = (fs::path(out_dir) / ("phase" + std::to_string(phase) + ".ckpt")).string();
    nn::save_checkpoint(report.final_params, meta, ckpt);
    return ckpt;
}

}  // namespace

std::string train_stage(const std::string& stacks_manifest, const train::TrainConfig& cfg,
                        const std::string& out_dir, bool force) {
    cfg.validate();
    claim_out_dir(out_dir, force);
    const train::DecomposedDataset dataset = train::load_dataset(stacks_manifest);
    const train::TrainReport report = train::train_phase1(dataset, cfg);
    if (report.diverged) {
        write_text((fs::path(out_dir) / "report.json").string(), train::report_to_json(report, cfg, 1));
        throw NumericError("training diverged; last-good checkpoint written to " + out_dir);
    }
    const std::string ckpt = write_run_dir(out_dir, report, cfg, cfg.lambda, 1, {}, dataset);
    write_provenance(out_dir, "train", stack_input_paths(stacks_manifest),
                     train_config_pairs(cfg, cfg.lambda, 1));
    return ckpt;
}

std::string select_stage(const std::string& checkpoint_path, const std::string& out_path,
                         double threshold_override, bool force) {
    guard_file(out_path, force);
    const auto ckpt = nn::load_checkpoint<float>(checkpoint_path);
    const std::string lambda_s = ckpt.meta_value("lambda");
    const std::string thresh_s = ckpt.meta_value("threshold");
    const std::string mode = ckpt.meta_value("mode");
    const std::string paths_s = ckpt.meta_value("paths");
    if (lambda_s.empty() || thresh_s.empty())
        throw ArtifactError("checkpoint lacks training metadata (not a phase-1 run?): " + checkpoint_path);
    const double lambda = std::stod(lambda_s);
    const double threshold = threshold_override > 0.0 ? threshold_override : std::stod(thresh_s);
    const auto paths = paths_s.empty() ? std::vector<wavelet::SubbandPath>{} : parse_paths(paths_s);

    const sparsity::SelectionResult sel =
        sparsity::select_subbands(ckpt.params.p.w1, lambda, threshold, paths, mode);
    sparsity::write_selection(sel, out_path);
    return out_path;
}

std::string sweep_stage(const std::string& stacks_manifest, const std::vector<double>& grid,
                        const train::TrainConfig& cfg, const std::string& out_dir, bool force) {
    cfg.validate();
    if (grid.empty()) throw ConfigError("sweep: empty lambda grid");
    claim_out_dir(out_dir, force);
    const train::DecomposedDataset dataset = train::load_dataset(stacks_manifest);

    std::vector<train::TrainReport> reports;
    const train::SweepResult result = train::sweep_lambda(dataset, grid, cfg, &reports);

    json entries = json::array();
    for (std::size_t i = 0; i < result.entries.size(); ++i) {
        const auto& e = result.entries[i];
        char sub[64];
        std::snprintf(sub, sizeof sub, "run_%02zu_lambda_%g", i, e.lambda);
        const std::string run_dir = (fs::path(out_dir) / sub).string();
        fs::create_directories(run_dir);
        train::TrainConfig c = cfg;
        c.lambda = e.lambda;
        if (!e.failed) write_run_dir(run_dir, reports[i], c, e.lambda, 1, {}, dataset);

        json je;
        je["lambda"] = e.lambda;
        je["val_auc"] = e.val_auc;
        je["n_selected"] = e.n_selected;
        je["failed"] = e.failed;
        je["run_dir"] = run_dir;
        entries.push_back(je);
    }
    json j;
    j["entries"] = entries;
    j["best_lambda"] = result.best_lambda;
    const std::string sweep_path = (fs::path(out_dir) / "sweep.json").string();
    write_text(sweep_path, j.dump(2) + "\n");
    write_provenance(out_dir, "sweep", stack_input_paths(stacks_manifest),
                     train_config_pairs(cfg, cfg.lambda, 1));
    return sweep_path;
}

std::string retrain_stage(const std::string& stacks_manifest, const std::string& selection_path,
                          const train::TrainConfig& cfg, const std::string& out_dir, bool force) {
    cfg.validate();
    claim_out_dir(out_dir, force);
    const sparsity::SelectionResult sel = sparsity::read_selection(selection_path);
    if (sel.selected.empty()) throw ArtifactError("selection is empty: " + selection_path);

    const train::DecomposedDataset reduced = train::load_dataset(stacks_manifest, sel.selected);
    train::TrainConfig cfg2 = cfg;
    cfg2.lambda = 0.0;
    const train::TrainReport report = train::train_phase2(reduced, cfg2);
    if (report.diverged) {
        write_text((fs::path(out_dir) / "report.json").string(), train::report_to_json(report, cfg2, 2));
        throw NumericError("retraining diverged; last-good checkpoint written to " + out_dir);
    }
    const std::string ckpt =
        write_run_dir(out_dir, report, cfg2, 0.0, 2, {{"selected", join_ints(sel.selected)}}, reduced);
    auto inputs = stack_input_paths(stacks_manifest);
    inputs.push_back(selection_path);
    write_provenance(out_dir, "retrain", inputs, train_config_pairs(cfg2, 0.0, 2));
    return ckpt;
}

metrics::MetricsReport eval_stage(const std::string& checkpoint_path, const std::string& stacks_manifest,
                                  data::Split split, const std::string& out_dir, bool force, int threads) {
    claim_out_dir(out_dir, force);
    const auto ckpt = nn::load_checkpoint<float>(checkpoint_path);
    const std::string selected_s = ckpt.meta_value("selected");
    const std::vector<int> selected = selected_s.empty() ? std::vector<int>{} : parse_ints(selected_s);

    const train::DecomposedDataset dataset = train::load_dataset(stacks_manifest, selected);
    const std::vector<train::StackSample>* samples = nullptr;
    switch (split) {
        case data::Split::Train: samples = &dataset.train; break;
        case data::Split::Val: samples = &dataset.val; break;
        case data::Split::Test: samples = &dataset.test; break;
    }
    if (samples->empty()) throw ArtifactError("requested split is empty");
    if (dataset.channels != ckpt.params.cfg.in_channels)
        throw ArtifactError("stack channel count does not match the checkpoint");

    const std::vector<double> raw = train::score_samples(ckpt.params, *samples, threads);
    metrics::ScoreSet scores;
    std::vector<int> labels;
    for (std::size_t i = 0; i < raw.size(); ++i) {
        const bool morph = (*samples)[i].label == data::Label::Morph;
        scores.push_back({raw[i], morph});
        labels.push_back(morph ? 1 : 0);
    }

    const metrics::MetricsReport report = metrics::compute_report(scores);
    write_text((fs::path(out_dir) / "report.json").string(), metrics::report_to_json(report));

    {
        std::ofstream out((fs::path(out_dir) / "scores.csv").string());
        if (!out) throw IoError("cannot write scores.csv");
        out << "label,score\n";
        out.precision(17);
        for (std::size_t i = 0; i < scores.size(); ++i) out << labels[i] << ',' << scores[i].score << '\n';
    }

    metrics::write_det_csv(metrics::det_curve(scores), (fs::path(out_dir) / "det.csv").string());

    // penultimate features for external embedding visualization
    const int C = ckpt.params.cfg.in_channels, S = ckpt.params.cfg.image_size;
    const std::size_t sample_len = static_cast<std::size_t>(C) * S * S;
    std::vector<float> batch(samples->size() * sample_len);
    for (std::size_t i = 0; i < samples->size(); ++i)
        std::copy((*samples)[i].x.begin(), (*samples)[i].x.end(), batch.begin() + i * sample_len);
    const auto embeddings =
        explain::extract_embeddings(ckpt.params, batch.data(), static_cast<int>(samples->size()), threads);
    explain::write_embeddings_csv(embeddings, labels, (fs::path(out_dir) / "embeddings.csv").string());

    write_provenance(out_dir, "eval", {checkpoint_path, stacks_manifest},
                     {{"split", data::split_name(split)}});
    return report;
}

void gradcam_stage(const std::string& checkpoint_path, const std::string& stack_path,
                   explain::TargetClass target, const std::string& out_prefix, bool force) {
    guard_file(out_prefix + ".pgm", force);
    guard_file(out_prefix + ".csv", force);
    const auto ckpt = nn::load_checkpoint<float>(checkpoint_path);
    const std::string selected_s = ckpt.meta_value("selected");
    const std::vector<int> selected = selected_s.empty() ? std::vector<int>{} : parse_ints(selected_s);

    const wavelet::StackF32 stack = wavelet::read_stack_f32(stack_path, selected);
    nn::validate_batch_dims(ckpt.params.cfg, stack.channels, stack.height, stack.width);

    const explain::CamMap cam = explain::grad_cam<float>(ckpt.params, stack.data.data(), target);
    const Plane base(stack.height, stack.width);
    explain::render_cam(cam, base, out_prefix);
}

metrics::ScoreSet read_scores_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw FileNotFoundError("no such scores file: " + path);
    std::string line;
    if (!std::getline(in, line) || line != "label,score")
        throw CorruptDataError("bad scores header in " + path);
    metrics::ScoreSet scores;
    int lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        const auto comma = line.find(',');
        if (comma == std::string::npos)
            throw CorruptDataError(path + ":" + std::to_string(lineno) + ": expected label,score");
        const int label = std::stoi(line.substr(0, comma));
        if (label != 0 && label != 1)
            throw CorruptDataError(path + ":" + std::to_string(lineno) + ": label must be 0 or 1");
        scores.push_back({std::stod(line.substr(comma + 1)), label == 1});
    }
    return scores;
}

void export_det_stage(const std::string& scores_csv, const std::string& out_csv, bool force) {
    guard_file(out_csv, force);
    metrics::write_det_csv(metrics::det_curve(read_scores_csv(scores_csv)), out_csv);
}

}  // namespace morphdet::pipeline
