// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 morphdet contributors

#include <cstdio>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "morphdet/errors.hpp"
#include "morphdet/pipeline.hpp"

namespace md = morphdet;

namespace {

std::vector<double> parse_grid(const std::string& csv) {
    std::vector<double> grid;
    std::stringstream ss(csv);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        if (tok.empty()) continue;
        std::size_t used = 0;
        const double v = std::stod(tok, &used);
        if (used != tok.size()) throw md::ConfigError("bad lambda grid entry: " + tok);
        grid.push_back(v);
    }
    if (grid.empty()) throw md::ConfigError("lambda grid is empty");
    return grid;
}

void add_train_options(CLI::App* cmd, md::train::TrainConfig& cfg, std::string& mode) {
    cmd->add_option("--epochs", cfg.epochs, "training epochs")->capture_default_str();
    cmd->add_option("--lr0", cfg.lr0, "initial learning rate (divided by 10 every 20 epochs)")
        ->capture_default_str();
    cmd->add_option("--batch-size", cfg.batch_size, "samples per step")->capture_default_str();
    cmd->add_option("--seed", cfg.seed, "run seed")->capture_default_str();
    cmd->add_option("--mode", mode, "sparsity mode: proximal or subgradient")->capture_default_str();
    cmd->add_option("--threshold", cfg.threshold, "group-norm selection threshold")->capture_default_str();
    cmd->add_option("--threads", cfg.threads, "worker threads (0 = all cores)")->capture_default_str();
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"wavelet sub-band morph detector: group-sparse sub-band selection pipeline"};
    app.require_subcommand(1);
    app.fallthrough();  // lets --config appear after the subcommand name
    app.set_config("--config", "", "key=value config file ([section] per subcommand)");
    app.allow_config_extras(false);  // unknown keys are configuration errors

    // synth
    md::data::SynthConfig synth_cfg;
    std::string synth_out;
    bool synth_force = false;
    auto* synth = app.add_subcommand("synth", "generate the synthetic bona fide / morph dataset");
    synth->add_option("--out", synth_out, "output directory")->required();
    synth->add_option("--pairs", synth_cfg.n_pairs, "bona fide / morph pair count")->capture_default_str();
    synth->add_option("--image-size", synth_cfg.image_size, "square image size")->capture_default_str();
    synth->add_option("--blobs", synth_cfg.blob_count, "Gaussian blobs per bona fide")->capture_default_str();
    synth->add_option("--amplitude", synth_cfg.artifact_amplitude, "checkerboard artifact amplitude")
        ->capture_default_str();
    synth->add_option("--period", synth_cfg.artifact_period, "checkerboard period in pixels")
        ->capture_default_str();
    synth->add_option("--alpha", synth_cfg.alpha, "morph blend weight")->capture_default_str();
    synth->add_option("--seed", synth_cfg.seed, "generator seed")->capture_default_str();
    synth->add_flag("--force", synth_force, "allow writing into a non-empty directory");
    synth->callback([&] {
        const std::string manifest = md::pipeline::synth_stage(synth_cfg, synth_out, synth_force);
        std::cout << "manifest: " << manifest << "\n";
    });

    // decompose
    std::string dec_manifest, dec_out, dec_family = "haar";
    int dec_size = 160;
    bool dec_force = false;
    auto* dec = app.add_subcommand("decompose", "decompose images into 48 wavelet sub-band stacks");
    dec->add_option("--manifest", dec_manifest, "image manifest (JSON-lines)")->required();
    dec->add_option("--out", dec_out, "output directory")->required();
    dec->add_option("--family", dec_family, "wavelet family: haar or db2")->capture_default_str();
    dec->add_option("--image-size", dec_size, "resize target (0 keeps source size)")->capture_default_str();
    dec->add_flag("--force", dec_force, "allow writing into a non-empty directory");
    dec->callback([&] {
        const std::string stacks = md::pipeline::decompose_stage(
            dec_manifest, dec_out, md::wavelet::family_from_string(dec_family), dec_size, dec_force);
        std::cout << "stacks: " << stacks << "\n";
    });

    // train
    md::train::TrainConfig train_cfg;
    std::string train_stacks, train_out, train_mode = "proximal";
    bool train_force = false;
    auto* tr = app.add_subcommand("train", "phase-1 group-sparse training");
    tr->add_option("--stacks", train_stacks, "stacks manifest from decompose")->required();
    tr->add_option("--out", train_out, "run directory")->required();
    tr->add_option("--lambda", train_cfg.lambda, "group sparsity coefficient")->capture_default_str();
    add_train_options(tr, train_cfg, train_mode);
    tr->add_flag("--force", train_force, "allow writing into a non-empty directory");
    tr->callback([&] {
        train_cfg.mode = md::sparsity::train_mode_from_string(train_mode);
        const std::string ckpt = md::pipeline::train_stage(train_stacks, train_cfg, train_out, train_force);
        std::cout << "checkpoint: " << ckpt << "\n";
    });

    // sweep
    md::train::TrainConfig sweep_cfg;
    std::string sweep_stacks, sweep_out, sweep_mode = "proximal";
    std::string sweep_grid = "1e-4,3e-4,1e-3,3e-3,1e-2,3e-2";
    bool sweep_force = false;
    auto* sw = app.add_subcommand("sweep", "train per lambda and pick the best by validation AUC");
    sw->add_option("--stacks", sweep_stacks, "stacks manifest from decompose")->required();
    sw->add_option("--out", sweep_out, "sweep directory")->required();
    sw->add_option("--grid", sweep_grid, "comma-separated lambda grid")->capture_default_str();
    add_train_options(sw, sweep_cfg, sweep_mode);
    sw->add_flag("--force", sweep_force, "allow writing into a non-empty directory");
    sw->callback([&] {
        sweep_cfg.mode = md::sparsity::train_mode_from_string(sweep_mode);
        const std::string path = md::pipeline::sweep_stage(sweep_stacks, parse_grid(sweep_grid), sweep_cfg,
                                                           sweep_out, sweep_force);
        std::cout << "sweep: " << path << "\n";
    });

    // select
    std::string sel_ckpt, sel_out;
    double sel_threshold = 0.0;
    bool sel_force = false;
    auto* sel = app.add_subcommand("select", "threshold conv1 group norms into a sub-band selection");
    sel->add_option("--checkpoint", sel_ckpt, "phase-1 checkpoint")->required();
    sel->add_option("--out", sel_out, "selection JSON path")->required();
    sel->add_option("--threshold", sel_threshold, "override the recorded threshold (0 keeps it)")
        ->capture_default_str();
    sel->add_flag("--force", sel_force, "allow overwriting the selection file");
    sel->callback([&] {
        const std::string path = md::pipeline::select_stage(sel_ckpt, sel_out, sel_threshold, sel_force);
        std::cout << "selection: " << path << "\n";
    });

    // retrain
    md::train::TrainConfig re_cfg;
    std::string re_stacks, re_selection, re_out, re_mode = "proximal";
    bool re_force = false;
    auto* re = app.add_subcommand("retrain", "phase-2 training on the selected sub-bands");
    re->add_option("--stacks", re_stacks, "stacks manifest from decompose")->required();
    re->add_option("--selection", re_selection, "selection JSON from select")->required();
    re->add_option("--out", re_out, "run directory")->required();
    add_train_options(re, re_cfg, re_mode);
    re->add_flag("--force", re_force, "allow writing into a non-empty directory");
    re->callback([&] {
        re_cfg.mode = md::sparsity::train_mode_from_string(re_mode);
        const std::string ckpt =
            md::pipeline::retrain_stage(re_stacks, re_selection, re_cfg, re_out, re_force);
        std::cout << "checkpoint: " << ckpt << "\n";
    });

    // eval
    std::string ev_ckpt, ev_stacks, ev_out, ev_split = "test";
    int ev_threads = 0;
    bool ev_force = false;
    auto* ev = app.add_subcommand("eval", "score a split and report APCER/BPCER-family metrics");
    ev->add_option("--checkpoint", ev_ckpt, "checkpoint to evaluate")->required();
    ev->add_option("--stacks", ev_stacks, "stacks manifest from decompose")->required();
    ev->add_option("--split", ev_split, "train, val or test")->capture_default_str();
    ev->add_option("--out", ev_out, "output directory")->required();
    ev->add_option("--threads", ev_threads, "worker threads (0 = all cores)")->capture_default_str();
    ev->add_flag("--force", ev_force, "allow writing into a non-empty directory");
    ev->callback([&] {
        const auto report = md::pipeline::eval_stage(ev_ckpt, ev_stacks, md::data::split_from_string(ev_split),
                                                     ev_out, ev_force, ev_threads);
        std::printf("d_eer   %.2f%%\n", 100.0 * report.d_eer);
        std::printf("bpcer5  %.2f%%\n", 100.0 * report.bpcer5);
        std::printf("bpcer10 %.2f%%\n", 100.0 * report.bpcer10);
        std::printf("auc     %.2f%%\n", 100.0 * report.auc);
    });

    // gradcam
    std::string gc_ckpt, gc_stack, gc_prefix, gc_target = "morph";
    bool gc_force = false;
    auto* gc = app.add_subcommand("gradcam", "class activation map for one sub-band stack");
    gc->add_option("--checkpoint", gc_ckpt, "checkpoint")->required();
    gc->add_option("--stack", gc_stack, "input .sbs file")->required();
    gc->add_option("--target", gc_target, "morph or bonafide")->capture_default_str();
    gc->add_option("--out-prefix", gc_prefix, "output prefix (<prefix>.pgm, <prefix>.csv)")->required();
    gc->add_flag("--force", gc_force, "allow overwriting outputs");
    gc->callback([&] {
        md::explain::TargetClass target;
        if (gc_target == "morph")
            target = md::explain::TargetClass::Morph;
        else if (gc_target == "bonafide")
            target = md::explain::TargetClass::BonaFide;
        else
            throw md::ConfigError("gradcam: target must be morph or bonafide");
        md::pipeline::gradcam_stage(gc_ckpt, gc_stack, target, gc_prefix, gc_force);
        std::cout << "cam: " << gc_prefix << ".pgm\n";
    });

    // export-det
    std::string det_scores, det_out;
    bool det_force = false;
    auto* det = app.add_subcommand("export-det", "DET curve CSV from eval scores");
    det->add_option("--scores", det_scores, "scores.csv from eval")->required();
    det->add_option("--out", det_out, "output CSV path")->required();
    det->add_flag("--force", det_force, "allow overwriting the output");
    det->callback([&] { md::pipeline::export_det_stage(det_scores, det_out, det_force); });

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    } catch (const md::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const md::NumericError& e) {
        std::cerr << "numeric failure: " << e.what() << "\n";
        return 4;
    } catch (const md::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
    return 0;
}
