// Command-line front end: preprocess raw frames, train/fine-tune, run the
// self-verification suites, sweep hyperparameters, and generate the synthetic
// demo dataset.

#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "gwnet/cli.hpp"

int main(int argc, char** argv) {
    CLI::App app{"Gaussian-weighted frame aggregation + 3D CNN + LSTM action recognition"};
    app.require_subcommand(1);

    gwnet::cli::PreprocessOptions pre;
    CLI::App* cmd_pre = app.add_subcommand("preprocess", "Aggregate raw PGM frame dirs into clip files");
    cmd_pre->add_option("--manifest", pre.manifest, "Raw manifest: framedir<TAB>label<TAB>subject[<TAB>bbox]")
        ->required();
    cmd_pre->add_option("--window-size", pre.window_size, "Aggregation window size (3..8)")
        ->default_val(5);
    cmd_pre->add_option("--max-frames", pre.max_frames, "Raw frames per clip (pad/truncate)")
        ->default_val(100);
    cmd_pre->add_option("--out-dir", pre.out_dir, "Output directory")->default_val("clips");
    cmd_pre->add_option("--target-height", pre.target_h, "Cropped frame height")->default_val(34);
    cmd_pre->add_option("--target-width", pre.target_w, "Cropped frame width")->default_val(54);

    gwnet::cli::TrainOptions tr;
    std::size_t tr_lstm_epochs = 0;
    CLI::App* cmd_tr = app.add_subcommand("train", "Two-step training with cross-validation");
    cmd_tr->add_option("--manifest", tr.manifest, "Clip manifest from preprocess")->required();
    cmd_tr->add_option("--preset", tr.preset, "Architecture preset (kth, weizmann, synth, ...)")
        ->default_val("kth");
    cmd_tr->add_option("--folds", tr.folds, "Cross-validation folds")->default_val(5);
    cmd_tr->add_option("--epochs", tr.epochs, "CNN-stage epochs")->default_val(300);
    CLI::Option* lstm_ep_opt =
        cmd_tr->add_option("--lstm-epochs", tr_lstm_epochs, "LSTM-stage epochs (default: --epochs)");
    cmd_tr->add_option("--seed", tr.seed, "Deterministic seed")->default_val(0);
    cmd_tr->add_option("--fine-tune-from", tr.fine_tune_from, "Checkpoint to fine-tune");
    cmd_tr->add_option("--trainable", tr.trainable, "Comma list of trainable layers when fine-tuning")
        ->default_val("Conv4,FC1");
    cmd_tr->add_option("--out-dir", tr.out_dir, "Output directory")->default_val("train_out");
    cmd_tr->add_option("--eval-mode", tr.eval_mode, "'folds' or 'holdout' (80/20)")
        ->default_val("folds");
    cmd_tr->add_option("--batch-size", tr.batch_size)->default_val(16);
    cmd_tr->add_option("--lr", tr.lr, "Base learning rate")->default_val(1e-4);
    cmd_tr->add_option("--dropout", tr.dropout)->default_val(0.4);
    cmd_tr->add_option("--augment-count", tr.augment_count,
                       "Generated clips via flip/rotation round-robin")
        ->default_val(0);
    cmd_tr->add_option("--lstm-cells", tr.lstm_cells)->default_val(50);
    cmd_tr->add_option("--neighborhood", tr.neighborhood, "Frames per LSTM step")->default_val(4);
    cmd_tr->add_option("--group-by", tr.group_by, "'clip' or 'subject' fold grouping")
        ->default_val("clip");

    gwnet::cli::VerifyOptions ver;
    CLI::App* cmd_ver = app.add_subcommand("verify", "Run invariant suites");
    cmd_ver->add_option("--suite", ver.suite, "shapes|params|gradients|sampler|all")
        ->default_val("all");

    gwnet::cli::SweepOptions sw;
    std::size_t sw_lstm_epochs = 0;
    CLI::App* cmd_sw = app.add_subcommand("sweep", "Sweep window size or trainable depth");
    cmd_sw->add_option("--param", sw.param, "'window-size' or 'layers'")->required();
    cmd_sw->add_option("--range", sw.range, "lo..hi (defaults 3..8 / 5..8)");
    cmd_sw->add_option("--manifest", sw.manifest,
                       "Raw manifest for window-size, clip manifest for layers")
        ->required();
    cmd_sw->add_option("--preset", sw.preset)->default_val("kth");
    cmd_sw->add_option("--epochs", sw.epochs)->default_val(300);
    CLI::Option* sw_lstm_opt = cmd_sw->add_option("--lstm-epochs", sw_lstm_epochs);
    cmd_sw->add_option("--folds", sw.folds)->default_val(5);
    cmd_sw->add_option("--seed", sw.seed)->default_val(0);
    cmd_sw->add_option("--batch-size", sw.batch_size)->default_val(16);
    cmd_sw->add_option("--lr", sw.lr)->default_val(1e-4);
    cmd_sw->add_option("--dropout", sw.dropout)->default_val(0.4);
    cmd_sw->add_option("--lstm-cells", sw.lstm_cells)->default_val(50);
    cmd_sw->add_option("--max-frames", sw.max_frames)->default_val(100);
    cmd_sw->add_option("--out", sw.out_file, "Also write the table to this file");

    gwnet::cli::SynthOptions sy;
    CLI::App* cmd_sy = app.add_subcommand("synth", "Generate the synthetic moving-square dataset");
    cmd_sy->add_option("--out-dir", sy.out_dir)->default_val("synth_data");
    cmd_sy->add_option("--clips-per-class", sy.clips_per_class)->default_val(6);
    cmd_sy->add_option("--frames", sy.frames)->default_val(100);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : gwnet::cli::kExitConfig;
    }

    if (cmd_pre->parsed()) return gwnet::cli::run_preprocess(pre, std::cout, std::cerr);
    if (cmd_tr->parsed()) {
        if (lstm_ep_opt->count() > 0) tr.lstm_epochs = tr_lstm_epochs;
        return gwnet::cli::run_train(tr, std::cout, std::cerr);
    }
    if (cmd_ver->parsed()) return gwnet::cli::run_verify(ver, std::cout, std::cerr);
    if (cmd_sw->parsed()) {
        if (sw_lstm_opt->count() > 0) sw.lstm_epochs = sw_lstm_epochs;
        return gwnet::cli::run_sweep(sw, std::cout, std::cerr);
    }
    if (cmd_sy->parsed()) return gwnet::cli::run_synth(sy, std::cout, std::cerr);
    return gwnet::cli::kExitConfig;
}
