// Acceptance suite: one check per release criterion, one PASS/FAIL line each,
// nonzero exit when anything fails. Heavier end-to-end runs live here rather
// than in the unit tests.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "gwnet/cli.hpp"
#include "gwnet/gwnet.hpp"
#include "oracles.hpp"

using namespace gwnet;
namespace fs = std::filesystem;

namespace {

struct Criterion {
    std::string name;
    bool pass = false;
    std::string detail;
    double seconds = 0;
};

std::vector<Criterion> results;

void run_criterion(const std::string& name, const std::function<std::pair<bool, std::string>()>& fn) {
    Criterion c;
    c.name = name;
    const auto start = std::chrono::steady_clock::now();
    try {
        const auto [pass, detail] = fn();
        c.pass = pass;
        c.detail = detail;
    } catch (const std::exception& e) {
        c.pass = false;
        c.detail = std::string("exception: ") + e.what();
    }
    c.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    results.push_back(c);
    std::printf("%s %s: %s [%.1fs]\n", c.pass ? "PASS" : "FAIL", c.name.c_str(), c.detail.c_str(),
                c.seconds);
    std::fflush(stdout);
}

std::string slurp(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    std::ostringstream os;
    os << is.rdbuf();
    return os.str();
}

// ---------------------------------------------------------------------------

std::pair<bool, std::string> parameter_counts() {
    Rng rng(0);
    const Model<float> kth = build_preset<float>("kth", 20, rng, InitRule::Zeros);
    const Model<float> weiz = build_preset<float>("weizmann", 20, rng, InitRule::Zeros);
    const std::size_t a = total_parameters(kth);
    const std::size_t b = total_parameters(weiz);
    std::ostringstream d;
    d << "kth=" << a << " weizmann=" << b;
    return {a == 1437712 && b == 4485136, d.str()};
}

// Shapes measured from an actual forward pass, not from the spec walker.
std::pair<bool, std::string> shape_chains() {
    const std::vector<std::string> stages = {"Conv1", "Pool1", "Conv2", "Pool2",
                                             "Conv3", "Conv4", "Flatten", "FC1"};
    struct Case {
        const char* preset;
        Shape input;
        std::vector<Shape> expected;
    };
    const std::vector<Case> cases = {
        {"kth",
         {34, 54, 20},
         {{32, 52, 18, 16}, {16, 26, 18, 16}, {12, 22, 16, 16}, {6, 11, 16, 16},
          {4, 9, 14, 32}, {2, 7, 12, 32}, {5376}, {256}}},
        {"weizmann",
         {64, 48, 20},
         {{62, 46, 18, 16}, {31, 23, 18, 16}, {27, 19, 16, 16}, {13, 9, 16, 16},
          {11, 7, 14, 32}, {9, 5, 12, 32}, {17280}, {256}}},
    };
    for (const Case& cs : cases) {
        Rng rng(1);
        Model<float> model = build_preset<float>(cs.preset, 20, rng);
        const Tensor<float> clip = oracles::random_tensor<float>(cs.input, rng, 0.0, 1.0);
        Rng unused(0);
        ForwardTrace<float> trace;
        const Tensor<float> feat = model_forward(model, clip, Mode::Eval, unused, &trace);
        std::size_t stage = 0;
        for (std::size_t li = 0; li < model.spec.layers.size() && stage < stages.size(); ++li) {
            if (model.spec.layers[li].name != stages[stage]) continue;
            const Shape measured = li + 1 < model.spec.layers.size()
                                       ? trace.inputs[li + 1].shape()
                                       : feat.shape();
            if (measured != cs.expected[stage])
                return {false, std::string(cs.preset) + " after " + stages[stage] + ": measured " +
                                   shape_to_string(measured) + ", expected " +
                                   shape_to_string(cs.expected[stage])};
            ++stage;
        }
        if (stage != stages.size()) return {false, "missing stages in the layer chain"};
        if (feat.shape() != Shape{256}) return {false, "feature vector is not 256-dimensional"};
    }
    return {true, "both chains match at every stage"};
}

std::pair<bool, std::string> gradient_checks() {
    const std::vector<CheckResult> checks = verify_gradients(1e-4, 1e-5);
    for (const CheckResult& c : checks)
        if (!c.pass) return {false, c.name + ": " + c.measured + " (want " + c.expected + ")"};
    std::ostringstream d;
    d << checks.size() << " layer/composed/BPTT checks within 1e-4";
    return {true, d.str()};
}

std::pair<bool, std::string> sampler_fidelity() {
    const std::vector<CheckResult> checks = verify_sampler();
    for (const CheckResult& c : checks)
        if (!c.pass) return {false, c.name + ": " + c.measured + " (want " + c.expected + ")"};
    return {true, "reference weights, normalization, 100->20 aggregation, fixed points"};
}

std::pair<bool, std::string> convolution_oracle() {
    Rng rng(2024);
    double worst = 0;
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t ci = 1 + rng.bounded(3);
        const std::size_t co = 1 + rng.bounded(3);
        const std::size_t kh = 1 + rng.bounded(3);
        const std::size_t kw = 1 + rng.bounded(3);
        const std::size_t kt = 1 + rng.bounded(3);
        const std::size_t h = kh + rng.bounded(8 - kh + 1);
        const std::size_t w = kw + rng.bounded(8 - kw + 1);
        const std::size_t t = kt + rng.bounded(6 - kt + 1);
        Conv3DLayer<double> layer = conv3d_layer<double>(kh, kw, kt, ci, co);
        layer.kernels = oracles::random_tensor<double>(layer.kernels.shape(), rng);
        layer.bias = oracles::random_tensor<double>(layer.bias.shape(), rng);
        const Tensor<double> x = oracles::random_tensor<double>({h, w, t, ci}, rng);
        worst = std::max(worst, oracles::max_abs_diff(conv3d_forward(layer, x),
                                                      oracles::conv3d_naive(x, layer.kernels,
                                                                            layer.bias)));
    }
    std::ostringstream d;
    d << "20 instances, max abs deviation " << worst;
    return {worst <= 1e-12, d.str()};
}

std::pair<bool, std::string> learning_sanity() {
    // 12 synthetic clips: per class, variants 0..3 train and 4..5 test.
    const Dataset<float> ds = make_synthetic_dataset<float>(6);
    std::vector<std::size_t> train_idx, test_idx;
    for (std::size_t i = 0; i < ds.size(); ++i) {
        const std::size_t variant = i / 2;
        (variant < 4 ? train_idx : test_idx).push_back(i);
    }
    if (train_idx.size() != 8 || test_idx.size() != 4) return {false, "bad split sizes"};

    TrainingConfig cfg;
    cfg.epochs = 150;
    cfg.lstm_epochs = 100;
    cfg.base_lr = 3e-3;
    cfg.batch_size = 4;
    cfg.dropout_rate = 0.1;
    cfg.lstm_hidden = 16;
    cfg.seed = 20240817;

    Rng rng(cfg.seed);
    Model<float> model = build_preset<float>("synth", ds.clips.front().clip.frames(), rng,
                                             InitRule::GlorotUniform, cfg.dropout_rate);
    attach_head(model, ds.num_classes(), rng);
    LstmParams<float> lstm =
        lstm_init<float>(model.feature_size(), cfg.lstm_hidden, ds.num_classes(), rng);
    const TrainedArtifacts<float> art =
        train(std::move(model), std::move(lstm), ds, cfg, train_idx, test_idx);

    const double train_acc = evaluate(art, ds, train_idx, cfg.neighborhood).accuracy;
    const double test_acc = evaluate(art, ds, test_idx, cfg.neighborhood).accuracy;
    std::ostringstream d;
    d << "train_acc=" << format_g6(train_acc) << " test_acc=" << format_g6(test_acc)
      << " after " << cfg.epochs << "+" << cfg.lstm_epochs << " epochs";
    return {train_acc == 1.0 && test_acc >= 0.75, d.str()};
}

std::pair<bool, std::string> train_determinism() {
    const fs::path tmp = fs::temp_directory_path() / "gwnet_acceptance_det";
    fs::remove_all(tmp);
    fs::create_directories(tmp);
    std::ostringstream out, err;

    cli::SynthOptions sy;
    sy.out_dir = (tmp / "raw").string();
    sy.clips_per_class = 2;
    if (cli::run_synth(sy, out, err) != cli::kExitOk) return {false, "synth failed: " + err.str()};

    cli::PreprocessOptions pre;
    pre.manifest = (tmp / "raw" / "manifest.tsv").string();
    pre.out_dir = (tmp / "clips").string();
    pre.target_h = 12;
    pre.target_w = 12;
    if (cli::run_preprocess(pre, out, err) != cli::kExitOk)
        return {false, "preprocess failed: " + err.str()};

    auto train_once = [&](const std::string& dir) {
        cli::TrainOptions tr;
        tr.manifest = (tmp / "clips" / "manifest.tsv").string();
        tr.preset = "synth";
        tr.out_dir = dir;
        tr.folds = 2;
        tr.epochs = 3;
        tr.lstm_epochs = 3;
        tr.batch_size = 4;
        tr.lr = 1e-3;
        tr.dropout = 0.1;
        tr.lstm_cells = 8;
        tr.seed = 777;
        std::ostringstream o, e;
        return cli::run_train(tr, o, e) == cli::kExitOk;
    };
    if (!train_once((tmp / "run1").string())) return {false, "first training run failed"};
    if (!train_once((tmp / "run2").string())) return {false, "second training run failed"};

    for (const std::string name :
         {"fold0_metrics.tsv", "fold1_metrics.tsv", "fold0.ckpt", "fold1.ckpt", "summary.tsv"}) {
        const std::string a = slurp((tmp / "run1" / name).string());
        const std::string b = slurp((tmp / "run2" / name).string());
        if (a.empty()) return {false, name + " missing or empty"};
        if (a != b) return {false, name + " differs between identically seeded runs"};
    }
    fs::remove_all(tmp);
    return {true, "metrics and checkpoints byte-identical across seeded reruns"};
}

std::pair<bool, std::string> transfer_freeze() {
    const Dataset<float> ds = make_synthetic_dataset<float>(2);
    TrainingConfig cfg;
    cfg.epochs = 3;
    cfg.lstm_epochs = 2;
    cfg.base_lr = 1e-3;
    cfg.batch_size = 4;
    cfg.dropout_rate = 0.1;
    cfg.lstm_hidden = 8;
    cfg.seed = 5;

    Rng rng(9);
    TrainedArtifacts<float> pretrained;
    pretrained.model = build_preset<float>("synth", 20, rng, InitRule::GlorotUniform,
                                           cfg.dropout_rate);
    attach_head(pretrained.model, ds.num_classes(), rng);
    pretrained.lstm = lstm_init<float>(pretrained.model.feature_size(), cfg.lstm_hidden,
                                       ds.num_classes(), rng);

    std::vector<std::size_t> all;
    for (std::size_t i = 0; i < ds.size(); ++i) all.push_back(i);
    const TrainedArtifacts<float> tuned =
        fine_tune(pretrained, ds, {"Conv4", "FC1"}, cfg, all, {});

    bool conv4_moved = false;
    for (std::size_t li = 0; li < tuned.model.spec.layers.size(); ++li) {
        const std::string& n = tuned.model.spec.layers[li].name;
        if (n == "Conv1" || n == "Conv2" || n == "Conv3") {
            if (!oracles::bitwise_equal(tuned.model.weights[li], pretrained.model.weights[li]) ||
                !oracles::bitwise_equal(tuned.model.biases[li], pretrained.model.biases[li]))
                return {false, n + " changed despite being frozen"};
        }
        if (n == "Conv4" &&
            !oracles::bitwise_equal(tuned.model.weights[li], pretrained.model.weights[li]))
            conv4_moved = true;
    }
    if (!conv4_moved) return {false, "Conv4 never updated"};
    return {true, "Conv1..Conv3 bit-identical, Conv4/FC1 updated"};
}

}  // namespace

int main() {
    run_criterion("criterion-1 parameter-count-oracle", parameter_counts);
    run_criterion("criterion-2 shape-chain-oracle", shape_chains);
    run_criterion("criterion-3 gradient-verification", gradient_checks);
    run_criterion("criterion-4 sampler-fidelity", sampler_fidelity);
    run_criterion("criterion-5 convolution-oracle", convolution_oracle);
    run_criterion("criterion-6 learning-sanity", learning_sanity);
    run_criterion("criterion-7 train-determinism", train_determinism);
    run_criterion("criterion-8 transfer-freeze", transfer_freeze);
    std::printf(
        "NOTE criterion-9 full-scale-accuracies: not evaluated at desk scale; the harness accepts "
        "full KTH/WEIZMANN data but acceptance rests on criteria 1-8\n");

    std::size_t passed = 0;
    for (const Criterion& c : results) passed += c.pass ? 1 : 0;
    std::printf("ACCEPTANCE: %zu/%zu criteria passed\n", passed, results.size());
    return passed == results.size() ? 0 : 1;
}
