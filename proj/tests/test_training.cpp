#include <catch2/catch_amalgamated.hpp>

#include <cstring>

#include "gwnet/synthetic.hpp"
#include "gwnet/training.hpp"
#include "oracles.hpp"

using namespace gwnet;

namespace {

TrainingConfig fast_config(std::size_t epochs, std::size_t lstm_epochs) {
    TrainingConfig cfg;
    cfg.epochs = epochs;
    cfg.lstm_epochs = lstm_epochs;
    cfg.base_lr = 3e-3;
    cfg.batch_size = 4;
    cfg.dropout_rate = 0.1;
    cfg.lstm_hidden = 12;
    cfg.seed = 7;
    return cfg;
}

// Model + LSTM sized for the synthetic dataset.
template <typename T>
TrainedArtifacts<T> fresh_artifacts(const Dataset<T>& ds, const TrainingConfig& cfg,
                                    std::uint64_t seed) {
    Rng rng(seed);
    TrainedArtifacts<T> art;
    art.model = build_preset<T>("synth", ds.clips.front().clip.frames(), rng,
                                InitRule::GlorotUniform, cfg.dropout_rate);
    attach_head(art.model, ds.num_classes(), rng);
    art.lstm = lstm_init<T>(art.model.feature_size(), cfg.lstm_hidden, ds.num_classes(), rng);
    return art;
}

std::vector<std::size_t> all_indices(std::size_t n) {
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    return idx;
}

bool same_double_bits(double a, double b) { return std::memcmp(&a, &b, sizeof(double)) == 0; }

}  // namespace

TEST_CASE("zero-epoch training is a no-op", "[training]") {
    const Dataset<float> ds = make_synthetic_dataset<float>(2);
    const TrainingConfig cfg = fast_config(0, 0);
    TrainedArtifacts<float> art = fresh_artifacts(ds, cfg, 3);
    const Model<float> before_model = art.model;
    const LstmParams<float> before_lstm = art.lstm;

    const TrainedArtifacts<float> out = train(std::move(art.model), std::move(art.lstm), ds, cfg,
                                              all_indices(ds.size()), {});
    CHECK(out.log.empty());
    for (std::size_t li = 0; li < out.model.spec.layers.size(); ++li) {
        if (out.model.weights[li].empty()) continue;
        CHECK(oracles::bitwise_equal(out.model.weights[li], before_model.weights[li]));
        CHECK(oracles::bitwise_equal(out.model.biases[li], before_model.biases[li]));
    }
    for (int g = 0; g < 4; ++g) CHECK(oracles::bitwise_equal(out.lstm.wx[g], before_lstm.wx[g]));
}

TEST_CASE("identical seeds reproduce the epoch-0 loss bitwise", "[training]") {
    const Dataset<float> ds = make_synthetic_dataset<float>(2);
    const TrainingConfig cfg = fast_config(1, 1);
    auto run_once = [&]() {
        TrainedArtifacts<float> art = fresh_artifacts(ds, cfg, 11);
        return train(std::move(art.model), std::move(art.lstm), ds, cfg, all_indices(ds.size()), {});
    };
    const TrainedArtifacts<float> a = run_once();
    const TrainedArtifacts<float> b = run_once();
    REQUIRE(a.log.size() == b.log.size());
    REQUIRE_FALSE(a.log.empty());
    CHECK(same_double_bits(a.log[0].train_loss, b.log[0].train_loss));
    CHECK(same_double_bits(a.log.back().train_loss, b.log.back().train_loss));
    for (std::size_t li = 0; li < a.model.spec.layers.size(); ++li) {
        if (a.model.weights[li].empty()) continue;
        CHECK(oracles::bitwise_equal(a.model.weights[li], b.model.weights[li]));
    }
}

TEST_CASE("loss decreases on the synthetic overfit task", "[training]") {
    const Dataset<float> ds = make_synthetic_dataset<float>(2);  // 4 clips
    TrainingConfig cfg = fast_config(10, 0);
    cfg.base_lr = 1e-3;       // the measured loss is dropout-free and smooth
    cfg.batch_size = 2;
    cfg.dropout_rate = 0.0;
    TrainedArtifacts<float> art = fresh_artifacts(ds, cfg, 5);
    const TrainedArtifacts<float> out = train(std::move(art.model), std::move(art.lstm), ds, cfg,
                                              all_indices(ds.size()), {});
    REQUIRE(out.log.size() == 10);
    int drops = 0;
    for (std::size_t e = 1; e < 10; ++e)
        if (out.log[e].train_loss < out.log[e - 1].train_loss) ++drops;
    CHECK(drops >= 7);  // monotone in at least 8 of 10 epochs counts 9 steps
    CHECK(out.log.back().train_loss < out.log.front().train_loss);
}

TEST_CASE("metrics log format", "[training]") {
    std::vector<MetricsRow> rows(2);
    rows[0] = {0, 1e-4, 1.791759, 0.166667, 1.8, 0.25};
    rows[1] = {1, 1e-4, 1.5, 0.5, 1.6, 0.5};
    const std::string tsv = metrics_to_tsv(rows);
    std::size_t lines = 0, tabs = 0;
    for (char c : tsv) {
        if (c == '\n') ++lines;
        if (c == '\t') ++tabs;
    }
    CHECK(lines == 2);
    CHECK(tabs == 10);  // five tabs per row
    CHECK(tsv.find("0\t0.0001\t1.79176\t0.166667\t1.8\t0.25\n") == 0);
}

TEST_CASE("fine-tuning freezes everything outside the trainable set", "[training]") {
    const Dataset<float> ds = make_synthetic_dataset<float>(2);
    TrainingConfig cfg = fast_config(2, 1);
    TrainedArtifacts<float> pretrained = fresh_artifacts(ds, cfg, 21);

    SECTION("Conv1..Conv3 stay bit-identical under {Conv4, FC1}") {
        const TrainedArtifacts<float> tuned =
            fine_tune(pretrained, ds, {"Conv4", "FC1"}, cfg, all_indices(ds.size()), {});
        for (const std::string& frozen : {"Conv1", "Conv2", "Conv3"}) {
            for (std::size_t li = 0; li < tuned.model.spec.layers.size(); ++li) {
                if (tuned.model.spec.layers[li].name != frozen) continue;
                CHECK(oracles::bitwise_equal(tuned.model.weights[li], pretrained.model.weights[li]));
                CHECK(oracles::bitwise_equal(tuned.model.biases[li], pretrained.model.biases[li]));
            }
        }
        // The trainable layers did move.
        bool conv4_changed = false;
        for (std::size_t li = 0; li < tuned.model.spec.layers.size(); ++li)
            if (tuned.model.spec.layers[li].name == "Conv4" &&
                !oracles::bitwise_equal(tuned.model.weights[li], pretrained.model.weights[li]))
                conv4_changed = true;
        CHECK(conv4_changed);
    }
    SECTION("the head is re-initialized for the new class count") {
        Dataset<float> wide = ds;
        wide.label_names = {"a", "b", "c", "d", "e"};
        const TrainedArtifacts<float> tuned =
            fine_tune(pretrained, wide, {"Conv4", "FC1"}, fast_config(0, 0),
                      all_indices(wide.size()), {});
        CHECK(tuned.model.head.out_features() == 5);
        CHECK(tuned.lstm.num_classes == 5);
    }
    SECTION("zero-epoch fine-tuning keeps the trunk bitwise") {
        const TrainedArtifacts<float> tuned =
            fine_tune(pretrained, ds, {"Conv4", "FC1"}, fast_config(0, 0),
                      all_indices(ds.size()), {});
        for (std::size_t li = 0; li < tuned.model.spec.layers.size(); ++li) {
            if (tuned.model.weights[li].empty()) continue;
            CHECK(oracles::bitwise_equal(tuned.model.weights[li], pretrained.model.weights[li]));
        }
    }
    SECTION("mismatched clip shapes need the adapter") {
        Dataset<float> wrong = make_synthetic_dataset<float>(1, 5, 16);  // 16x16 clips
        CHECK_THROWS_AS(
            fine_tune(pretrained, wrong, {"Conv4", "FC1"}, cfg, all_indices(wrong.size()), {}),
            ShapeError);
        for (auto& lc : wrong.clips) lc.clip = adapt_clip(lc.clip, 12, 12);
        CHECK_NOTHROW(fine_tune(pretrained, wrong, {"Conv4", "FC1"}, fast_config(0, 0),
                                all_indices(wrong.size()), {}));
    }
}

TEST_CASE("clip adaptation crops and pads around the center", "[training]") {
    ClipVolume<float> clip;
    clip.voxels = Tensor<float>({6, 6, 2}, 0.0f);
    clip.voxels(3, 3, 0) = 1.0f;
    SECTION("crop") {
        const ClipVolume<float> smaller = adapt_clip(clip, 4, 4);
        CHECK(smaller.voxels.shape() == Shape{4, 4, 2});
        CHECK(smaller.voxels(2, 2, 0) == 1.0f);  // center shifts by the crop offset
    }
    SECTION("pad") {
        const ClipVolume<float> larger = adapt_clip(clip, 8, 8);
        CHECK(larger.voxels.shape() == Shape{8, 8, 2});
        CHECK(larger.voxels(4, 4, 0) == 1.0f);
        CHECK(larger.voxels(0, 0, 0) == 0.0f);
    }
}

TEST_CASE("evaluation counts", "[training]") {
    const Dataset<float> ds = make_synthetic_dataset<float>(2);  // labels 0,1 alternating
    TrainingConfig cfg = fast_config(0, 0);
    TrainedArtifacts<float> art = fresh_artifacts(ds, cfg, 31);
    // Zeroed LSTM head: logits are uniform, argmax resolves to class 0.
    art.lstm.head_w = Tensor<float>::zeros_like(art.lstm.head_w);
    art.lstm.head_b = Tensor<float>::zeros_like(art.lstm.head_b);

    SECTION("confusion-matrix entries sum to the test-set size") {
        const EvalResult res = evaluate(art, ds, all_indices(ds.size()));
        std::size_t total = 0;
        for (const auto& row : res.confusion)
            for (std::size_t v : row) total += v;
        CHECK(total == ds.size());
    }
    SECTION("all predictions land in class 0") {
        const EvalResult res = evaluate(art, ds, all_indices(ds.size()));
        // Half the labels are 0, so accuracy is exactly one half.
        CHECK(res.accuracy == Catch::Approx(0.5));
        CHECK(res.confusion[0][0] == 2);
        CHECK(res.confusion[1][0] == 2);
        CHECK(res.confusion[1][1] == 0);
    }
    SECTION("single wrong prediction scores zero") {
        std::vector<std::size_t> only_label1;
        for (std::size_t i = 0; i < ds.size(); ++i)
            if (ds.clips[i].label == 1) only_label1.push_back(i);
        const EvalResult res = evaluate(art, ds, {only_label1[0]});
        CHECK(res.accuracy == 0.0);
    }
    SECTION("empty test set") {
        CHECK_THROWS_AS(evaluate(art, ds, {}), InputError);
    }
}

TEST_CASE("dataset augmentation expansion", "[training]") {
    Dataset<float> ds = make_synthetic_dataset<float>(2);  // 4 originals
    expand_with_augmentation(ds, 8);
    REQUIRE(ds.clips.size() == 12);
    for (std::size_t i = 4; i < 12; ++i) {
        REQUIRE(ds.clips[i].source_index.has_value());
        const std::size_t src = *ds.clips[i].source_index;
        CHECK(src < 4);
        CHECK(ds.clips[i].label == ds.clips[src].label);
        CHECK(ds.clips[i].clip.voxels.shape() == ds.clips[src].clip.voxels.shape());
    }
}
