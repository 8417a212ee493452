#include <catch2/catch_amalgamated.hpp>

#include "gwnet/model.hpp"
#include "gwnet/optim.hpp"
#include "gwnet/verify.hpp"
#include "oracles.hpp"

using namespace gwnet;

namespace {
// Output shapes at the named learnable/pool stages of a preset.
std::vector<Shape> chain_at(const ArchitectureSpec& spec, const std::vector<std::string>& names) {
    const std::vector<Shape> all = layer_output_shapes(spec);
    std::vector<Shape> out;
    for (const std::string& n : names)
        for (std::size_t li = 0; li < spec.layers.size(); ++li)
            if (spec.layers[li].name == n) out.push_back(all[li]);
    return out;
}
const std::vector<std::string> kStages = {"Conv1", "Pool1", "Conv2", "Pool2",
                                          "Conv3", "Conv4", "Flatten", "FC1"};
}  // namespace

TEST_CASE("preset shape chains", "[model]") {
    SECTION("34x54x20 preset") {
        const std::vector<Shape> expected = {{32, 52, 18, 16}, {16, 26, 18, 16}, {12, 22, 16, 16},
                                             {6, 11, 16, 16},  {4, 9, 14, 32},   {2, 7, 12, 32},
                                             {5376},           {256}};
        CHECK(chain_at(preset_spec("kth", 20), kStages) == expected);
    }
    SECTION("64x48x20 preset") {
        const std::vector<Shape> expected = {{62, 46, 18, 16}, {31, 23, 18, 16}, {27, 19, 16, 16},
                                             {13, 9, 16, 16},  {11, 7, 14, 32},  {9, 5, 12, 32},
                                             {17280},          {256}};
        CHECK(chain_at(preset_spec("weizmann", 20), kStages) == expected);
    }
    SECTION("temporal extent below the minimum") {
        CHECK_THROWS_AS(preset_spec("kth", 8), ShapeError);
        CHECK_NOTHROW(preset_spec("kth", 9));
    }
    SECTION("unknown preset") {
        CHECK_THROWS_AS(preset_spec("alexnet", 20), ConfigError);
    }
}

TEST_CASE("parameter counts", "[model]") {
    Rng rng(0);
    SECTION("kth totals 1,437,712") {
        const Model<float> m = build_preset<float>("kth", 20, rng, InitRule::Zeros);
        CHECK(total_parameters(m) == 1437712);
        CHECK(layer_parameters(m, "Conv1") == 448);
        CHECK(layer_parameters(m, "Conv4") == 27680);
        CHECK(layer_parameters(m, "FC1") == 1376512);
    }
    SECTION("weizmann totals 4,485,136") {
        const Model<float> m = build_preset<float>("weizmann", 20, rng, InitRule::Zeros);
        CHECK(total_parameters(m) == 4485136);
    }
    SECTION("extra trainable layers add FC(256) blocks") {
        const Model<float> m5 = build_preset<float>("kth", 20, rng, InitRule::Zeros);
        const Model<float> m6 = build_preset<float>("kth-6", 20, rng, InitRule::Zeros);
        const Model<float> m8 = build_preset<float>("kth-8", 20, rng, InitRule::Zeros);
        const std::size_t fc_block = 256 * 256 + 256;
        CHECK(total_parameters(m6) == total_parameters(m5) + fc_block);
        CHECK(total_parameters(m8) == total_parameters(m5) + 3 * fc_block);
        CHECK_THROWS_AS(preset_spec("kth-9", 20), ConfigError);
    }
    SECTION("the head is not part of the trunk count") {
        Model<float> m = build_preset<float>("kth", 20, rng, InitRule::Zeros);
        const std::size_t before = total_parameters(m);
        attach_head(m, 6, rng);
        CHECK(total_parameters(m) == before);
        CHECK(m.head.parameter_count() == 256 * 6 + 6);
    }
}

TEST_CASE("model forward", "[model]") {
    Rng rng(21);
    SECTION("feature vector of length 256, non-negative after the final ReLU") {
        Model<float> m = build_preset<float>("kth", 20, rng);
        Rng unused(0);
        const Tensor<float> clip = oracles::random_tensor<float>({34, 54, 20}, rng, 0.0, 1.0);
        const Tensor<float> feat = model_forward(m, clip, Mode::Eval, unused);
        REQUIRE(feat.shape() == Shape{256});
        for (std::size_t i = 0; i < feat.size(); ++i) CHECK(feat[i] >= 0.0f);
    }
    SECTION("zero-initialized model maps to the zero vector") {
        Model<double> m = build_preset<double>("tiny", 10, rng, InitRule::Zeros);
        Rng unused(0);
        const Tensor<double> clip = oracles::random_tensor<double>({8, 8, 10}, rng, 0.0, 1.0);
        const Tensor<double> feat = model_forward(m, clip, Mode::Eval, unused);
        for (std::size_t i = 0; i < feat.size(); ++i) CHECK(feat[i] == 0.0);
    }
    SECTION("eval mode is bit-identical across calls") {
        Model<double> m = build_preset<double>("tiny", 10, rng);
        Rng u1(0), u2(99);
        const Tensor<double> clip = oracles::random_tensor<double>({8, 8, 10}, rng, 0.0, 1.0);
        CHECK(oracles::bitwise_equal(model_forward(m, clip, Mode::Eval, u1),
                                     model_forward(m, clip, Mode::Eval, u2)));
    }
    SECTION("shape mismatch") {
        Model<float> m = build_preset<float>("tiny", 10, rng);
        Rng unused(0);
        CHECK_THROWS_AS(model_forward(m, Tensor<float>({8, 8, 9}, 0.0f), Mode::Eval, unused),
                        ShapeError);
    }
}

TEST_CASE("model backward", "[model]") {
    Rng rng(33);
    Model<double> m = build_preset<double>("tiny", 10, rng);
    Rng unused(0);
    const Tensor<double> clip = oracles::random_tensor<double>({8, 8, 10}, rng, 0.0, 1.0);
    ForwardTrace<double> trace;
    const Tensor<double> feat = model_forward(m, clip, Mode::Eval, unused, &trace);

    SECTION("zero feature gradient zeroes every parameter gradient") {
        const ModelGrads<double> g = model_backward(m, trace, Tensor<double>::zeros_like(feat));
        for (std::size_t li = 0; li < m.spec.layers.size(); ++li) {
            if (g.weights[li].empty()) continue;
            CHECK(oracles::max_abs_diff(g.weights[li], Tensor<double>::zeros_like(g.weights[li])) ==
                  0.0);
        }
    }
    SECTION("backward is deterministic for a fixed trace") {
        Rng grng(4);
        const Tensor<double> gf = oracles::random_tensor<double>(feat.shape(), grng);
        const ModelGrads<double> g1 = model_backward(m, trace, gf);
        const ModelGrads<double> g2 = model_backward(m, trace, gf);
        for (std::size_t li = 0; li < m.spec.layers.size(); ++li) {
            if (g1.weights[li].empty()) continue;
            CHECK(oracles::bitwise_equal(g1.weights[li], g2.weights[li]));
            CHECK(oracles::bitwise_equal(g1.biases[li], g2.biases[li]));
        }
    }
    SECTION("an unrecorded trace is rejected") {
        ForwardTrace<double> stale;
        CHECK_THROWS_AS(model_backward(m, stale, feat), StateError);
    }
}

TEST_CASE("composed gradient check on the scaled-down preset", "[model]") {
    // Full finite-difference agreement, parameters and input, tolerance 1e-4.
    const std::vector<CheckResult> checks = verify_gradients();
    for (const CheckResult& c : checks) {
        INFO(c.name << ": measured " << c.measured << ", expected " << c.expected);
        CHECK(c.pass);
    }
}

TEST_CASE("layer freezing", "[model]") {
    Rng rng(50);
    SECTION("fine-tune set counts 27,680 + 1,376,512 trainable scalars") {
        Model<float> m = build_preset<float>("kth", 20, rng, InitRule::Zeros);
        freeze_layers(m, {"Conv4", "FC1"});
        std::size_t trainable = 0;
        for_each_parameter<float>(m, [&](const std::string&, Tensor<float>& t, bool is_trainable) {
            if (is_trainable) trainable += t.size();
        });
        CHECK(trainable == 27680 + 1376512);
    }
    SECTION("an empty trainable set makes optimizer steps no-ops") {
        Model<double> m = build_preset<double>("tiny", 10, rng);
        freeze_layers(m, {});
        std::vector<Tensor<double>*> params;
        std::vector<bool> flags;
        for_each_parameter<double>(m, [&](const std::string&, Tensor<double>& t, bool tr) {
            params.push_back(&t);
            flags.push_back(tr);
        });
        const std::vector<Tensor<double>> before = [&] {
            std::vector<Tensor<double>> copy;
            for (auto* p : params) copy.push_back(*p);
            return copy;
        }();
        std::vector<Tensor<double>> grads;
        for (auto* p : params) grads.push_back(Tensor<double>(p->shape(), 1.0));
        std::vector<const Tensor<double>*> grad_ptrs;
        for (auto& g : grads) grad_ptrs.push_back(&g);
        AdamState<double> adam = adam_init<double>(params);
        TrainingConfig cfg;
        adam_step(adam, params, grad_ptrs, flags, 0.01, cfg);
        for (std::size_t i = 0; i < params.size(); ++i)
            CHECK(oracles::bitwise_equal(*params[i], before[i]));
    }
    SECTION("unknown layer name") {
        Model<float> m = build_preset<float>("tiny", 10, rng);
        CHECK_THROWS_AS(freeze_layers(m, {"Conv9"}), ConfigError);
    }
    SECTION("all-trainable behaves as unfrozen") {
        Model<float> m = build_preset<float>("tiny", 10, rng);
        freeze_layers(m, {"Conv1", "Conv2", "Conv3", "Conv4", "FC1"});
        for (std::size_t li = 0; li < m.spec.layers.size(); ++li)
            if (!m.weights[li].empty()) CHECK(m.trainable[li]);
    }
}
