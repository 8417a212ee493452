#pragma once

#include <cmath>
#include <cstddef>
#include <sstream>
#include <string>
#include <vector>

#include "gwnet/gradcheck.hpp"
#include "gwnet/lstm.hpp"
#include "gwnet/model.hpp"
#include "gwnet/sampler.hpp"
#include "gwnet/tensor.hpp"

namespace gwnet {

// Self-verification suites behind `verify`: architecture shape chains,
// parameter counts, analytic-vs-numeric gradients, and sampler fidelity.
// Every check reports measured vs expected so failures are diagnosable from
// the report alone.

struct CheckResult {
    std::string name;
    bool pass = false;
    std::string measured;
    std::string expected;
};

inline std::string format_double(double v) {
    std::ostringstream os;
    os << v;
    return os.str();
}

namespace verify_detail {

inline CheckResult make_check(const std::string& name, bool pass, const std::string& measured,
                              const std::string& expected) {
    return CheckResult{name, pass, measured, expected};
}

inline std::string chain_to_string(const std::vector<Shape>& shapes) {
    std::string s;
    for (std::size_t i = 0; i < shapes.size(); ++i) {
        if (i) s += " -> ";
        s += shape_to_string(shapes[i]);
    }
    return s;
}

// Shapes after the named layers of a preset.
inline std::vector<Shape> named_chain(const std::string& preset, std::size_t window,
                                      const std::vector<std::string>& names) {
    const ArchitectureSpec spec = preset_spec(preset, window);
    const std::vector<Shape> all = layer_output_shapes(spec);
    std::vector<Shape> out;
    for (const std::string& n : names)
        for (std::size_t li = 0; li < spec.layers.size(); ++li)
            if (spec.layers[li].name == n) out.push_back(all[li]);
    return out;
}

template <typename T>
Tensor<T> random_tensor(Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
    Tensor<T> t(std::move(shape), T(0));
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = static_cast<T>(rng.uniform(lo, hi));
    return t;
}

inline double weighted_sum(const Tensor<double>& values, const Tensor<double>& weights) {
    double s = 0;
    for (std::size_t i = 0; i < values.size(); ++i) s += values[i] * weights[i];
    return s;
}

}  // namespace verify_detail

// ---------------------------------------------------------------------------

inline std::vector<CheckResult> verify_shapes() {
    using verify_detail::chain_to_string;
    using verify_detail::named_chain;
    std::vector<CheckResult> checks;
    const std::vector<std::string> stages = {"Conv1", "Pool1", "Conv2", "Pool2",
                                             "Conv3", "Conv4", "Flatten", "FC1"};
    const std::vector<Shape> kth_expected = {{32, 52, 18, 16}, {16, 26, 18, 16}, {12, 22, 16, 16},
                                             {6, 11, 16, 16},  {4, 9, 14, 32},   {2, 7, 12, 32},
                                             {5376},           {256}};
    const std::vector<Shape> weiz_expected = {{62, 46, 18, 16}, {31, 23, 18, 16}, {27, 19, 16, 16},
                                              {13, 9, 16, 16},  {11, 7, 14, 32},  {9, 5, 12, 32},
                                              {17280},          {256}};
    const std::vector<Shape> kth = named_chain("kth", 20, stages);
    const std::vector<Shape> weiz = named_chain("weizmann", 20, stages);
    checks.push_back(verify_detail::make_check("shapes.kth", kth == kth_expected,
                                               chain_to_string(kth), chain_to_string(kth_expected)));
    checks.push_back(verify_detail::make_check("shapes.weizmann", weiz == weiz_expected,
                                               chain_to_string(weiz), chain_to_string(weiz_expected)));
    return checks;
}

inline std::vector<CheckResult> verify_params() {
    std::vector<CheckResult> checks;
    Rng rng(0);
    Model<float> kth = build_preset<float>("kth", 20, rng, InitRule::Zeros);
    Model<float> weiz = build_preset<float>("weizmann", 20, rng, InitRule::Zeros);
    auto count_check = [&](const std::string& name, std::size_t measured, std::size_t expected) {
        checks.push_back(verify_detail::make_check(name, measured == expected,
                                                   std::to_string(measured), std::to_string(expected)));
    };
    count_check("params.kth.total", total_parameters(kth), 1437712);
    count_check("params.weizmann.total", total_parameters(weiz), 4485136);
    count_check("params.kth.Conv1", layer_parameters(kth, "Conv1"), 448);
    count_check("params.kth.Conv2", layer_parameters(kth, "Conv2"), 19216);
    count_check("params.kth.Conv3", layer_parameters(kth, "Conv3"), 13856);
    count_check("params.kth.Conv4", layer_parameters(kth, "Conv4"), 27680);
    count_check("params.kth.FC1", layer_parameters(kth, "FC1"), 1376512);
    count_check("params.weizmann.FC1", layer_parameters(weiz, "FC1"), 4423936);
    return checks;
}

inline std::vector<CheckResult> verify_sampler() {
    std::vector<CheckResult> checks;

    // Size-5 weights against the reference vector, entrywise within 0.01.
    const GaussianWeightVector w5 = gaussian_weights(5);
    const double ref[5] = {0.13, 0.6, 1.0, 0.6, 0.13};
    double max_dev = 0;
    for (int i = 0; i < 5; ++i) max_dev = std::max(max_dev, std::abs(w5.weights[i] - ref[i]));
    {
        std::ostringstream m;
        m << "max deviation " << max_dev;
        checks.push_back(verify_detail::make_check("sampler.weights5", max_dev <= 0.01, m.str(),
                                                   "<= 0.01 from [0.13,0.6,1,0.6,0.13]"));
    }

    // Normalized weights sum to 1 for every supported size.
    double worst_norm = 0;
    for (std::size_t L = 3; L <= 8; ++L) {
        const GaussianWeightVector w = gaussian_weights(L);
        double sum = 0;
        for (double v : w.weights) sum += v;
        double total = 0;
        for (double v : w.weights) total += v / sum;
        worst_norm = std::max(worst_norm, std::abs(total - 1.0));
    }
    checks.push_back(verify_detail::make_check("sampler.normalization", worst_norm <= 1e-12,
                                               "max |sum-1| = " + format_double(worst_norm), "<= 1e-12"));

    // 100 raw frames at L = 5 aggregate to exactly 20.
    {
        FrameSequence<double> seq;
        for (int i = 0; i < 100; ++i) seq.frames.push_back(Tensor<double>({4, 4}, 0.5));
        const ClipVolume<double> clip = aggregate_video(seq, 5, 100);
        checks.push_back(verify_detail::make_check("sampler.frames100to20", clip.frames() == 20,
                                                   std::to_string(clip.frames()), "20"));
    }

    // A window of identical frames is a fixed point.
    {
        Rng rng(7);
        Tensor<double> frame = verify_detail::random_tensor<double>({6, 5}, rng, 0.0, 1.0);
        std::vector<Tensor<double>> window(5, frame);
        const Tensor<double> agg = aggregate_window(window, gaussian_weights(5));
        double dev = 0;
        for (std::size_t i = 0; i < frame.size(); ++i) dev = std::max(dev, std::abs(agg[i] - frame[i]));
        checks.push_back(verify_detail::make_check("sampler.fixed_point", dev <= 1e-12,
                                                   "max |out-in| = " + format_double(dev), "<= 1e-12"));
    }
    return checks;
}

namespace verify_detail {

inline CheckResult grad_check_result(const std::string& name, const GradCheckResult& res, double tol) {
    std::ostringstream m;
    m << "max rel err " << res.max_rel_err;
    if (!res.worst.empty()) m << " at " << res.worst;
    std::ostringstream e;
    e << "<= " << tol;
    return CheckResult{name, res.within(tol), m.str(), e.str()};
}

}  // namespace verify_detail

inline std::vector<CheckResult> verify_gradients(double tol = 1e-4, double step = 1e-5) {
    std::vector<CheckResult> checks;
    Rng rng(20240817);

    // conv3d: weighted-sum loss so grad_out equals the weight tensor.
    {
        Conv3DLayer<double> layer = conv3d_layer<double>(3, 3, 2, 2, 2);
        layer.kernels = verify_detail::random_tensor<double>(layer.kernels.shape(), rng);
        layer.bias = verify_detail::random_tensor<double>(layer.bias.shape(), rng);
        Tensor<double> x = verify_detail::random_tensor<double>({5, 5, 4, 2}, rng);
        const Tensor<double> w =
            verify_detail::random_tensor<double>(conv3d_output_shape(layer, x.shape()), rng);
        auto loss = [&]() { return verify_detail::weighted_sum(conv3d_forward(layer, x), w); };
        const Conv3DGrads<double> g = conv3d_backward(layer, x, w);
        const GradCheckResult res = check_gradients(
            loss,
            {{"conv.kernels", &layer.kernels}, {"conv.bias", &layer.bias}, {"conv.input", &x}},
            {&g.kernels, &g.bias, &g.input}, step);
        checks.push_back(verify_detail::grad_check_result("gradients.conv3d", res, tol));
    }

    // max pooling: input gradient only.
    {
        MaxPool3DLayer pool{2, 2, 1};
        Tensor<double> x = verify_detail::random_tensor<double>({6, 6, 3, 2}, rng);
        PoolResult<double> fwd = maxpool3d_forward(pool, x);
        const Tensor<double> w = verify_detail::random_tensor<double>(fwd.output.shape(), rng);
        auto loss = [&]() {
            return verify_detail::weighted_sum(maxpool3d_forward(pool, x).output, w);
        };
        const Tensor<double> gx = maxpool3d_backward(fwd.record, w);
        const GradCheckResult res = check_gradients(loss, {{"pool.input", &x}}, {&gx}, step);
        checks.push_back(verify_detail::grad_check_result("gradients.maxpool3d", res, tol));
    }

    // relu, away from the kink at zero.
    {
        Tensor<double> x({24}, 0.0);
        for (std::size_t i = 0; i < x.size(); ++i) {
            double v = rng.uniform(-1.0, 1.0);
            if (std::abs(v) < 1e-3) v = v < 0 ? v - 0.1 : v + 0.1;
            x[i] = v;
        }
        const Tensor<double> w = verify_detail::random_tensor<double>(x.shape(), rng);
        auto loss = [&]() { return verify_detail::weighted_sum(relu(x), w); };
        const Tensor<double> gx = relu_backward(x, w);
        const GradCheckResult res = check_gradients(loss, {{"relu.input", &x}}, {&gx}, step);
        checks.push_back(verify_detail::grad_check_result("gradients.relu", res, tol));
    }

    // fully connected 7 -> 4.
    {
        FCLayer<double> fc = fc_layer<double>(4, 7);
        fc.weights = verify_detail::random_tensor<double>(fc.weights.shape(), rng);
        fc.bias = verify_detail::random_tensor<double>(fc.bias.shape(), rng);
        Tensor<double> x = verify_detail::random_tensor<double>({7}, rng);
        const Tensor<double> w = verify_detail::random_tensor<double>({4}, rng);
        auto loss = [&]() { return verify_detail::weighted_sum(fc_forward(fc, x), w); };
        const FCGrads<double> g = fc_backward(fc, x, w);
        const GradCheckResult res = check_gradients(
            loss, {{"fc.weights", &fc.weights}, {"fc.bias", &fc.bias}, {"fc.input", &x}},
            {&g.weights, &g.bias, &g.input}, step);
        checks.push_back(verify_detail::grad_check_result("gradients.fc", res, tol));
    }

    // dropout with a frozen mask.
    {
        Tensor<double> x = verify_detail::random_tensor<double>({40}, rng);
        Tensor<double> mask;
        Rng mask_rng(99);
        dropout_apply(0.4, x, Mode::Train, mask_rng, &mask);
        const Tensor<double> w = verify_detail::random_tensor<double>(x.shape(), rng);
        auto loss = [&]() { return verify_detail::weighted_sum(mul(x, mask), w); };
        const Tensor<double> gx = dropout_backward(mask, w);
        const GradCheckResult res = check_gradients(loss, {{"dropout.input", &x}}, {&gx}, step);
        checks.push_back(verify_detail::grad_check_result("gradients.dropout", res, tol));
    }

    // softmax cross-entropy on 10 logits.
    {
        Tensor<double> logits = verify_detail::random_tensor<double>({10}, rng, -2.0, 2.0);
        const std::size_t label = 3;
        auto loss = [&]() { return softmax_cross_entropy(logits, label).loss; };
        const Tensor<double> g = softmax_cross_entropy(logits, label).grad_logits;
        const GradCheckResult res = check_gradients(loss, {{"softmax.logits", &logits}}, {&g}, step);
        checks.push_back(verify_detail::grad_check_result("gradients.softmax_xent", res, tol));
    }

    // Composed scaled-down network: every parameter plus the input.
    {
        Rng init(42);
        Model<double> model = build_preset<double>("tiny", 10, init);
        attach_head(model, 3, init);
        Tensor<double> x = verify_detail::random_tensor<double>({8, 8, 10, 1}, rng, 0.0, 1.0);
        const std::size_t label = 1;
        Rng unused(0);
        auto loss = [&]() {
            const Tensor<double> feat = model_forward(model, x, Mode::Eval, unused);
            return static_cast<double>(softmax_cross_entropy(head_forward(model, feat), label).loss);
        };
        ForwardTrace<double> trace;
        const Tensor<double> feat = model_forward(model, x, Mode::Eval, unused, &trace);
        const SoftmaxLoss<double> sl = softmax_cross_entropy(head_forward(model, feat), label);
        const FCGrads<double> hg = fc_backward(model.head, feat, sl.grad_logits);
        const ModelGrads<double> mg = model_backward(model, trace, hg.input);

        // model_backward returns parameter grads; the input gradient is
        // chained through the trace by hand.
        Tensor<double> gx_full;
        {
            Tensor<double> g = hg.input;
            for (std::size_t ri = model.spec.layers.size(); ri-- > 0;) {
                const LayerSpec& l = model.spec.layers[ri];
                const Tensor<double>& lx = trace.inputs[ri];
                switch (l.kind) {
                    case LayerKind::Conv: {
                        Conv3DLayer<double> layer{model.weights[ri], model.biases[ri]};
                        g = conv3d_backward(layer, lx, g).input;
                        break;
                    }
                    case LayerKind::Pool:
                        g = maxpool3d_backward(trace.pool_records[ri], g);
                        break;
                    case LayerKind::ReLU:
                        g = relu_backward(lx, g);
                        break;
                    case LayerKind::Dropout:
                        g = dropout_backward(trace.dropout_masks[ri], g);
                        break;
                    case LayerKind::Flatten:
                        g = g.reshaped(lx.shape());
                        break;
                    case LayerKind::FC: {
                        FCLayer<double> layer{model.weights[ri], model.biases[ri]};
                        g = fc_backward(layer, lx, g).input;
                        break;
                    }
                }
            }
            gx_full = g.reshaped(x.shape());
        }

        std::vector<NamedParam> params;
        std::vector<const Tensor<double>*> analytic;
        for (std::size_t li = 0; li < model.spec.layers.size(); ++li) {
            if (model.weights[li].empty()) continue;
            params.push_back({model.spec.layers[li].name + ".kernels", &model.weights[li]});
            analytic.push_back(&mg.weights[li]);
            params.push_back({model.spec.layers[li].name + ".bias", &model.biases[li]});
            analytic.push_back(&mg.biases[li]);
        }
        params.push_back({"Head.weights", &model.head.weights});
        analytic.push_back(&hg.weights);
        params.push_back({"Head.bias", &model.head.bias});
        analytic.push_back(&hg.bias);
        params.push_back({"input", &x});
        analytic.push_back(&gx_full);

        const GradCheckResult res = check_gradients(loss, params, analytic, step);
        checks.push_back(verify_detail::grad_check_result("gradients.composed_tiny", res, tol));
    }

    // LSTM backpropagation through time: 4 steps, hidden 5, input 7.
    {
        Rng init(77);
        LstmParams<double> lstm = lstm_init<double>(7, 5, 3, init);
        FeatureSequence<double> seq;
        for (int t = 0; t < 4; ++t)
            seq.steps.push_back(verify_detail::random_tensor<double>({7}, rng));
        seq.label = 2;
        auto loss = [&]() {
            return softmax_cross_entropy(lstm_classify(lstm, seq).logits, *seq.label).loss;
        };
        const LstmOutput<double> out = lstm_classify(lstm, seq);
        const SoftmaxLoss<double> sl = softmax_cross_entropy(out.logits, *seq.label);
        const LstmGrads<double> g = lstm_backward(lstm, out.trace, sl.grad_logits);

        std::vector<NamedParam> params;
        std::vector<const Tensor<double>*> analytic;
        for (int k = 0; k < 4; ++k) {
            const std::string gate = lstm_gate_name(k);
            params.push_back({"lstm.wx." + gate, &lstm.wx[k]});
            analytic.push_back(&g.wx[k]);
            params.push_back({"lstm.wh." + gate, &lstm.wh[k]});
            analytic.push_back(&g.wh[k]);
            params.push_back({"lstm.b." + gate, &lstm.b[k]});
            analytic.push_back(&g.b[k]);
        }
        params.push_back({"lstm.head_w", &lstm.head_w});
        analytic.push_back(&g.head_w);
        params.push_back({"lstm.head_b", &lstm.head_b});
        analytic.push_back(&g.head_b);

        const GradCheckResult res = check_gradients(loss, params, analytic, step);
        checks.push_back(verify_detail::grad_check_result("gradients.lstm_bptt", res, tol));
    }
    return checks;
}

// suite: "shapes", "params", "gradients", "sampler", or "all".
inline std::vector<CheckResult> run_verification(const std::string& suite) {
    std::vector<CheckResult> checks;
    auto append = [&](std::vector<CheckResult> more) {
        for (auto& c : more) checks.push_back(std::move(c));
    };
    bool known = false;
    if (suite == "shapes" || suite == "all") {
        append(verify_shapes());
        known = true;
    }
    if (suite == "params" || suite == "all") {
        append(verify_params());
        known = true;
    }
    if (suite == "gradients" || suite == "all") {
        append(verify_gradients());
        known = true;
    }
    if (suite == "sampler" || suite == "all") {
        append(verify_sampler());
        known = true;
    }
    if (!known) throw ConfigError("unknown verification suite '" + suite + "'");
    return checks;
}

}  // namespace gwnet
