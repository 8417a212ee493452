#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "gwnet/augment.hpp"
#include "gwnet/error.hpp"
#include "gwnet/lstm.hpp"
#include "gwnet/model.hpp"
#include "gwnet/optim.hpp"
#include "gwnet/rng.hpp"
#include "gwnet/sampler.hpp"
#include "gwnet/tensor.hpp"

namespace gwnet {

// Two-step training: the 3D CNN is trained first with a softmax class head
// on whole clips, then frozen while the LSTM learns to classify the
// per-neighborhood feature sequences. Everything is deterministic given the
// seed: fold plans, initialization, batch order, and dropout masks.

template <typename T>
struct LabeledClip {
    ClipVolume<T> clip;
    std::size_t label = 0;
    std::string subject;
    // Set for augmented clips: index of the source clip in the same dataset.
    std::optional<std::size_t> source_index;
};

template <typename T>
struct Dataset {
    std::vector<LabeledClip<T>> clips;
    std::vector<std::string> label_names;

    std::size_t num_classes() const { return label_names.size(); }
    std::size_t size() const { return clips.size(); }
};

// Appends `target_count` augmented clips, each tagged with its source index.
template <typename T>
void expand_with_augmentation(Dataset<T>& ds, std::size_t target_count) {
    if (target_count == 0) return;
    std::vector<ClipVolume<T>> sources;
    std::vector<std::size_t> source_pos;
    for (std::size_t i = 0; i < ds.clips.size(); ++i) {
        if (ds.clips[i].source_index) continue;  // never augment an augmented clip
        sources.push_back(ds.clips[i].clip);
        source_pos.push_back(i);
    }
    auto generated = augment_round_robin(sources, target_count);
    for (auto& g : generated) {
        LabeledClip<T> lc;
        const std::size_t src = source_pos[g.source_index];
        lc.clip = std::move(g.clip);
        lc.label = ds.clips[src].label;
        lc.subject = ds.clips[src].subject;
        lc.source_index = src;
        ds.clips.push_back(std::move(lc));
    }
}

// ---------------------------------------------------------------------------
// Cross-validation plan. Folds partition the original clips; augmented
// variants always train with their source's fold and are never tested on.

enum class FoldGrouping { Clip, Subject };

struct FoldPlan {
    std::vector<std::vector<std::size_t>> test_indices;
    std::vector<std::vector<std::size_t>> train_indices;
    FoldGrouping grouping = FoldGrouping::Clip;

    std::size_t folds() const { return test_indices.size(); }
};

template <typename T>
FoldPlan build_fold_plan(const Dataset<T>& ds, std::size_t folds, std::uint64_t seed,
                         FoldGrouping grouping = FoldGrouping::Clip) {
    std::vector<std::size_t> originals;
    for (std::size_t i = 0; i < ds.clips.size(); ++i)
        if (!ds.clips[i].source_index) originals.push_back(i);
    if (originals.size() < folds)
        throw InputError("need at least " + std::to_string(folds) + " clips for " +
                         std::to_string(folds) + "-fold cross-validation, got " +
                         std::to_string(originals.size()));

    // Group clips, shuffle groups, then deal groups into near-equal folds.
    std::vector<std::vector<std::size_t>> groups;
    if (grouping == FoldGrouping::Clip) {
        for (std::size_t i : originals) groups.push_back({i});
    } else {
        std::map<std::string, std::vector<std::size_t>> by_subject;
        for (std::size_t i : originals) by_subject[ds.clips[i].subject].push_back(i);
        for (auto& [subject, members] : by_subject) groups.push_back(std::move(members));
        if (groups.size() < folds)
            throw InputError("fewer subjects than folds under subject grouping");
    }
    Rng rng(seed);
    rng.shuffle(groups);

    FoldPlan plan;
    plan.grouping = grouping;
    plan.test_indices.assign(folds, {});
    plan.train_indices.assign(folds, {});
    for (std::size_t g = 0; g < groups.size(); ++g)
        for (std::size_t idx : groups[g]) plan.test_indices[g % folds].push_back(idx);

    // Train side: every original outside the fold plus all augmented clips
    // whose source is outside the fold.
    std::vector<std::size_t> fold_of(ds.clips.size(), folds);
    for (std::size_t f = 0; f < folds; ++f)
        for (std::size_t idx : plan.test_indices[f]) fold_of[idx] = f;
    for (std::size_t f = 0; f < folds; ++f) {
        for (std::size_t i = 0; i < ds.clips.size(); ++i) {
            const std::size_t owner =
                ds.clips[i].source_index ? fold_of[*ds.clips[i].source_index] : fold_of[i];
            if (owner != f) plan.train_indices[f].push_back(i);
        }
    }
    return plan;
}

// Single 80/20 split in the same shape as a one-fold plan.
template <typename T>
FoldPlan build_holdout_plan(const Dataset<T>& ds, double train_fraction, std::uint64_t seed) {
    std::vector<std::size_t> originals;
    for (std::size_t i = 0; i < ds.clips.size(); ++i)
        if (!ds.clips[i].source_index) originals.push_back(i);
    if (originals.size() < 2) throw InputError("holdout split needs at least 2 clips");
    Rng rng(seed);
    rng.shuffle(originals);
    std::size_t train_n = static_cast<std::size_t>(
        std::floor(train_fraction * static_cast<double>(originals.size())));
    train_n = std::clamp<std::size_t>(train_n, 1, originals.size() - 1);

    FoldPlan plan;
    plan.test_indices.assign(1, {});
    plan.train_indices.assign(1, {});
    std::vector<bool> is_train(ds.clips.size(), false);
    for (std::size_t k = 0; k < originals.size(); ++k) {
        if (k < train_n)
            is_train[originals[k]] = true;
        else
            plan.test_indices[0].push_back(originals[k]);
    }
    for (std::size_t i = 0; i < ds.clips.size(); ++i) {
        const bool train = ds.clips[i].source_index ? is_train[*ds.clips[i].source_index] : is_train[i];
        if (train) plan.train_indices[0].push_back(i);
    }
    std::sort(plan.test_indices[0].begin(), plan.test_indices[0].end());
    return plan;
}

// ---------------------------------------------------------------------------
// Metrics log: one row per epoch, tab-separated
// epoch, lr, train_loss, train_acc, test_loss, test_acc.

struct MetricsRow {
    std::size_t epoch = 0;
    double lr = 0;
    double train_loss = 0;
    double train_acc = 0;
    double test_loss = 0;
    double test_acc = 0;
};

// 6 significant digits, fixed formatting for diffable logs.
inline std::string format_g6(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6g", v);
    return buf;
}

inline std::string metrics_to_tsv(const std::vector<MetricsRow>& rows) {
    std::string out;
    for (const MetricsRow& r : rows) {
        out += std::to_string(r.epoch);
        out += '\t';
        out += format_g6(r.lr);
        out += '\t';
        out += format_g6(r.train_loss);
        out += '\t';
        out += format_g6(r.train_acc);
        out += '\t';
        out += format_g6(r.test_loss);
        out += '\t';
        out += format_g6(r.test_acc);
        out += '\n';
    }
    return out;
}

template <typename T>
struct TrainedArtifacts {
    Model<T> model;
    LstmParams<T> lstm;
    std::vector<MetricsRow> log;
};

struct EvalResult {
    double accuracy = 0;
    std::vector<std::vector<std::size_t>> confusion;  // rows = true labels
    std::size_t total = 0;
};

namespace train_detail {

template <typename T>
struct ParamSet {
    std::vector<Tensor<T>*> params;
    std::vector<bool> trainable;
};

template <typename T>
ParamSet<T> collect_model_params(Model<T>& model) {
    ParamSet<T> set;
    for_each_parameter<T>(model, [&](const std::string&, Tensor<T>& t, bool trainable) {
        set.params.push_back(&t);
        set.trainable.push_back(trainable);
    });
    return set;
}

template <typename T>
ParamSet<T> collect_lstm_params(LstmParams<T>& lstm) {
    ParamSet<T> set;
    for_each_lstm_parameter<T>(lstm, [&](const std::string&, Tensor<T>& t) {
        set.params.push_back(&t);
        set.trainable.push_back(true);
    });
    return set;
}

// Mean head loss/accuracy over a clip set in eval mode.
template <typename T>
std::pair<double, double> cnn_eval(const Model<T>& model, const Dataset<T>& ds,
                                   const std::vector<std::size_t>& indices) {
    if (indices.empty()) return {0.0, 0.0};
    Rng unused(0);
    double loss = 0;
    std::size_t correct = 0;
    for (std::size_t idx : indices) {
        const LabeledClip<T>& lc = ds.clips[idx];
        Tensor<T> feat = model_forward(model, lc.clip.voxels, Mode::Eval, unused);
        Tensor<T> logits = head_forward(model, feat);
        loss += static_cast<double>(softmax_cross_entropy(logits, lc.label).loss);
        if (argmax_flat(logits) == lc.label) ++correct;
    }
    return {loss / static_cast<double>(indices.size()),
            static_cast<double>(correct) / static_cast<double>(indices.size())};
}

template <typename T>
std::pair<double, double> lstm_eval(const LstmParams<T>& lstm,
                                    const std::vector<FeatureSequence<T>>& seqs,
                                    const std::vector<std::size_t>& indices) {
    if (indices.empty()) return {0.0, 0.0};
    double loss = 0;
    std::size_t correct = 0;
    for (std::size_t idx : indices) {
        const FeatureSequence<T>& seq = seqs[idx];
        LstmOutput<T> out = lstm_classify(lstm, seq);
        loss += static_cast<double>(softmax_cross_entropy(out.logits, *seq.label).loss);
        if (argmax_flat(out.logits) == *seq.label) ++correct;
    }
    return {loss / static_cast<double>(indices.size()),
            static_cast<double>(correct) / static_cast<double>(indices.size())};
}

}  // namespace train_detail

// Trains CNN (stage 1) then LSTM on frozen features (stage 2). The metrics
// log carries stage-1 epochs first, numbering continuing through stage 2;
// per-row loss/accuracy refer to the stage being trained. `model` must carry
// a head sized for the dataset's class count.
template <typename T>
TrainedArtifacts<T> train(Model<T> model, LstmParams<T> lstm, const Dataset<T>& dataset,
                          const TrainingConfig& config, const std::vector<std::size_t>& train_idx,
                          const std::vector<std::size_t>& test_idx) {
    config.validate();
    if (!model.has_head) throw ConfigError("training requires an attached classifier head");
    for (const auto& lc : dataset.clips)
        if (lc.label >= dataset.num_classes())
            throw ConfigError("clip label outside the dataset's class table");

    TrainedArtifacts<T> art{std::move(model), std::move(lstm), {}};
    Rng train_rng(Rng(config.seed).fork(0x7261696e).next_u64());

    // Stage 1: CNN + head on clip labels.
    {
        auto pset = train_detail::collect_model_params(art.model);
        AdamState<T> adam = adam_init<T>(pset.params);
        std::size_t global_step = 0;
        std::vector<std::size_t> order(train_idx);
        for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
            const double epoch_lr = lr_at(config, epoch, global_step);
            train_rng.shuffle(order);
            double epoch_loss = 0;
            std::size_t epoch_correct = 0;
            for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
                const std::size_t stop = std::min(order.size(), start + config.batch_size);
                std::vector<Tensor<T>> grad_w, grad_b;
                Tensor<T> grad_head_w, grad_head_b;
                bool have_grads = false;
                for (std::size_t bi = start; bi < stop; ++bi) {
                    const LabeledClip<T>& lc = dataset.clips[order[bi]];
                    ForwardTrace<T> trace;
                    Tensor<T> feat =
                        model_forward(art.model, lc.clip.voxels, Mode::Train, train_rng, &trace);
                    Tensor<T> logits = head_forward(art.model, feat);
                    SoftmaxLoss<T> sl = softmax_cross_entropy(logits, lc.label);
                    epoch_loss += static_cast<double>(sl.loss);
                    if (argmax_flat(logits) == lc.label) ++epoch_correct;

                    FCGrads<T> hg = fc_backward(art.model.head, feat, sl.grad_logits);
                    ModelGrads<T> mg = model_backward(art.model, trace, hg.input);
                    if (!have_grads) {
                        grad_w = std::move(mg.weights);
                        grad_b = std::move(mg.biases);
                        grad_head_w = std::move(hg.weights);
                        grad_head_b = std::move(hg.bias);
                        have_grads = true;
                    } else {
                        for (std::size_t li = 0; li < grad_w.size(); ++li) {
                            if (grad_w[li].empty()) continue;
                            add_inplace(grad_w[li], mg.weights[li]);
                            add_inplace(grad_b[li], mg.biases[li]);
                        }
                        add_inplace(grad_head_w, hg.weights);
                        add_inplace(grad_head_b, hg.bias);
                    }
                }
                const T inv_batch = static_cast<T>(1.0 / static_cast<double>(stop - start));
                std::vector<const Tensor<T>*> grads;
                for (std::size_t li = 0; li < art.model.spec.layers.size(); ++li) {
                    if (art.model.weights[li].empty()) continue;
                    scale_inplace(grad_w[li], inv_batch);
                    scale_inplace(grad_b[li], inv_batch);
                    grads.push_back(&grad_w[li]);
                    grads.push_back(&grad_b[li]);
                }
                scale_inplace(grad_head_w, inv_batch);
                scale_inplace(grad_head_b, inv_batch);
                grads.push_back(&grad_head_w);
                grads.push_back(&grad_head_b);
                adam_step(adam, pset.params, grads, pset.trainable, lr_at(config, epoch, global_step),
                          config);
                ++global_step;
            }
            MetricsRow row;
            row.epoch = epoch;
            row.lr = epoch_lr;
            row.train_loss = train_idx.empty() ? 0 : epoch_loss / static_cast<double>(train_idx.size());
            row.train_acc = train_idx.empty()
                                ? 0
                                : static_cast<double>(epoch_correct) / static_cast<double>(train_idx.size());
            const auto [tl, ta] = train_detail::cnn_eval(art.model, dataset, test_idx);
            row.test_loss = tl;
            row.test_acc = ta;
            art.log.push_back(row);
        }
    }

    // Stage 2: freeze the CNN, extract feature sequences once, train the LSTM.
    {
        std::vector<FeatureSequence<T>> seqs(dataset.clips.size());
        auto need = [&](std::size_t idx) {
            if (!seqs[idx].steps.empty()) return;
            seqs[idx] = build_feature_sequence(art.model, dataset.clips[idx].clip, config.neighborhood);
            seqs[idx].label = dataset.clips[idx].label;
        };
        for (std::size_t idx : train_idx) need(idx);
        for (std::size_t idx : test_idx) need(idx);

        auto pset = train_detail::collect_lstm_params(art.lstm);
        AdamState<T> adam = adam_init<T>(pset.params);
        std::size_t global_step = 0;
        std::vector<std::size_t> order(train_idx);
        for (std::size_t epoch = 0; epoch < config.lstm_epochs; ++epoch) {
            const double epoch_lr = lr_at(config, epoch, global_step);
            train_rng.shuffle(order);
            double epoch_loss = 0;
            std::size_t epoch_correct = 0;
            for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
                const std::size_t stop = std::min(order.size(), start + config.batch_size);
                LstmGrads<T> acc = lstm_grads_zero(art.lstm);
                for (std::size_t bi = start; bi < stop; ++bi) {
                    const FeatureSequence<T>& seq = seqs[order[bi]];
                    LstmOutput<T> out = lstm_classify(art.lstm, seq);
                    SoftmaxLoss<T> sl = softmax_cross_entropy(out.logits, *seq.label);
                    epoch_loss += static_cast<double>(sl.loss);
                    if (argmax_flat(out.logits) == *seq.label) ++epoch_correct;
                    LstmGrads<T> g = lstm_backward(art.lstm, out.trace, sl.grad_logits);
                    for (int k = 0; k < 4; ++k) {
                        add_inplace(acc.wx[k], g.wx[k]);
                        add_inplace(acc.wh[k], g.wh[k]);
                        add_inplace(acc.b[k], g.b[k]);
                    }
                    add_inplace(acc.head_w, g.head_w);
                    add_inplace(acc.head_b, g.head_b);
                }
                const T inv_batch = static_cast<T>(1.0 / static_cast<double>(stop - start));
                std::vector<const Tensor<T>*> grads;
                for (int k = 0; k < 4; ++k) {
                    scale_inplace(acc.wx[k], inv_batch);
                    scale_inplace(acc.wh[k], inv_batch);
                    scale_inplace(acc.b[k], inv_batch);
                }
                scale_inplace(acc.head_w, inv_batch);
                scale_inplace(acc.head_b, inv_batch);
                for (int k = 0; k < 4; ++k) {
                    grads.push_back(&acc.wx[k]);
                    grads.push_back(&acc.wh[k]);
                    grads.push_back(&acc.b[k]);
                }
                grads.push_back(&acc.head_w);
                grads.push_back(&acc.head_b);
                adam_step(adam, pset.params, grads, pset.trainable, lr_at(config, epoch, global_step),
                          config);
                ++global_step;
            }
            MetricsRow row;
            row.epoch = config.epochs + epoch;
            row.lr = epoch_lr;
            row.train_loss = train_idx.empty() ? 0 : epoch_loss / static_cast<double>(train_idx.size());
            row.train_acc = train_idx.empty()
                                ? 0
                                : static_cast<double>(epoch_correct) / static_cast<double>(train_idx.size());
            const auto [tl, ta] = train_detail::lstm_eval(art.lstm, seqs, test_idx);
            row.test_loss = tl;
            row.test_acc = ta;
            art.log.push_back(row);
        }
    }
    return art;
}

// Whole-sequence prediction: CNN features -> LSTM -> argmax.
template <typename T>
std::size_t predict(const TrainedArtifacts<T>& art, const ClipVolume<T>& clip,
                    std::size_t neighborhood = 4) {
    FeatureSequence<T> seq = build_feature_sequence(art.model, clip, neighborhood);
    return argmax_flat(lstm_classify(art.lstm, seq).logits);
}

template <typename T>
EvalResult evaluate(const TrainedArtifacts<T>& art, const Dataset<T>& dataset,
                    const std::vector<std::size_t>& indices, std::size_t neighborhood = 4) {
    if (indices.empty()) throw InputError("evaluate needs a non-empty test set");
    EvalResult res;
    const std::size_t n_classes = dataset.num_classes();
    res.confusion.assign(n_classes, std::vector<std::size_t>(n_classes, 0));
    std::size_t correct = 0;
    for (std::size_t idx : indices) {
        const LabeledClip<T>& lc = dataset.clips[idx];
        const std::size_t pred = predict(art, lc.clip, neighborhood);
        res.confusion[lc.label][pred] += 1;
        if (pred == lc.label) ++correct;
    }
    res.total = indices.size();
    res.accuracy = static_cast<double>(correct) / static_cast<double>(indices.size());
    return res;
}

// Transfer learning: reuse pretrained parameters, re-initialize the heads for
// the new class count, and update only the named trainable layers. Clips
// whose spatial shape disagrees with the pretrained input must be adapted by
// the caller (see adapt_clip) or this throws.
template <typename T>
TrainedArtifacts<T> fine_tune(const TrainedArtifacts<T>& pretrained, const Dataset<T>& dataset,
                              const std::vector<std::string>& trainable, const TrainingConfig& config,
                              const std::vector<std::size_t>& train_idx,
                              const std::vector<std::size_t>& test_idx) {
    Model<T> model = pretrained.model;
    for (const auto& lc : dataset.clips)
        if (lc.clip.height() != model.spec.in_h || lc.clip.width() != model.spec.in_w ||
            lc.clip.frames() != model.spec.in_t)
            throw ShapeError("fine-tune dataset clip shape does not match the pretrained input " +
                             shape_to_string({model.spec.in_h, model.spec.in_w, model.spec.in_t}));

    Rng init_rng(Rng(config.seed).fork(0x66696e65).next_u64());
    attach_head(model, dataset.num_classes(), init_rng);
    freeze_layers(model, trainable);

    LstmParams<T> lstm = lstm_init<T>(model.feature_size(), config.lstm_hidden,
                                      dataset.num_classes(), init_rng);
    return train(std::move(model), std::move(lstm), dataset, config, train_idx, test_idx);
}

// Crop/pad adapter for transfer across input sizes: spatial axes are center
// cropped when larger and zero padded symmetrically when smaller.
template <typename T>
ClipVolume<T> adapt_clip(const ClipVolume<T>& clip, std::size_t target_h, std::size_t target_w) {
    const std::size_t h = clip.height(), w = clip.width(), tn = clip.frames();
    ClipVolume<T> out;
    out.source_id = clip.source_id;
    out.voxels = Tensor<T>({target_h, target_w, tn}, T(0));
    // Signed offsets of the target origin inside the source.
    const long long off_y = (static_cast<long long>(h) - static_cast<long long>(target_h)) / 2;
    const long long off_x = (static_cast<long long>(w) - static_cast<long long>(target_w)) / 2;
    for (std::size_t y = 0; y < target_h; ++y) {
        const long long sy = static_cast<long long>(y) + off_y;
        if (sy < 0 || sy >= static_cast<long long>(h)) continue;
        for (std::size_t x = 0; x < target_w; ++x) {
            const long long sx = static_cast<long long>(x) + off_x;
            if (sx < 0 || sx >= static_cast<long long>(w)) continue;
            for (std::size_t t = 0; t < tn; ++t)
                out.voxels(y, x, t) =
                    clip.voxels(static_cast<std::size_t>(sy), static_cast<std::size_t>(sx), t);
        }
    }
    return out;
}

}  // namespace gwnet
