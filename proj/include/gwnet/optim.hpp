#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "gwnet/error.hpp"
#include "gwnet/tensor.hpp"

namespace gwnet {

// Hyperparameters for the two-step training procedure. Defaults: lr 1e-4
// decayed by sqrt(0.1) every 100 epochs with a per-step decay of 1e-6,
// Adam(0.9, 0.99), dropout 0.4, 300 epochs, 80/20 holdout or 5-fold
// cross-validation.
struct TrainingConfig {
    double base_lr = 1e-4;
    double lr_step_factor = 0.31622776601683794;  // sqrt(0.1)
    std::size_t lr_step_epochs = 100;
    double step_decay = 1e-6;
    std::size_t epochs = 300;
    std::size_t lstm_epochs = 300;
    double beta1 = 0.9;
    double beta2 = 0.99;
    double epsilon = 1e-8;
    double dropout_rate = 0.4;
    std::size_t batch_size = 16;
    std::uint64_t seed = 0;
    double train_fraction = 0.8;
    std::size_t folds = 5;
    std::size_t lstm_hidden = 50;
    std::size_t neighborhood = 4;
    std::size_t augment_count = 0;  // generated clips, round-robin over flips/rotation

    void validate() const {
        if (base_lr <= 0) throw ConfigError("base learning rate must be positive");
        if (beta1 <= 0 || beta1 >= 1 || beta2 <= 0 || beta2 >= 1)
            throw ConfigError("Adam betas must lie in (0,1)");
        if (epsilon <= 0) throw ConfigError("Adam epsilon must be positive");
        if (dropout_rate < 0 || dropout_rate >= 1) throw ConfigError("dropout rate must lie in [0,1)");
        if (train_fraction <= 0 || train_fraction >= 1)
            throw ConfigError("train fraction must lie in (0,1)");
        if (batch_size == 0) throw ConfigError("batch size must be positive");
        if (folds < 2) throw ConfigError("cross-validation needs at least 2 folds");
        if (neighborhood == 0) throw ConfigError("temporal neighborhood must be positive");
        if (step_decay < 0) throw ConfigError("per-step decay must be non-negative");
        if (lr_step_epochs == 0) throw ConfigError("lr step interval must be positive");
        if (lstm_hidden == 0) throw ConfigError("LSTM hidden size must be positive");
    }
};

// lr = base * factor^floor(epoch/100) * 1/(1 + decay*global_step).
inline double lr_at(const TrainingConfig& cfg, std::size_t epoch, std::size_t global_step) {
    const double staged =
        cfg.base_lr * std::pow(cfg.lr_step_factor,
                               static_cast<double>(epoch / cfg.lr_step_epochs));
    return staged / (1.0 + cfg.step_decay * static_cast<double>(global_step));
}

// First and second moment per parameter tensor plus the shared step counter.
template <typename T>
struct AdamState {
    std::vector<Tensor<T>> m;
    std::vector<Tensor<T>> v;
    std::uint64_t t = 0;
};

template <typename T>
AdamState<T> adam_init(const std::vector<Tensor<T>*>& params) {
    AdamState<T> s;
    s.m.reserve(params.size());
    s.v.reserve(params.size());
    for (const Tensor<T>* p : params) {
        s.m.push_back(Tensor<T>::zeros_like(*p));
        s.v.push_back(Tensor<T>::zeros_like(*p));
    }
    return s;
}

// One bias-corrected Adam update over a parameter list. Frozen entries are
// left untouched, moments included, so a frozen tensor stays bit-identical.
template <typename T>
void adam_step(AdamState<T>& state, const std::vector<Tensor<T>*>& params,
               const std::vector<const Tensor<T>*>& grads, const std::vector<bool>& trainable,
               double lr, const TrainingConfig& cfg) {
    if (params.size() != grads.size() || params.size() != state.m.size() ||
        params.size() != trainable.size())
        throw ShapeError("adam_step parameter list mismatch");
    if (lr <= 0) throw DomainError("adam_step needs a positive learning rate");
    state.t += 1;
    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.t));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.t));
    for (std::size_t pi = 0; pi < params.size(); ++pi) {
        if (!trainable[pi]) continue;
        Tensor<T>& p = *params[pi];
        const Tensor<T>& g = *grads[pi];
        if (!p.same_shape(g))
            throw ShapeError("adam_step gradient shape " + shape_to_string(g.shape()) +
                             " does not match parameter " + shape_to_string(p.shape()));
        Tensor<T>& m = state.m[pi];
        Tensor<T>& v = state.v[pi];
        for (std::size_t i = 0; i < p.size(); ++i) {
            const double gv = static_cast<double>(g[i]);
            const double mi = cfg.beta1 * static_cast<double>(m[i]) + (1.0 - cfg.beta1) * gv;
            const double vi = cfg.beta2 * static_cast<double>(v[i]) + (1.0 - cfg.beta2) * gv * gv;
            m[i] = static_cast<T>(mi);
            v[i] = static_cast<T>(vi);
            const double mhat = mi / bc1;
            const double vhat = vi / bc2;
            p[i] = static_cast<T>(static_cast<double>(p[i]) - lr * mhat / (std::sqrt(vhat) + cfg.epsilon));
        }
    }
}

}  // namespace gwnet
