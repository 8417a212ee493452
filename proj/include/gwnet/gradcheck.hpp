#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "gwnet/tensor.hpp"

namespace gwnet {

// Central finite differences against analytic gradients. The checker only
// evaluates the forward map, so it is independent of every backward pass it
// verifies. All checks run in 64-bit precision.

struct GradCheckResult {
    double max_rel_err = 0.0;
    double max_abs_err = 0.0;
    std::string worst;  // "tensor[index]" of the worst element

    bool within(double tol) const { return max_rel_err <= tol; }
};

// Relative error with a floored denominator: gradients below the floor are
// held to an absolute tolerance of floor * tol instead of blowing up the
// ratio on near-zero values.
inline double relative_error(double analytic, double numeric, double denom_floor = 1e-5) {
    const double diff = std::abs(analytic - numeric);
    return diff / std::max({std::abs(analytic), std::abs(numeric), denom_floor});
}

struct NamedParam {
    std::string name;
    Tensor<double>* tensor;
};

// Compares analytic gradients (aligned with `params`) against central
// differences of `loss` with the given step.
inline GradCheckResult check_gradients(const std::function<double()>& loss,
                                       const std::vector<NamedParam>& params,
                                       const std::vector<const Tensor<double>*>& analytic,
                                       double step = 1e-5) {
    GradCheckResult res;
    for (std::size_t pi = 0; pi < params.size(); ++pi) {
        Tensor<double>& t = *params[pi].tensor;
        const Tensor<double>& g = *analytic[pi];
        for (std::size_t i = 0; i < t.size(); ++i) {
            const double saved = t[i];
            t[i] = saved + step;
            const double up = loss();
            t[i] = saved - step;
            const double down = loss();
            t[i] = saved;
            const double numeric = (up - down) / (2.0 * step);
            const double rel = relative_error(g[i], numeric);
            const double abs_err = std::abs(g[i] - numeric);
            if (rel > res.max_rel_err) {
                res.max_rel_err = rel;
                res.worst = params[pi].name + "[" + std::to_string(i) + "]";
            }
            res.max_abs_err = std::max(res.max_abs_err, abs_err);
        }
    }
    return res;
}

}  // namespace gwnet
