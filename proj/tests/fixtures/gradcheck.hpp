#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "jolt/autodiff.hpp"
#include "jolt/rng.hpp"

namespace jolt::fixtures {

using TensorD = ad::Tensor<double>;
using MatD = ad::Mat<double>;

inline MatD random_mat(CounterRng& rng, std::size_t r, std::size_t c, double scale = 1.0) {
    MatD m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
    for (Eigen::Index k = 0; k < m.size(); ++k) m.data()[k] = rng.normal() * scale;
    return m;
}

/// Max over all input entries of |analytic - numeric| / max(|analytic|, |numeric|, 1e-4),
/// numeric being the central difference with step h.
inline double max_relative_error(const std::function<TensorD(std::vector<TensorD>&)>& loss_fn, std::vector<TensorD>& inputs,
                                 double h = 1e-5) {
    for (auto& t : inputs) t.zero_grad();
    const TensorD loss = loss_fn(inputs);
    ad::backward(loss);
    std::vector<MatD> analytic;
    for (auto& t : inputs) analytic.push_back(t.grad());
    double worst = 0;
    ad::NoGradGuard guard;
    for (std::size_t k = 0; k < inputs.size(); ++k) {
        auto& v = inputs[k].mutable_value();
        for (Eigen::Index e = 0; e < v.size(); ++e) {
            const double orig = v.data()[e];
            v.data()[e] = orig + h;
            const double up = loss_fn(inputs).item();
            v.data()[e] = orig - h;
            const double down = loss_fn(inputs).item();
            v.data()[e] = orig;
            const double numeric = (up - down) / (2 * h);
            const double a = analytic[k].data()[e];
            worst = std::max(worst, std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), 1e-4}));
        }
    }
    return worst;
}

/// Reduces a tensor to a scalar through fixed weights, so every entry's gradient is exercised.
inline TensorD project(const TensorD& t, const MatD& weights) { return ad::sum(ad::mul(t, TensorD::constant(weights))); }

}  // namespace jolt::fixtures
