#pragma once

// Shared helpers for the test binaries: finite-difference gradient checks and
// small random generators.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "mokge/optim.hpp"
#include "mokge/tensor.hpp"

namespace testing_support {

struct GradCheck {
    double max_rel_err = 0.0;
    std::size_t checked = 0;
    double max_abs_grad = 0.0;
};

// Relative error with a small absolute floor: entries whose true gradient is
// ~0 (dead ReLU units, unused rows) would otherwise divide noise by noise.
inline double rel_err(double analytic, double numeric) {
    const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-6});
    return std::abs(analytic - numeric) / denom;
}

/// Compares backprop against central differences on `count` random entries of
/// `param`. `loss_fn` must rebuild the loss from scratch on every call.
inline GradCheck check_gradient(const std::function<mokge::Tensor()>& loss_fn, mokge::Tensor param,
                                std::size_t count, std::uint64_t seed, double h = 1e-6) {
    param.clear_grad();
    {
        mokge::Tape tape;
        const mokge::Tensor loss = loss_fn();
        tape.backward(loss);
    }
    const std::vector<double> analytic = param.has_grad()
                                             ? std::vector<double>(param.grad().begin(), param.grad().end())
                                             : std::vector<double>(param.numel(), 0.0);
    param.clear_grad();

    std::mt19937_64 rng(seed);
    GradCheck out;
    auto values = param.mutable_data();
    for (std::size_t c = 0; c < count; ++c) {
        const std::size_t i = rng() % values.size();
        const double saved = values[i];
        values[i] = saved + h;
        const double up = loss_fn().item();
        values[i] = saved - h;
        const double down = loss_fn().item();
        values[i] = saved;
        const double numeric = (up - down) / (2.0 * h);
        out.max_rel_err = std::max(out.max_rel_err, rel_err(analytic[i], numeric));
        out.max_abs_grad = std::max(out.max_abs_grad, std::abs(analytic[i]));
        ++out.checked;
    }
    return out;
}

inline mokge::Tensor random_tensor(mokge::Shape shape, std::mt19937_64& rng, double scale = 1.0,
                                   bool requires_grad = true) {
    std::size_t n = 1;
    for (auto d : shape)
        n *= d;
    std::normal_distribution<double> dist(0.0, scale);
    std::vector<double> v(n);
    for (auto& x : v)
        x = dist(rng);
    return mokge::Tensor::from_data(std::move(shape), std::move(v), requires_grad);
}

inline std::size_t uniform_index(std::mt19937_64& rng, std::size_t n) { return rng() % n; }

}  // namespace testing_support
