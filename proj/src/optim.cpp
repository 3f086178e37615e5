#include "mokge/optim.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace mokge {

Tensor& ParameterSet::add(std::string name, Tensor tensor) {
    if (contains(name))
        throw std::invalid_argument("duplicate parameter name: " + name);
    tensor.node()->requires_grad = true;
    entries_.emplace_back(std::move(name), std::move(tensor));
    return entries_.back().second;
}

Tensor& ParameterSet::get(const std::string& name) {
    for (auto& [n, t] : entries_)
        if (n == name)
            return t;
    throw std::out_of_range("unknown parameter: " + name);
}

const Tensor& ParameterSet::get(const std::string& name) const {
    for (const auto& [n, t] : entries_)
        if (n == name)
            return t;
    throw std::out_of_range("unknown parameter: " + name);
}

bool ParameterSet::contains(const std::string& name) const {
    return std::any_of(entries_.begin(), entries_.end(),
                       [&](const auto& e) { return e.first == name; });
}

std::size_t ParameterSet::scalar_count() const {
    std::size_t n = 0;
    for (const auto& [name, t] : entries_)
        n += t.numel();
    return n;
}

void ParameterSet::zero_grad() {
    for (auto& [name, t] : entries_)
        t.clear_grad();
}

Adam::Adam(ParameterSet& params, AdamConfig config) : params_(&params), config_(config) {
    for (const auto& [name, t] : params) {
        m_.emplace_back(t.numel(), 0.0);
        v_.emplace_back(t.numel(), 0.0);
    }
}

void Adam::step(double lr_scale) {
    ++t_;
    const double lr = config_.lr * lr_scale;
    const double bc1 = 1.0 - std::pow(config_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(config_.beta2, static_cast<double>(t_));
    std::size_t idx = 0;
    for (auto& [name, t] : *params_) {
        auto& m = m_[idx];
        auto& v = v_[idx];
        ++idx;
        if (!t.has_grad())
            continue;
        auto w = t.mutable_data();
        auto g = t.grad();
        for (std::size_t i = 0; i < w.size(); ++i) {
            m[i] = config_.beta1 * m[i] + (1.0 - config_.beta1) * g[i];
            v[i] = config_.beta2 * v[i] + (1.0 - config_.beta2) * g[i] * g[i];
            const double mhat = m[i] / bc1;
            const double vhat = v[i] / bc2;
            w[i] -= lr * (mhat / (std::sqrt(vhat) + config_.eps) + config_.weight_decay * w[i]);
        }
    }
}

double warmup_linear_decay(std::size_t step, std::size_t warmup, std::size_t total) {
    if (warmup > 0 && step < warmup)
        return static_cast<double>(step + 1) / static_cast<double>(warmup);
    if (total <= warmup)
        return 1.0;
    const double remaining = static_cast<double>(total - std::min(step, total)) /
                             static_cast<double>(total - warmup);
    return std::clamp(remaining, 0.0, 1.0);
}

Tensor uniform_tensor(Shape shape, double bound, std::mt19937_64& rng) {
    Tensor t = Tensor::zeros(std::move(shape));
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (double& v : t.mutable_data())
        v = dist(rng);
    return t;
}

Tensor normal_tensor(Shape shape, double stddev, std::mt19937_64& rng) {
    Tensor t = Tensor::zeros(std::move(shape));
    std::normal_distribution<double> dist(0.0, stddev);
    for (double& v : t.mutable_data())
        v = dist(rng);
    return t;
}

Tensor glorot_tensor(std::size_t fan_in, std::size_t fan_out, std::mt19937_64& rng) {
    return normal_tensor({fan_in, fan_out},
                         std::sqrt(2.0 / static_cast<double>(fan_in + fan_out)), rng);
}

Tensor constant_tensor(Shape shape, double value) {
    Tensor t = Tensor::zeros(std::move(shape));
    for (double& v : t.mutable_data())
        v = value;
    return t;
}

}  // namespace mokge
