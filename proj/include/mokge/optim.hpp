#pragma once

#include <cstddef>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "mokge/tensor.hpp"

namespace mokge {

/// Named trainable tensors in registration order.
class ParameterSet {
  public:
    Tensor& add(std::string name, Tensor tensor);
    Tensor& get(const std::string& name);
    const Tensor& get(const std::string& name) const;
    bool contains(const std::string& name) const;

    std::size_t size() const { return entries_.size(); }
    std::size_t scalar_count() const;
    auto begin() { return entries_.begin(); }
    auto end() { return entries_.end(); }
    auto begin() const { return entries_.begin(); }
    auto end() const { return entries_.end(); }

    /// Drops every gradient buffer, so untouched parameters are skipped by the
    /// next optimizer step.
    void zero_grad();

  private:
    std::vector<std::pair<std::string, Tensor>> entries_;
};

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.0;  // decoupled
};

class Adam {
  public:
    Adam(ParameterSet& params, AdamConfig config);

    /// One update with learning rate config.lr * lr_scale. Parameters without a
    /// gradient buffer are skipped and keep their moments.
    void step(double lr_scale = 1.0);
    std::size_t steps() const { return t_; }

  private:
    ParameterSet* params_;
    AdamConfig config_;
    std::vector<std::vector<double>> m_, v_;
    std::size_t t_ = 0;
};

/// Linear warmup over `warmup` steps followed by linear decay to zero at
/// `total` steps. Returns a multiplier in [0, 1].
double warmup_linear_decay(std::size_t step, std::size_t warmup, std::size_t total);

// Initializers
Tensor uniform_tensor(Shape shape, double bound, std::mt19937_64& rng);
Tensor normal_tensor(Shape shape, double stddev, std::mt19937_64& rng);
/// Glorot-scaled normal for a [fan_in, fan_out] matrix.
Tensor glorot_tensor(std::size_t fan_in, std::size_t fan_out, std::mt19937_64& rng);
Tensor constant_tensor(Shape shape, double value);

}  // namespace mokge
