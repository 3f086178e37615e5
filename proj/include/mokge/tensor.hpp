#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace mokge {

using Shape = std::vector<std::size_t>;

std::string shape_string(const Shape& shape);

class DimensionError : public std::invalid_argument {
  public:
    using std::invalid_argument::invalid_argument;
};

namespace detail {

struct Node {
    Shape shape;
    std::vector<double> value;
    std::vector<double> grad;  // empty until something flows into it
    bool requires_grad = false;
    std::function<void()> backward;

    std::vector<double>& ensure_grad() {
        if (grad.empty())
            grad.assign(value.size(), 0.0);
        return grad;
    }
};

}  // namespace detail

/// Dense row-major tensor of f64 values. Copies share storage; use clone()
/// for an independent buffer.
class Tensor {
  public:
    Tensor() = default;

    static Tensor zeros(Shape shape, bool requires_grad = false);
    static Tensor from_data(Shape shape, std::vector<double> data, bool requires_grad = false);
    static Tensor scalar(double value, bool requires_grad = false);

    bool defined() const { return node_ != nullptr; }
    const Shape& shape() const;
    std::size_t dim(std::size_t axis) const;
    std::size_t rows() const { return dim(0); }
    std::size_t cols() const { return dim(1); }
    std::size_t numel() const;

    std::span<const double> data() const;
    std::span<double> mutable_data();
    double item() const;
    double at(std::size_t row, std::size_t col) const;

    bool requires_grad() const;
    bool has_grad() const;
    std::span<const double> grad() const;
    std::span<double> mutable_grad();
    void zero_grad();
    /// Drops the gradient buffer entirely.
    void clear_grad();

    /// False when any value is NaN or infinite.
    bool all_finite() const;

    Tensor clone(bool requires_grad = false) const;

    explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}
    detail::Node* node() const { return node_.get(); }
    const std::shared_ptr<detail::Node>& shared_node() const { return node_; }

  private:
    std::shared_ptr<detail::Node> node_;
};

/// Ordered record of differentiable operations. While a Tape is alive it is
/// the active tape of its thread; operations on tensors that require grad are
/// appended to it in execution order. Without an active tape, operations only
/// compute values.
class Tape {
  public:
    Tape();
    ~Tape();
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    static Tape* active();

    /// Seeds d(loss)/d(loss) = 1 and runs the recorded closures in reverse.
    void backward(const Tensor& loss);
    void reset();
    std::size_t size() const { return nodes_.size(); }

    void record(std::shared_ptr<detail::Node> node) { nodes_.push_back(std::move(node)); }

  private:
    std::vector<std::shared_ptr<detail::Node>> nodes_;
    bool consumed_ = false;
    Tape* previous_ = nullptr;
};

/// Suspends recording on the current thread for its lifetime.
class NoGradGuard {
  public:
    NoGradGuard();
    ~NoGradGuard();
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

  private:
    Tape* previous_;
};

// ---------------------------------------------------------------------------
// Differentiable operations. All shapes are 2-D unless noted; a scalar is [1].
// ---------------------------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b);
/// a[m,k] x b[n,k]^T -> [m,n]
Tensor matmul_nt(const Tensor& a, const Tensor& b);

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double factor);
/// Adds a [n] or [1,n] row to every row of a[m,n].
Tensor add_row(const Tensor& a, const Tensor& row);

Tensor relu(const Tensor& a);
Tensor sigmoid(const Tensor& a);
Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps = 1e-5);

/// Rows of table[V,d] selected by ids -> [ids.size(), d].
Tensor embedding_lookup(const Tensor& table, std::span<const std::size_t> ids);
/// out[index[i]] += weight[i] * src[i]; out has `out_rows` rows.
Tensor scatter_add_rows(const Tensor& src, std::span<const std::size_t> index,
                        std::span<const double> weight, std::size_t out_rows);

Tensor concat_rows(std::span<const Tensor> parts);
Tensor concat_cols(std::span<const Tensor> parts);
Tensor slice_cols(const Tensor& a, std::size_t start, std::size_t count);

/// Row-wise softmax. With `causal`, entry (i,j) for j>i is masked out.
Tensor softmax_rows(const Tensor& a, bool causal = false);
Tensor mean_axis(const Tensor& a, std::size_t axis);
Tensor sum(const Tensor& a);

/// Mean over rows of -log softmax(logits[t])[targets[t]].
Tensor softmax_cross_entropy(const Tensor& logits, std::span<const std::size_t> targets);

/// Mean binary cross-entropy of probabilities p[n,1] (clipped to
/// [1e-7, 1-1e-7]) against 0/1 labels. Zero for n = 0.
Tensor binary_cross_entropy(const Tensor& probs, std::span<const int> labels);

inline constexpr double kProbClip = 1e-7;

/// Plain (non-differentiable) row softmax of a vector, stable log-sum-exp.
std::vector<double> softmax(std::span<const double> logits);

}  // namespace mokge
