#include "mokge/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

namespace mokge {

namespace {

thread_local Tape* g_active_tape = nullptr;

using NodePtr = std::shared_ptr<detail::Node>;

std::size_t product(const Shape& shape) {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

bool tracking(std::initializer_list<const Tensor*> inputs) {
    if (g_active_tape == nullptr)
        return false;
    for (const Tensor* t : inputs)
        if (t->requires_grad())
            return true;
    return false;
}

Tensor make_result(Shape shape, std::vector<double> value, bool track) {
    auto node = std::make_shared<detail::Node>();
    node->shape = std::move(shape);
    node->value = std::move(value);
    node->requires_grad = track;
    return Tensor(std::move(node));
}

void attach(Tensor& out, std::function<void()> fn) {
    out.node()->backward = std::move(fn);
    g_active_tape->record(out.shared_node());
}

void require_2d(const Tensor& t, const char* op) {
    if (!t.defined())
        throw DimensionError(std::string(op) + ": undefined tensor");
    if (t.shape().size() != 2)
        throw DimensionError(std::string(op) + ": expected a 2-D tensor, got " +
                             shape_string(t.shape()));
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (a.shape() != b.shape())
        throw DimensionError(std::string(op) + ": shape mismatch " + shape_string(a.shape()) +
                             " vs " + shape_string(b.shape()));
}

// C[m,n] += A[m,k] B[k,n]
void gemm_nn(std::size_t m, std::size_t k, std::size_t n, const double* a, const double* b,
             double* c) {
    for (std::size_t i = 0; i < m; ++i) {
        double* crow = c + i * n;
        for (std::size_t p = 0; p < k; ++p) {
            const double av = a[i * k + p];
            if (av == 0.0)
                continue;
            const double* brow = b + p * n;
            for (std::size_t j = 0; j < n; ++j)
                crow[j] += av * brow[j];
        }
    }
}

// C[m,n] += A[m,k] B[n,k]^T
void gemm_nt(std::size_t m, std::size_t k, std::size_t n, const double* a, const double* b,
             double* c) {
    for (std::size_t i = 0; i < m; ++i) {
        const double* arow = a + i * k;
        for (std::size_t j = 0; j < n; ++j) {
            const double* brow = b + j * k;
            double acc = 0.0;
            for (std::size_t p = 0; p < k; ++p)
                acc += arow[p] * brow[p];
            c[i * n + j] += acc;
        }
    }
}

// C[m,n] += A[k,m]^T B[k,n]
void gemm_tn(std::size_t m, std::size_t k, std::size_t n, const double* a, const double* b,
             double* c) {
    for (std::size_t p = 0; p < k; ++p) {
        const double* arow = a + p * m;
        const double* brow = b + p * n;
        for (std::size_t i = 0; i < m; ++i) {
            const double av = arow[i];
            if (av == 0.0)
                continue;
            double* crow = c + i * n;
            for (std::size_t j = 0; j < n; ++j)
                crow[j] += av * brow[j];
        }
    }
}

template <typename Fn>
Tensor unary(const Tensor& a, Fn&& fn) {
    std::vector<double> out(a.numel());
    auto in = a.data();
    for (std::size_t i = 0; i < out.size(); ++i)
        out[i] = fn(in[i]);
    return make_result(a.shape(), std::move(out), tracking({&a}));
}

}  // namespace

std::string shape_string(const Shape& shape) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < shape.size(); ++i)
        os << (i ? "," : "") << shape[i];
    os << ']';
    return os.str();
}

// ----------------------------------------------------------------------------
// Tensor

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
    const std::size_t n = product(shape);
    return from_data(std::move(shape), std::vector<double>(n, 0.0), requires_grad);
}

Tensor Tensor::from_data(Shape shape, std::vector<double> data, bool requires_grad) {
    if (product(shape) != data.size())
        throw DimensionError("tensor data length " + std::to_string(data.size()) +
                             " does not match shape " + shape_string(shape));
    auto node = std::make_shared<detail::Node>();
    node->shape = std::move(shape);
    node->value = std::move(data);
    node->requires_grad = requires_grad;
    return Tensor(std::move(node));
}

Tensor Tensor::scalar(double value, bool requires_grad) {
    return from_data({1}, {value}, requires_grad);
}

const Shape& Tensor::shape() const { return node_->shape; }

std::size_t Tensor::dim(std::size_t axis) const {
    if (axis >= node_->shape.size())
        throw DimensionError("axis " + std::to_string(axis) + " out of range for shape " +
                             shape_string(node_->shape));
    return node_->shape[axis];
}

std::size_t Tensor::numel() const { return node_->value.size(); }
std::span<const double> Tensor::data() const { return node_->value; }
std::span<double> Tensor::mutable_data() { return node_->value; }

double Tensor::item() const {
    if (numel() != 1)
        throw DimensionError("item() on tensor of shape " + shape_string(shape()));
    return node_->value[0];
}

double Tensor::at(std::size_t row, std::size_t col) const {
    return node_->value[row * cols() + col];
}

bool Tensor::requires_grad() const { return node_ && node_->requires_grad; }
bool Tensor::has_grad() const { return node_ && !node_->grad.empty(); }
std::span<const double> Tensor::grad() const { return node_->grad; }
std::span<double> Tensor::mutable_grad() { return node_->ensure_grad(); }

void Tensor::zero_grad() {
    if (node_)
        std::fill(node_->grad.begin(), node_->grad.end(), 0.0);
}

void Tensor::clear_grad() {
    if (node_) {
        node_->grad.clear();
        node_->grad.shrink_to_fit();
    }
}

bool Tensor::all_finite() const {
    return std::all_of(node_->value.begin(), node_->value.end(),
                       [](double v) { return std::isfinite(v); });
}

Tensor Tensor::clone(bool requires_grad) const {
    return from_data(shape(), node_->value, requires_grad);
}

// ----------------------------------------------------------------------------
// Tape

Tape::Tape() : previous_(g_active_tape) { g_active_tape = this; }

Tape::~Tape() { g_active_tape = previous_; }

Tape* Tape::active() { return g_active_tape; }

NoGradGuard::NoGradGuard() : previous_(g_active_tape) { g_active_tape = nullptr; }

NoGradGuard::~NoGradGuard() { g_active_tape = previous_; }

void Tape::backward(const Tensor& loss) {
    if (consumed_)
        throw std::logic_error("backward called twice on the same tape without reset()");
    if (!loss.defined() || loss.numel() != 1)
        throw DimensionError("backward requires a scalar loss, got " +
                             (loss.defined() ? shape_string(loss.shape()) : std::string("undefined")));
    consumed_ = true;
    if (!loss.requires_grad())
        return;
    loss.node()->ensure_grad()[0] += 1.0;
    for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
        detail::Node& node = **it;
        if (node.backward && !node.grad.empty())
            node.backward();
    }
}

void Tape::reset() {
    nodes_.clear();
    consumed_ = false;
}

// ----------------------------------------------------------------------------
// Operations

Tensor matmul(const Tensor& a, const Tensor& b) {
    require_2d(a, "matmul");
    require_2d(b, "matmul");
    const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
    if (b.rows() != k)
        throw DimensionError("matmul: inner dimensions differ, " + shape_string(a.shape()) +
                             " x " + shape_string(b.shape()));
    std::vector<double> out(m * n, 0.0);
    gemm_nn(m, k, n, a.data().data(), b.data().data(), out.data());
    Tensor result = make_result({m, n}, std::move(out), tracking({&a, &b}));
    if (result.requires_grad()) {
        attach(result, [self = result.node(), pa = a.shared_node(), pb = b.shared_node(), m, k, n] {
            if (pa->requires_grad)
                gemm_nt(m, n, k, self->grad.data(), pb->value.data(), pa->ensure_grad().data());
            if (pb->requires_grad)
                gemm_tn(k, m, n, pa->value.data(), self->grad.data(), pb->ensure_grad().data());
        });
    }
    return result;
}

Tensor matmul_nt(const Tensor& a, const Tensor& b) {
    require_2d(a, "matmul_nt");
    require_2d(b, "matmul_nt");
    const std::size_t m = a.rows(), k = a.cols(), n = b.rows();
    if (b.cols() != k)
        throw DimensionError("matmul_nt: inner dimensions differ, " + shape_string(a.shape()) +
                             " x " + shape_string(b.shape()) + "^T");
    std::vector<double> out(m * n, 0.0);
    gemm_nt(m, k, n, a.data().data(), b.data().data(), out.data());
    Tensor result = make_result({m, n}, std::move(out), tracking({&a, &b}));
    if (result.requires_grad()) {
        attach(result, [self = result.node(), pa = a.shared_node(), pb = b.shared_node(), m, k, n] {
            if (pa->requires_grad)
                gemm_nn(m, n, k, self->grad.data(), pb->value.data(), pa->ensure_grad().data());
            if (pb->requires_grad)
                gemm_tn(n, m, k, self->grad.data(), pa->value.data(), pb->ensure_grad().data());
        });
    }
    return result;
}

namespace {

Tensor add_scaled(const Tensor& a, const Tensor& b, double sign, const char* op) {
    require_same_shape(a, b, op);
    std::vector<double> out(a.numel());
    auto da = a.data(), db = b.data();
    for (std::size_t i = 0; i < out.size(); ++i)
        out[i] = da[i] + sign * db[i];
    Tensor result = make_result(a.shape(), std::move(out), tracking({&a, &b}));
    if (result.requires_grad()) {
        attach(result, [self = result.node(), pa = a.shared_node(), pb = b.shared_node(), sign] {
            const auto& g = self->grad;
            if (pa->requires_grad) {
                auto& ga = pa->ensure_grad();
                for (std::size_t i = 0; i < g.size(); ++i)
                    ga[i] += g[i];
            }
            if (pb->requires_grad) {
                auto& gb = pb->ensure_grad();
                for (std::size_t i = 0; i < g.size(); ++i)
                    gb[i] += sign * g[i];
            }
        });
    }
    return result;
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) { return add_scaled(a, b, 1.0, "add"); }
Tensor sub(const Tensor& a, const Tensor& b) { return add_scaled(a, b, -1.0, "sub"); }

Tensor mul(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "mul");
    std::vector<double> out(a.numel());
    auto da = a.data(), db = b.data();
    for (std::size_t i = 0; i < out.size(); ++i)
        out[i] = da[i] * db[i];
    Tensor result = make_result(a.shape(), std::move(out), tracking({&a, &b}));
    if (result.requires_grad()) {
        attach(result, [self = result.node(), pa = a.shared_node(), pb = b.shared_node()] {
            const auto& g = self->grad;
            if (pa->requires_grad) {
                auto& ga = pa->ensure_grad();
                for (std::size_t i = 0; i < g.size(); ++i)
                    ga[i] += g[i] * pb->value[i];
            }
            if (pb->requires_grad) {
                auto& gb = pb->ensure_grad();
                for (std::size_t i = 0; i < g.size(); ++i)
                    gb[i] += g[i] * pa->value[i];
            }
        });
    }
    return result;
}

Tensor scale(const Tensor& a, double factor) {
    Tensor result = unary(a, [factor](double v) { return v * factor; });
    if (result.requires_grad()) {
        attach(result, [self = result.node(), pa = a.shared_node(), factor] {
            auto& ga = pa->ensure_grad();
            for (std::size_t i = 0; i < ga.size(); ++i)
                ga[i] += factor * self->grad[i];
        });
    }
    return result;
}

Tensor add_row(const Tensor& a, const Tensor& row) {
    require_2d(a, "add_row");
    const std::size_t m = a.rows(), n = a.cols();
    if (row.numel() != n)
        throw DimensionError("add_row: row " + shape_string(row.shape()) +
                             " does not match columns of " + shape_string(a.shape()));
    std::vector<double> out(a.data().begin(), a.data().end());
    auto r = row.data();
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j)
            out[i * n + j] += r[j];
    Tensor result = make_result(a.shape(), std::move(out), tracking({&a, &row}));
    if (result.requires_grad()) {
        attach(result, [self = result.node(), pa = a.shared_node(), pr = row.shared_node(), m, n] {
            const auto& g = self->grad;
            if (pa->requires_grad) {
                auto& ga = pa->ensure_grad();
                for (std::size_t i = 0; i < g.size(); ++i)
                    ga[i] += g[i];
            }
            if (pr->requires_grad) {
                auto& gr = pr->ensure_grad();
                for (std::size_t i = 0; i < m; ++i)
                    for (std::size_t j = 0; j < n; ++j)
                        gr[j] += g[i * n + j];
            }
        });
    }
    return result;
}

Tensor relu(const Tensor& a) {
    Tensor result = unary(a, [](double v) { return v > 0.0 ? v : 0.0; });
    if (result.requires_grad()) {
        attach(result, [self = result.node(), pa = a.shared_node()] {
            auto& ga = pa->ensure_grad();
            for (std::size_t i = 0; i < ga.size(); ++i)
                if (pa->value[i] > 0.0)
                    ga[i] += self->grad[i];
        });
    }
    return result;
}

Tensor sigmoid(const Tensor& a) {
    Tensor result = unary(a, [](double v) {
        if (v >= 0.0)
            return 1.0 / (1.0 + std::exp(-v));
        const double e = std::exp(v);
        return e / (1.0 + e);
    });
    if (result.requires_grad()) {
        attach(result, [self = result.node(), pa = a.shared_node()] {
            auto& ga = pa->ensure_grad();
            for (std::size_t i = 0; i < ga.size(); ++i) {
                const double s = self->value[i];
                ga[i] += self->grad[i] * s * (1.0 - s);
            }
        });
    }
    return result;
}

Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps) {
    require_2d(x, "layer_norm");
    const std::size_t m = x.rows(), n = x.cols();
    if (gain.numel() != n || bias.numel() != n)
        throw DimensionError("layer_norm: gain/bias " + shape_string(gain.shape()) + "/" +
                             shape_string(bias.shape()) + " vs input " + shape_string(x.shape()));
    std::vector<double> xhat(m * n), rstd(m), out(m * n);
    auto xv = x.data(), gv = gain.data(), bv = bias.data();
    for (std::size_t i = 0; i < m; ++i) {
        const double* row = xv.data() + i * n;
        double mean = 0.0;
        for (std::size_t j = 0; j < n; ++j)
            mean += row[j];
        mean /= static_cast<double>(n);
        double var = 0.0;
        for (std::size_t j = 0; j < n; ++j)
            var += (row[j] - mean) * (row[j] - mean);
        var /= static_cast<double>(n);
        rstd[i] = 1.0 / std::sqrt(var + eps);
        for (std::size_t j = 0; j < n; ++j) {
            xhat[i * n + j] = (row[j] - mean) * rstd[i];
            out[i * n + j] = xhat[i * n + j] * gv[j] + bv[j];
        }
    }
    Tensor result = make_result(x.shape(), std::move(out), tracking({&x, &gain, &bias}));
    if (result.requires_grad()) {
        attach(result, [self = result.node(), px = x.shared_node(), pg = gain.shared_node(),
                        pb = bias.shared_node(), xhat = std::move(xhat), rstd = std::move(rstd), m,
                        n] {
            const auto& g = self->grad;
            if (pg->requires_grad) {
                auto& gg = pg->ensure_grad();
                for (std::size_t i = 0; i < m; ++i)
                    for (std::size_t j = 0; j < n; ++j)
                        gg[j] += g[i * n + j] * xhat[i * n + j];
            }
            if (pb->requires_grad) {
                auto& gb = pb->ensure_grad();
                for (std::size_t i = 0; i < m; ++i)
                    for (std::size_t j = 0; j < n; ++j)
                        gb[j] += g[i * n + j];
            }
            if (px->requires_grad) {
                auto& gx = px->ensure_grad();
                const double inv_n = 1.0 / static_cast<double>(n);
                for (std::size_t i = 0; i < m; ++i) {
                    double sum_d = 0.0, sum_dx = 0.0;
                    for (std::size_t j = 0; j < n; ++j) {
                        const double d = g[i * n + j] * pg->value[j];
                        sum_d += d;
                        sum_dx += d * xhat[i * n + j];
                    }
                    for (std::size_t j = 0; j < n; ++j) {
                        const double d = g[i * n + j] * pg->value[j];
                        gx[i * n + j] +=
                            rstd[i] * (d - inv_n * sum_d - xhat[i * n + j] * inv_n * sum_dx);
                    }
                }
            }
        });
    }
    return result;
}

Tensor embedding_lookup(const Tensor& table, std::span<const std::size_t> ids) {
    require_2d(table, "embedding_lookup");
    const std::size_t v = table.rows(), d = table.cols();
    std::vector<double> out(ids.size() * d);
    auto tv = table.data();
    for (std::size_t i = 0; i < ids.size(); ++i) {
        if (ids[i] >= v)
            throw std::out_of_range("embedding_lookup: id " + std::to_string(ids[i]) +
                                    " out of range for table " + shape_string(table.shape()));
        std::copy_n(tv.begin() + static_cast<std::ptrdiff_t>(ids[i] * d), d,
                    out.begin() + static_cast<std::ptrdiff_t>(i * d));
    }
    Tensor result = make_result({ids.size(), d}, std::move(out), tracking({&table}));
    if (result.requires_grad()) {
        attach(result, [self = result.node(), pt = table.shared_node(),
                        idx = std::vector<std::size_t>(ids.begin(), ids.end()), d] {
            auto& gt = pt->ensure_grad();
            for (std::size_t i = 0; i < idx.size(); ++i)
                for (std::size_t j = 0; j < d; ++j)
                    gt[idx[i] * d + j] += self->grad[i * d + j];
        });
    }
    return result;
}

Tensor scatter_add_rows(const Tensor& src, std::span<const std::size_t> index,
                        std::span<const double> weight, std::size_t out_rows) {
    require_2d(src, "scatter_add_rows");
    const std::size_t e = src.rows(), d = src.cols();
    if (index.size() != e || weight.size() != e)
        throw DimensionError("scatter_add_rows: index/weight length must equal source rows " +
                             std::to_string(e));
    std::vector<double> out(out_rows * d, 0.0);
    auto sv = src.data();
    for (std::size_t i = 0; i < e; ++i) {
        if (index[i] >= out_rows)
            throw std::out_of_range("scatter_add_rows: target row " + std::to_string(index[i]) +
                                    " >= " + std::to_string(out_rows));
        for (std::size_t j = 0; j < d; ++j)
            out[index[i] * d + j] += weight[i] * sv[i * d + j];
    }
    Tensor result = make_result({out_rows, d}, std::move(out), tracking({&src}));
    if (result.requires_grad()) {
        attach(result, [self = result.node(), ps = src.shared_node(),
                        idx = std::vector<std::size_t>(index.begin(), index.end()),
                        w = std::vector<double>(weight.begin(), weight.end()), d] {
            auto& gs = ps->ensure_grad();
            for (std::size_t i = 0; i < idx.size(); ++i)
                for (std::size_t j = 0; j < d; ++j)
                    gs[i * d + j] += w[i] * self->grad[idx[i] * d + j];
        });
    }
    return result;
}

Tensor concat_rows(std::span<const Tensor> parts) {
    if (parts.empty())
        throw DimensionError("concat_rows: no inputs");
    const std::size_t d = parts.front().cols();
    std::size_t rows = 0;
    bool track = false;
    for (const Tensor& p : parts) {
        require_2d(p, "concat_rows");
        if (p.cols() != d)
            throw DimensionError("concat_rows: column mismatch " + shape_string(p.shape()) +
                                 " vs " + shape_string(parts.front().shape()));
        rows += p.rows();
        track = track || tracking({&p});
    }
    std::vector<double> out;
    out.reserve(rows * d);
    for (const Tensor& p : parts)
        out.insert(out.end(), p.data().begin(), p.data().end());
    Tensor result = make_result({rows, d}, std::move(out), track);
    if (result.requires_grad()) {
        std::vector<NodePtr> nodes;
        for (const Tensor& p : parts)
            nodes.push_back(p.shared_node());
        attach(result, [self = result.node(), nodes = std::move(nodes)] {
            std::size_t offset = 0;
            for (const auto& p : nodes) {
                const std::size_t len = p->value.size();
                if (p->requires_grad) {
                    auto& gp = p->ensure_grad();
                    for (std::size_t i = 0; i < len; ++i)
                        gp[i] += self->grad[offset + i];
                }
                offset += len;
            }
        });
    }
    return result;
}

Tensor concat_cols(std::span<const Tensor> parts) {
    if (parts.empty())
        throw DimensionError("concat_cols: no inputs");
    const std::size_t m = parts.front().rows();
    std::size_t cols = 0;
    bool track = false;
    for (const Tensor& p : parts) {
        require_2d(p, "concat_cols");
        if (p.rows() != m)
            throw DimensionError("concat_cols: row mismatch " + shape_string(p.shape()) + " vs " +
                                 shape_string(parts.front().shape()));
        cols += p.cols();
        track = track || tracking({&p});
    }
    std::vector<double> out(m * cols);
    std::size_t offset = 0;
    for (const Tensor& p : parts) {
        const std::size_t c = p.cols();
        auto pv = p.data();
        for (std::size_t i = 0; i < m; ++i)
            std::copy_n(pv.begin() + static_cast<std::ptrdiff_t>(i * c), c,
                        out.begin() + static_cast<std::ptrdiff_t>(i * cols + offset));
        offset += c;
    }
    Tensor result = make_result({m, cols}, std::move(out), track);
    if (result.requires_grad()) {
        std::vector<NodePtr> nodes;
        for (const Tensor& p : parts)
            nodes.push_back(p.shared_node());
        attach(result, [self = result.node(), nodes = std::move(nodes), m, cols] {
            std::size_t off = 0;
            for (const auto& p : nodes) {
                const std::size_t c = p->shape[1];
                if (p->requires_grad) {
                    auto& gp = p->ensure_grad();
                    for (std::size_t i = 0; i < m; ++i)
                        for (std::size_t j = 0; j < c; ++j)
                            gp[i * c + j] += self->grad[i * cols + off + j];
                }
                off += c;
            }
        });
    }
    return result;
}

Tensor slice_cols(const Tensor& a, std::size_t start, std::size_t count) {
    require_2d(a, "slice_cols");
    const std::size_t m = a.rows(), n = a.cols();
    if (start + count > n)
        throw DimensionError("slice_cols: columns [" + std::to_string(start) + "," +
                             std::to_string(start + count) + ") out of range for " +
                             shape_string(a.shape()));
    std::vector<double> out(m * count);
    auto av = a.data();
    for (std::size_t i = 0; i < m; ++i)
        std::copy_n(av.begin() + static_cast<std::ptrdiff_t>(i * n + start), count,
                    out.begin() + static_cast<std::ptrdiff_t>(i * count));
    Tensor result = make_result({m, count}, std::move(out), tracking({&a}));
    if (result.requires_grad()) {
        attach(result, [self = result.node(), pa = a.shared_node(), m, n, start, count] {
            auto& ga = pa->ensure_grad();
            for (std::size_t i = 0; i < m; ++i)
                for (std::size_t j = 0; j < count; ++j)
                    ga[i * n + start + j] += self->grad[i * count + j];
        });
    }
    return result;
}

Tensor softmax_rows(const Tensor& a, bool causal) {
    require_2d(a, "softmax_rows");
    const std::size_t m = a.rows(), n = a.cols();
    std::vector<double> out(m * n, 0.0);
    auto av = a.data();
    for (std::size_t i = 0; i < m; ++i) {
        const std::size_t width = causal ? std::min(n, i + 1) : n;
        const double* row = av.data() + i * n;
        const double mx = *std::max_element(row, row + width);
        double z = 0.0;
        for (std::size_t j = 0; j < width; ++j) {
            out[i * n + j] = std::exp(row[j] - mx);
            z += out[i * n + j];
        }
        for (std::size_t j = 0; j < width; ++j)
            out[i * n + j] /= z;
    }
    Tensor result = make_result(a.shape(), std::move(out), tracking({&a}));
    if (result.requires_grad()) {
        attach(result, [self = result.node(), pa = a.shared_node(), m, n] {
            auto& ga = pa->ensure_grad();
            const auto& y = self->value;
            const auto& g = self->grad;
            for (std::size_t i = 0; i < m; ++i) {
                double dot = 0.0;
                for (std::size_t j = 0; j < n; ++j)
                    dot += g[i * n + j] * y[i * n + j];
                for (std::size_t j = 0; j < n; ++j)
                    ga[i * n + j] += y[i * n + j] * (g[i * n + j] - dot);
            }
        });
    }
    return result;
}

Tensor mean_axis(const Tensor& a, std::size_t axis) {
    require_2d(a, "mean_axis");
    const std::size_t m = a.rows(), n = a.cols();
    if (axis > 1)
        throw DimensionError("mean_axis: axis must be 0 or 1");
    auto av = a.data();
    Shape shape = axis == 0 ? Shape{1, n} : Shape{m, 1};
    std::vector<double> out(axis == 0 ? n : m, 0.0);
    const double inv = 1.0 / static_cast<double>(axis == 0 ? m : n);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j)
            out[axis == 0 ? j : i] += av[i * n + j] * inv;
    Tensor result = make_result(std::move(shape), std::move(out), tracking({&a}));
    if (result.requires_grad()) {
        attach(result, [self = result.node(), pa = a.shared_node(), m, n, axis, inv] {
            auto& ga = pa->ensure_grad();
            for (std::size_t i = 0; i < m; ++i)
                for (std::size_t j = 0; j < n; ++j)
                    ga[i * n + j] += inv * self->grad[axis == 0 ? j : i];
        });
    }
    return result;
}

Tensor sum(const Tensor& a) {
    double total = 0.0;
    for (double v : a.data())
        total += v;
    Tensor result = make_result({1}, {total}, tracking({&a}));
    if (result.requires_grad()) {
        attach(result, [self = result.node(), pa = a.shared_node()] {
            auto& ga = pa->ensure_grad();
            for (double& g : ga)
                g += self->grad[0];
        });
    }
    return result;
}

Tensor softmax_cross_entropy(const Tensor& logits, std::span<const std::size_t> targets) {
    require_2d(logits, "softmax_cross_entropy");
    const std::size_t t = logits.rows(), v = logits.cols();
    if (targets.size() != t)
        throw DimensionError("softmax_cross_entropy: " + std::to_string(targets.size()) +
                             " targets for logits " + shape_string(logits.shape()));
    if (t == 0)
        throw DimensionError("softmax_cross_entropy: empty target sequence");
    std::vector<double> probs(t * v);
    double loss = 0.0;
    auto lv = logits.data();
    for (std::size_t i = 0; i < t; ++i) {
        if (targets[i] >= v)
            throw std::out_of_range("softmax_cross_entropy: target id " +
                                    std::to_string(targets[i]) + " >= vocabulary size " +
                                    std::to_string(v));
        const double* row = lv.data() + i * v;
        const double mx = *std::max_element(row, row + v);
        double z = 0.0;
        for (std::size_t j = 0; j < v; ++j)
            z += std::exp(row[j] - mx);
        const double lse = mx + std::log(z);
        for (std::size_t j = 0; j < v; ++j)
            probs[i * v + j] = std::exp(row[j] - lse);
        loss += lse - row[targets[i]];
    }
    loss /= static_cast<double>(t);
    Tensor result = make_result({1}, {loss}, tracking({&logits}));
    if (result.requires_grad()) {
        attach(result, [self = result.node(), pl = logits.shared_node(), probs = std::move(probs),
                        tg = std::vector<std::size_t>(targets.begin(), targets.end()), t, v] {
            auto& gl = pl->ensure_grad();
            const double g = self->grad[0] / static_cast<double>(t);
            for (std::size_t i = 0; i < t; ++i)
                for (std::size_t j = 0; j < v; ++j)
                    gl[i * v + j] += g * (probs[i * v + j] - (j == tg[i] ? 1.0 : 0.0));
        });
    }
    return result;
}

Tensor binary_cross_entropy(const Tensor& probs, std::span<const int> labels) {
    const std::size_t n = probs.numel();
    if (labels.size() != n)
        throw DimensionError("binary_cross_entropy: " + std::to_string(labels.size()) +
                             " labels for probabilities " + shape_string(probs.shape()));
    if (n == 0)
        return Tensor::scalar(0.0);
    double loss = 0.0;
    auto pv = probs.data();
    for (std::size_t i = 0; i < n; ++i) {
        const double p = std::clamp(pv[i], kProbClip, 1.0 - kProbClip);
        loss -= labels[i] ? std::log(p) : std::log(1.0 - p);
    }
    loss /= static_cast<double>(n);
    Tensor result = make_result({1}, {loss}, tracking({&probs}));
    if (result.requires_grad()) {
        attach(result, [self = result.node(), pp = probs.shared_node(),
                        lb = std::vector<int>(labels.begin(), labels.end()), n] {
            auto& gp = pp->ensure_grad();
            const double g = self->grad[0] / static_cast<double>(n);
            for (std::size_t i = 0; i < n; ++i) {
                const double p = pp->value[i];
                if (p < kProbClip || p > 1.0 - kProbClip)
                    continue;  // clamped: flat
                gp[i] += lb[i] ? -g / p : g / (1.0 - p);
            }
        });
    }
    return result;
}

std::vector<double> softmax(std::span<const double> logits) {
    std::vector<double> out(logits.size());
    if (logits.empty())
        return out;
    const double mx = *std::max_element(logits.begin(), logits.end());
    double z = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        out[i] = std::exp(logits[i] - mx);
        z += out[i];
    }
    for (double& p : out)
        p /= z;
    return out;
}

}  // namespace mokge
