#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <memory>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <vector>

#include "b2t/rng.hpp"

namespace b2t {

using Shape = std::vector<std::size_t>;

inline std::size_t shape_numel(const Shape& s) {
    std::size_t n = 1;
    for (auto d : s) n *= d;
    return n;
}

inline std::string shape_str(const Shape& s) {
    std::string out = "[";
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (i) out += "x";
        out += std::to_string(s[i]);
    }
    return out + "]";
}

// ---------------------------------------------------------------------------
// raw row-major matrix kernels; all accumulate into C
// ---------------------------------------------------------------------------

template <class T>
void mm_acc(T* __restrict c, const T* __restrict a, const T* __restrict b, std::size_t m,
            std::size_t k, std::size_t n) {
    // C[m x n] += A[m x k] * B[k x n]
    for (std::size_t i = 0; i < m; ++i) {
        T* __restrict crow = c + i * n;
        const T* arow = a + i * k;
        for (std::size_t kk = 0; kk < k; ++kk) {
            const T av = arow[kk];
            if (av == T(0)) continue;
            const T* __restrict brow = b + kk * n;
            for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

template <class T>
void mm_nt_acc(T* __restrict c, const T* __restrict a, const T* __restrict b, std::size_t m,
               std::size_t k, std::size_t n) {
    // C[m x n] += A[m x k] * B^T where B is [n x k]
    // eight explicit accumulators break the reduction dependency chain and
    // give the compiler a fixed association order to vectorize
    for (std::size_t i = 0; i < m; ++i) {
        const T* __restrict arow = a + i * k;
        T* __restrict crow = c + i * n;
        for (std::size_t j = 0; j < n; ++j) {
            const T* __restrict brow = b + j * k;
            T acc[8] = {T(0), T(0), T(0), T(0), T(0), T(0), T(0), T(0)};
            std::size_t kk = 0;
            for (; kk + 8 <= k; kk += 8)
                for (std::size_t u = 0; u < 8; ++u) acc[u] += arow[kk + u] * brow[kk + u];
            T total = ((acc[0] + acc[1]) + (acc[2] + acc[3])) + ((acc[4] + acc[5]) + (acc[6] + acc[7]));
            for (; kk < k; ++kk) total += arow[kk] * brow[kk];
            crow[j] += total;
        }
    }
}

template <class T>
void mm_tn_acc(T* __restrict c, const T* __restrict a, const T* __restrict b, std::size_t m,
               std::size_t k, std::size_t n) {
    // C[m x n] += A^T * B where A is [k x m], B is [k x n]
    for (std::size_t kk = 0; kk < k; ++kk) {
        const T* arow = a + kk * m;
        const T* __restrict brow = b + kk * n;
        for (std::size_t i = 0; i < m; ++i) {
            const T av = arow[i];
            if (av == T(0)) continue;
            T* __restrict crow = c + i * n;
            for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

// ---------------------------------------------------------------------------
// autograd node
// ---------------------------------------------------------------------------

template <class T>
struct TensorNode {
    Shape shape;
    std::vector<T> value;
    std::vector<T> grad;  // sized lazily; same length as value when present
    bool requires_grad = false;
    std::vector<std::shared_ptr<TensorNode<T>>> parents;
    std::function<void(TensorNode<T>&)> backprop;  // reads this->grad, accumulates into parents

    std::size_t numel() const { return value.size(); }

    void ensure_grad() {
        if (grad.size() != value.size()) grad.assign(value.size(), T(0));
    }
};

// Value-semantic handle onto a node of the computation graph.
template <class T>
class Tensor {
public:
    using Node = TensorNode<T>;

    Tensor() = default;
    explicit Tensor(std::shared_ptr<Node> n) : node_(std::move(n)) {}

    static Tensor zeros(Shape shape, bool requires_grad = false) {
        return filled(std::move(shape), T(0), requires_grad);
    }

    static Tensor filled(Shape shape, T v, bool requires_grad = false) {
        auto n = std::make_shared<Node>();
        n->value.assign(shape_numel(shape), v);
        n->shape = std::move(shape);
        n->requires_grad = requires_grad;
        return Tensor(n);
    }

    static Tensor from(Shape shape, std::vector<T> data, bool requires_grad = false) {
        if (data.size() != shape_numel(shape))
            throw std::invalid_argument("tensor data length " + std::to_string(data.size()) +
                                        " does not match shape " + shape_str(shape));
        auto n = std::make_shared<Node>();
        n->shape = std::move(shape);
        n->value = std::move(data);
        n->requires_grad = requires_grad;
        return Tensor(n);
    }

    static Tensor scalar(T v, bool requires_grad = false) { return from({1}, {v}, requires_grad); }

    // uniform(-1/sqrt(fan_in), +1/sqrt(fan_in))
    static Tensor fan_in_uniform(Shape shape, std::size_t fan_in, Rng& rng) {
        const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
        auto t = zeros(std::move(shape), true);
        for (auto& v : t.node_->value) v = static_cast<T>(rng.uniform(-bound, bound));
        return t;
    }

    bool defined() const { return node_ != nullptr; }
    const Shape& shape() const { return node_->shape; }
    std::size_t rank() const { return node_->shape.size(); }
    std::size_t numel() const { return node_->value.size(); }
    std::size_t rows() const { return node_->shape.size() == 2 ? node_->shape[0] : 1; }
    std::size_t cols() const { return node_->shape.back(); }

    std::vector<T>& value() { return node_->value; }
    const std::vector<T>& value() const { return node_->value; }
    std::vector<T>& grad() {
        node_->ensure_grad();
        return node_->grad;
    }

    T at(std::size_t r, std::size_t c) const { return node_->value[r * cols() + c]; }
    T& at(std::size_t r, std::size_t c) { return node_->value[r * cols() + c]; }
    T item() const { return node_->value[0]; }

    bool requires_grad() const { return node_->requires_grad; }
    void set_requires_grad(bool rg) {
        node_->requires_grad = rg;
        if (rg) node_->ensure_grad();
    }

    void zero_grad() {
        if (node_) node_->grad.assign(node_->value.size(), T(0));
    }

    std::shared_ptr<Node> node() const { return node_; }

    // Reverse-mode sweep from a scalar root.
    void backward() {
        if (numel() != 1)
            throw std::invalid_argument("backward requires a scalar root, got " + shape_str(shape()));
        // iterative post-order topological sort
        std::vector<Node*> order;
        std::unordered_set<Node*> seen;
        std::vector<std::pair<Node*, std::size_t>> stack;
        stack.emplace_back(node_.get(), 0);
        seen.insert(node_.get());
        while (!stack.empty()) {
            auto& [n, idx] = stack.back();
            if (idx < n->parents.size()) {
                Node* p = n->parents[idx].get();
                ++idx;
                if (p->requires_grad && seen.insert(p).second) stack.emplace_back(p, 0);
            } else {
                order.push_back(n);
                stack.pop_back();
            }
        }
        for (Node* n : order) n->ensure_grad();
        node_->grad[0] += T(1);
        for (auto it = order.rbegin(); it != order.rend(); ++it) {
            Node* n = *it;
            if (n->backprop) n->backprop(*n);
        }
    }

private:
    std::shared_ptr<Node> node_;
};

namespace detail {

inline thread_local bool grad_enabled = true;

template <class T>
std::shared_ptr<TensorNode<T>> make_node(Shape shape, std::vector<std::shared_ptr<TensorNode<T>>> parents) {
    auto n = std::make_shared<TensorNode<T>>();
    n->value.assign(shape_numel(shape), T(0));
    n->shape = std::move(shape);
    if (grad_enabled) {
        for (auto& p : parents)
            if (p->requires_grad) n->requires_grad = true;
        n->parents = std::move(parents);
    }
    return n;
}

}  // namespace detail

// Scoped switch that stops ops from recording the backward graph; used on
// inference paths. Thread-local, so concurrent evaluation stays safe.
class NoGradGuard {
public:
    NoGradGuard() : prev_(detail::grad_enabled) { detail::grad_enabled = false; }
    ~NoGradGuard() { detail::grad_enabled = prev_; }
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

private:
    bool prev_;
};

// ---------------------------------------------------------------------------
// matrix products
// ---------------------------------------------------------------------------

template <class T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
    if (a.rank() != 2 || b.rank() != 2 || a.shape()[1] != b.shape()[0])
        throw std::invalid_argument("matmul: incompatible shapes " + shape_str(a.shape()) + " vs " +
                                    shape_str(b.shape()));
    const std::size_t m = a.shape()[0], k = a.shape()[1], n = b.shape()[1];
    auto node = detail::make_node<T>({m, n}, {a.node(), b.node()});
    mm_acc(node->value.data(), a.value().data(), b.value().data(), m, k, n);
    if (node->requires_grad) {
        node->backprop = [m, k, n](TensorNode<T>& self) {
            auto& pa = *self.parents[0];
            auto& pb = *self.parents[1];
            if (pa.requires_grad) {
                pa.ensure_grad();  // dA += dC * B^T
                mm_nt_acc(pa.grad.data(), self.grad.data(), pb.value.data(), m, n, k);
            }
            if (pb.requires_grad) {
                pb.ensure_grad();  // dB += A^T * dC
                mm_tn_acc(pb.grad.data(), pa.value.data(), self.grad.data(), k, m, n);
            }
        };
    }
    return Tensor<T>(node);
}

// a * b^T with b given row-major [n x k]
template <class T>
Tensor<T> matmul_nt(const Tensor<T>& a, const Tensor<T>& b) {
    if (a.rank() != 2 || b.rank() != 2 || a.shape()[1] != b.shape()[1])
        throw std::invalid_argument("matmul_nt: incompatible shapes " + shape_str(a.shape()) + " vs " +
                                    shape_str(b.shape()));
    const std::size_t m = a.shape()[0], k = a.shape()[1], n = b.shape()[0];
    auto node = detail::make_node<T>({m, n}, {a.node(), b.node()});
    mm_nt_acc(node->value.data(), a.value().data(), b.value().data(), m, k, n);
    if (node->requires_grad) {
        node->backprop = [m, k, n](TensorNode<T>& self) {
            auto& pa = *self.parents[0];
            auto& pb = *self.parents[1];
            if (pa.requires_grad) {
                pa.ensure_grad();  // dA += dC * B
                mm_acc(pa.grad.data(), self.grad.data(), pb.value.data(), m, n, k);
            }
            if (pb.requires_grad) {
                pb.ensure_grad();  // dB += dC^T * A
                mm_tn_acc(pb.grad.data(), self.grad.data(), pa.value.data(), n, m, k);
            }
        };
    }
    return Tensor<T>(node);
}

// ---------------------------------------------------------------------------
// elementwise binary ops; shapes must match exactly, or one side is scalar
// ---------------------------------------------------------------------------

namespace detail {

enum class BinKind { Add, Sub, Mul };

template <class T>
Tensor<T> binary_op(const Tensor<T>& a, const Tensor<T>& b, BinKind kind, const char* name) {
    const bool a_scalar = a.numel() == 1, b_scalar = b.numel() == 1;
    if (!(a.shape() == b.shape() || a_scalar || b_scalar))
        throw std::invalid_argument(std::string(name) + ": incompatible shapes " + shape_str(a.shape()) +
                                    " vs " + shape_str(b.shape()));
    const Shape& out_shape = a_scalar ? b.shape() : a.shape();
    auto node = detail::make_node<T>(out_shape, {a.node(), b.node()});
    const std::size_t n = node->numel();
    const T* av = a.value().data();
    const T* bv = b.value().data();
    T* out = node->value.data();
    for (std::size_t i = 0; i < n; ++i) {
        const T x = a_scalar ? av[0] : av[i];
        const T y = b_scalar ? bv[0] : bv[i];
        out[i] = kind == BinKind::Add ? x + y : kind == BinKind::Sub ? x - y : x * y;
    }
    if (node->requires_grad) {
        node->backprop = [kind, a_scalar, b_scalar, n](TensorNode<T>& self) {
            auto& pa = *self.parents[0];
            auto& pb = *self.parents[1];
            const T* g = self.grad.data();
            if (pa.requires_grad) {
                pa.ensure_grad();
                for (std::size_t i = 0; i < n; ++i) {
                    T gi = g[i];
                    if (kind == BinKind::Mul) gi *= b_scalar ? pb.value[0] : pb.value[i];
                    pa.grad[a_scalar ? 0 : i] += gi;
                }
            }
            if (pb.requires_grad) {
                pb.ensure_grad();
                for (std::size_t i = 0; i < n; ++i) {
                    T gi = g[i];
                    if (kind == BinKind::Mul)
                        gi *= a_scalar ? pa.value[0] : pa.value[i];
                    else if (kind == BinKind::Sub)
                        gi = -gi;
                    pb.grad[b_scalar ? 0 : i] += gi;
                }
            }
        };
    }
    return Tensor<T>(node);
}

}  // namespace detail

template <class T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
    return detail::binary_op(a, b, detail::BinKind::Add, "add");
}
template <class T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
    return detail::binary_op(a, b, detail::BinKind::Sub, "sub");
}
template <class T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
    return detail::binary_op(a, b, detail::BinKind::Mul, "mul");
}

template <class T>
Tensor<T> scale(const Tensor<T>& a, T c) {
    auto node = detail::make_node<T>(a.shape(), {a.node()});
    const std::size_t n = node->numel();
    for (std::size_t i = 0; i < n; ++i) node->value[i] = a.value()[i] * c;
    if (node->requires_grad) {
        node->backprop = [c, n](TensorNode<T>& self) {
            auto& p = *self.parents[0];
            p.ensure_grad();
            for (std::size_t i = 0; i < n; ++i) p.grad[i] += self.grad[i] * c;
        };
    }
    return Tensor<T>(node);
}

// x [R x d] + row vector b [d]
template <class T>
Tensor<T> add_rowvec(const Tensor<T>& x, const Tensor<T>& b) {
    if (x.rank() != 2 || b.rank() != 1 || x.shape()[1] != b.shape()[0])
        throw std::invalid_argument("add_rowvec: incompatible shapes " + shape_str(x.shape()) + " vs " +
                                    shape_str(b.shape()));
    const std::size_t r = x.shape()[0], d = x.shape()[1];
    auto node = detail::make_node<T>(x.shape(), {x.node(), b.node()});
    for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < d; ++j) node->value[i * d + j] = x.value()[i * d + j] + b.value()[j];
    if (node->requires_grad) {
        node->backprop = [r, d](TensorNode<T>& self) {
            auto& px = *self.parents[0];
            auto& pb = *self.parents[1];
            if (px.requires_grad) {
                px.ensure_grad();
                for (std::size_t i = 0; i < r * d; ++i) px.grad[i] += self.grad[i];
            }
            if (pb.requires_grad) {
                pb.ensure_grad();
                for (std::size_t i = 0; i < r; ++i)
                    for (std::size_t j = 0; j < d; ++j) pb.grad[j] += self.grad[i * d + j];
            }
        };
    }
    return Tensor<T>(node);
}

// ---------------------------------------------------------------------------
// elementwise nonlinearities
// ---------------------------------------------------------------------------

namespace detail {

template <class T, class Fwd, class Bwd>
Tensor<T> unary_op(const Tensor<T>& a, Fwd fwd, Bwd bwd) {
    auto node = detail::make_node<T>(a.shape(), {a.node()});
    const std::size_t n = node->numel();
    for (std::size_t i = 0; i < n; ++i) node->value[i] = fwd(a.value()[i]);
    if (node->requires_grad) {
        node->backprop = [bwd, n](TensorNode<T>& self) {
            auto& p = *self.parents[0];
            p.ensure_grad();
            for (std::size_t i = 0; i < n; ++i)
                p.grad[i] += self.grad[i] * bwd(p.value[i], self.value[i]);
        };
    }
    return Tensor<T>(node);
}

}  // namespace detail

template <class T>
Tensor<T> tanh_op(const Tensor<T>& a) {
    return detail::unary_op(
        a, [](T x) { return std::tanh(x); }, [](T, T y) { return T(1) - y * y; });
}

template <class T>
Tensor<T> sigmoid_op(const Tensor<T>& a) {
    return detail::unary_op(
        a, [](T x) { return T(1) / (T(1) + std::exp(-x)); }, [](T, T y) { return y * (T(1) - y); });
}

// exact Gaussian-CDF form: gelu(x) = x * Phi(x)
template <class T>
Tensor<T> gelu_op(const Tensor<T>& a) {
    constexpr T inv_sqrt2 = T(0.70710678118654752440084436210485L);
    constexpr T inv_sqrt2pi = T(0.39894228040143267793994605993438L);
    return detail::unary_op(
        a,
        [=](T x) { return T(0.5) * x * (T(1) + std::erf(x * inv_sqrt2)); },
        [=](T x, T) {
            const T phi = T(0.5) * (T(1) + std::erf(x * inv_sqrt2));
            const T pdf = inv_sqrt2pi * std::exp(T(-0.5) * x * x);
            return phi + x * pdf;
        });
}

// ---------------------------------------------------------------------------
// softmax / log-softmax along an axis, stabilized by max subtraction
// ---------------------------------------------------------------------------

namespace detail {

// iterate a tensor as [outer, axis_len, inner]
struct AxisView {
    std::size_t outer, len, inner;
};

inline AxisView axis_view(const Shape& shape, std::size_t axis) {
    if (axis >= shape.size()) throw std::invalid_argument("softmax: axis out of range for " + shape_str(shape));
    AxisView v{1, shape[axis], 1};
    for (std::size_t i = 0; i < axis; ++i) v.outer *= shape[i];
    for (std::size_t i = axis + 1; i < shape.size(); ++i) v.inner *= shape[i];
    return v;
}

}  // namespace detail

template <class T>
Tensor<T> softmax(const Tensor<T>& a, std::size_t axis) {
    const auto v = detail::axis_view(a.shape(), axis);
    auto node = detail::make_node<T>(a.shape(), {a.node()});
    const T* in = a.value().data();
    T* out = node->value.data();
    for (std::size_t o = 0; o < v.outer; ++o)
        for (std::size_t s = 0; s < v.inner; ++s) {
            const std::size_t base = o * v.len * v.inner + s;
            T mx = in[base];
            for (std::size_t i = 1; i < v.len; ++i) mx = std::max(mx, in[base + i * v.inner]);
            T sum = T(0);
            for (std::size_t i = 0; i < v.len; ++i) {
                const T e = std::exp(in[base + i * v.inner] - mx);
                out[base + i * v.inner] = e;
                sum += e;
            }
            for (std::size_t i = 0; i < v.len; ++i) out[base + i * v.inner] /= sum;
        }
    if (node->requires_grad) {
        node->backprop = [v](TensorNode<T>& self) {
            auto& p = *self.parents[0];
            p.ensure_grad();
            for (std::size_t o = 0; o < v.outer; ++o)
                for (std::size_t s = 0; s < v.inner; ++s) {
                    const std::size_t base = o * v.len * v.inner + s;
                    T dot = T(0);
                    for (std::size_t i = 0; i < v.len; ++i) {
                        const std::size_t ix = base + i * v.inner;
                        dot += self.grad[ix] * self.value[ix];
                    }
                    for (std::size_t i = 0; i < v.len; ++i) {
                        const std::size_t ix = base + i * v.inner;
                        p.grad[ix] += self.value[ix] * (self.grad[ix] - dot);
                    }
                }
        };
    }
    return Tensor<T>(node);
}

template <class T>
Tensor<T> log_softmax(const Tensor<T>& a, std::size_t axis) {
    const auto v = detail::axis_view(a.shape(), axis);
    auto node = detail::make_node<T>(a.shape(), {a.node()});
    const T* in = a.value().data();
    T* out = node->value.data();
    for (std::size_t o = 0; o < v.outer; ++o)
        for (std::size_t s = 0; s < v.inner; ++s) {
            const std::size_t base = o * v.len * v.inner + s;
            T mx = in[base];
            for (std::size_t i = 1; i < v.len; ++i) mx = std::max(mx, in[base + i * v.inner]);
            T sum = T(0);
            for (std::size_t i = 0; i < v.len; ++i) sum += std::exp(in[base + i * v.inner] - mx);
            const T lse = mx + std::log(sum);
            for (std::size_t i = 0; i < v.len; ++i) out[base + i * v.inner] = in[base + i * v.inner] - lse;
        }
    if (node->requires_grad) {
        node->backprop = [v](TensorNode<T>& self) {
            auto& p = *self.parents[0];
            p.ensure_grad();
            for (std::size_t o = 0; o < v.outer; ++o)
                for (std::size_t s = 0; s < v.inner; ++s) {
                    const std::size_t base = o * v.len * v.inner + s;
                    T gsum = T(0);
                    for (std::size_t i = 0; i < v.len; ++i) gsum += self.grad[base + i * v.inner];
                    for (std::size_t i = 0; i < v.len; ++i) {
                        const std::size_t ix = base + i * v.inner;
                        p.grad[ix] += self.grad[ix] - std::exp(self.value[ix]) * gsum;
                    }
                }
        };
    }
    return Tensor<T>(node);
}

// ---------------------------------------------------------------------------
// layer norm over rows of x [R x d], affine gain/bias [d]
// ---------------------------------------------------------------------------

template <class T>
Tensor<T> layer_norm(const Tensor<T>& x, const Tensor<T>& gain, const Tensor<T>& bias, T eps = T(1e-5)) {
    if (x.rank() != 2 || gain.rank() != 1 || bias.rank() != 1 || gain.shape()[0] != x.shape()[1] ||
        bias.shape()[0] != x.shape()[1])
        throw std::invalid_argument("layer_norm: incompatible shapes " + shape_str(x.shape()) + ", " +
                                    shape_str(gain.shape()) + ", " + shape_str(bias.shape()));
    const std::size_t r = x.shape()[0], d = x.shape()[1];
    auto node = detail::make_node<T>(x.shape(), {x.node(), gain.node(), bias.node()});
    std::vector<T> xhat(r * d), inv_std(r);
    for (std::size_t i = 0; i < r; ++i) {
        const T* row = x.value().data() + i * d;
        T mean = T(0);
        for (std::size_t j = 0; j < d; ++j) mean += row[j];
        mean /= T(d);
        T var = T(0);
        for (std::size_t j = 0; j < d; ++j) {
            const T c = row[j] - mean;
            var += c * c;
        }
        var /= T(d);
        const T istd = T(1) / std::sqrt(var + eps);
        inv_std[i] = istd;
        for (std::size_t j = 0; j < d; ++j) {
            const T h = (row[j] - mean) * istd;
            xhat[i * d + j] = h;
            node->value[i * d + j] = h * gain.value()[j] + bias.value()[j];
        }
    }
    if (node->requires_grad) {
        node->backprop = [r, d, xhat = std::move(xhat), inv_std = std::move(inv_std)](TensorNode<T>& self) {
            auto& px = *self.parents[0];
            auto& pg = *self.parents[1];
            auto& pb = *self.parents[2];
            if (pg.requires_grad) pg.ensure_grad();
            if (pb.requires_grad) pb.ensure_grad();
            if (px.requires_grad) px.ensure_grad();
            for (std::size_t i = 0; i < r; ++i) {
                const T* g = self.grad.data() + i * d;
                const T* h = xhat.data() + i * d;
                if (pg.requires_grad || pb.requires_grad)
                    for (std::size_t j = 0; j < d; ++j) {
                        if (pg.requires_grad) pg.grad[j] += g[j] * h[j];
                        if (pb.requires_grad) pb.grad[j] += g[j];
                    }
                if (px.requires_grad) {
                    // dxhat = g * gain; dx = (dxhat - mean(dxhat) - xhat*mean(dxhat*xhat)) * inv_std
                    T s1 = T(0), s2 = T(0);
                    for (std::size_t j = 0; j < d; ++j) {
                        const T dh = g[j] * pg.value[j];
                        s1 += dh;
                        s2 += dh * h[j];
                    }
                    s1 /= T(d);
                    s2 /= T(d);
                    for (std::size_t j = 0; j < d; ++j) {
                        const T dh = g[j] * pg.value[j];
                        px.grad[i * d + j] += (dh - s1 - h[j] * s2) * inv_std[i];
                    }
                }
            }
        };
    }
    return Tensor<T>(node);
}

// ---------------------------------------------------------------------------
// slicing / stacking / reductions
// ---------------------------------------------------------------------------

template <class T>
Tensor<T> slice_rows(const Tensor<T>& x, std::size_t r0, std::size_t r1) {
    if (x.rank() != 2 || r1 > x.shape()[0] || r0 >= r1)
        throw std::invalid_argument("slice_rows: bad range on " + shape_str(x.shape()));
    const std::size_t d = x.shape()[1];
    auto node = detail::make_node<T>({r1 - r0, d}, {x.node()});
    std::copy(x.value().begin() + r0 * d, x.value().begin() + r1 * d, node->value.begin());
    if (node->requires_grad) {
        node->backprop = [r0, d](TensorNode<T>& self) {
            auto& p = *self.parents[0];
            p.ensure_grad();
            for (std::size_t i = 0; i < self.numel(); ++i) p.grad[r0 * d + i] += self.grad[i];
        };
    }
    return Tensor<T>(node);
}

template <class T>
Tensor<T> slice_cols(const Tensor<T>& x, std::size_t c0, std::size_t c1) {
    if (x.rank() != 2 || c1 > x.shape()[1] || c0 >= c1)
        throw std::invalid_argument("slice_cols: bad range on " + shape_str(x.shape()));
    const std::size_t r = x.shape()[0], d = x.shape()[1], w = c1 - c0;
    auto node = detail::make_node<T>({r, w}, {x.node()});
    for (std::size_t i = 0; i < r; ++i)
        std::copy(x.value().begin() + i * d + c0, x.value().begin() + i * d + c1,
                  node->value.begin() + i * w);
    if (node->requires_grad) {
        node->backprop = [r, d, c0, w](TensorNode<T>& self) {
            auto& p = *self.parents[0];
            p.ensure_grad();
            for (std::size_t i = 0; i < r; ++i)
                for (std::size_t j = 0; j < w; ++j) p.grad[i * d + c0 + j] += self.grad[i * w + j];
        };
    }
    return Tensor<T>(node);
}

template <class T>
Tensor<T> hstack(const std::vector<Tensor<T>>& parts) {
    if (parts.empty()) throw std::invalid_argument("hstack: empty input");
    const std::size_t r = parts[0].shape()[0];
    std::size_t total = 0;
    std::vector<std::shared_ptr<TensorNode<T>>> parents;
    for (const auto& p : parts) {
        if (p.rank() != 2 || p.shape()[0] != r)
            throw std::invalid_argument("hstack: incompatible shapes " + shape_str(parts[0].shape()) +
                                        " vs " + shape_str(p.shape()));
        total += p.shape()[1];
        parents.push_back(p.node());
    }
    auto node = detail::make_node<T>({r, total}, std::move(parents));
    std::size_t off = 0;
    for (const auto& p : parts) {
        const std::size_t w = p.shape()[1];
        for (std::size_t i = 0; i < r; ++i)
            std::copy(p.value().begin() + i * w, p.value().begin() + (i + 1) * w,
                      node->value.begin() + i * total + off);
        off += w;
    }
    if (node->requires_grad) {
        node->backprop = [r, total](TensorNode<T>& self) {
            std::size_t off = 0;
            for (auto& pp : self.parents) {
                const std::size_t w = pp->shape[1];
                if (pp->requires_grad) {
                    pp->ensure_grad();
                    for (std::size_t i = 0; i < r; ++i)
                        for (std::size_t j = 0; j < w; ++j)
                            pp->grad[i * w + j] += self.grad[i * total + off + j];
                }
                off += w;
            }
        };
    }
    return Tensor<T>(node);
}

template <class T>
Tensor<T> sum_all(const Tensor<T>& x) {
    auto node = detail::make_node<T>({1}, {x.node()});
    T s = T(0);
    for (T v : x.value()) s += v;
    node->value[0] = s;
    if (node->requires_grad) {
        node->backprop = [](TensorNode<T>& self) {
            auto& p = *self.parents[0];
            p.ensure_grad();
            for (auto& g : p.grad) g += self.grad[0];
        };
    }
    return Tensor<T>(node);
}

// Inverted dropout; identity when rate == 0 or not training.
template <class T>
Tensor<T> dropout(const Tensor<T>& x, double rate, Rng& rng, bool training) {
    if (!training || rate <= 0.0) return x;
    if (rate >= 1.0) throw std::invalid_argument("dropout: rate must be < 1");
    const T keep_scale = T(1.0 / (1.0 - rate));
    auto node = detail::make_node<T>(x.shape(), {x.node()});
    const std::size_t n = node->numel();
    std::vector<T> mask(n);
    for (std::size_t i = 0; i < n; ++i) {
        mask[i] = rng.uniform() < rate ? T(0) : keep_scale;
        node->value[i] = x.value()[i] * mask[i];
    }
    if (node->requires_grad) {
        node->backprop = [mask = std::move(mask), n](TensorNode<T>& self) {
            auto& p = *self.parents[0];
            p.ensure_grad();
            for (std::size_t i = 0; i < n; ++i) p.grad[i] += self.grad[i] * mask[i];
        };
    }
    return Tensor<T>(node);
}

using Tensor32 = Tensor<float>;
using Tensor64 = Tensor<double>;

}  // namespace b2t
