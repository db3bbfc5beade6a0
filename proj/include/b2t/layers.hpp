#pragma once

#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "b2t/rng.hpp"
#include "b2t/tensor.hpp"

namespace b2t {

template <class T>
using NamedParams = std::vector<std::pair<std::string, Tensor<T>>>;

// ---------------------------------------------------------------------------
// linear
// ---------------------------------------------------------------------------

template <class T>
struct Linear {
    Tensor<T> W;  // [out x in]
    Tensor<T> b;  // [out]

    Linear() = default;
    Linear(std::size_t in, std::size_t out, Rng& rng)
        : W(Tensor<T>::fan_in_uniform({out, in}, in, rng)), b(Tensor<T>::zeros({out}, true)) {}

    std::size_t in_dim() const { return W.shape()[1]; }
    std::size_t out_dim() const { return W.shape()[0]; }

    Tensor<T> forward(const Tensor<T>& x) const { return add_rowvec(matmul_nt(x, W), b); }

    void collect_params(const std::string& prefix, NamedParams<T>& out) const {
        out.emplace_back(prefix + ".W", W);
        out.emplace_back(prefix + ".b", b);
    }
};

// ---------------------------------------------------------------------------
// GRU, optionally bidirectional; BPTT backward is hand-rolled so one layer
// application is a single graph node
// ---------------------------------------------------------------------------

template <class T>
struct GruDirection {
    Tensor<T> w_r, w_z, w_h;  // [hidden x in]
    Tensor<T> u_r, u_z, u_h;  // [hidden x hidden]
    Tensor<T> b_r, b_z, b_h;  // [hidden]

    GruDirection() = default;
    GruDirection(std::size_t in, std::size_t hidden, Rng& rng)
        : w_r(Tensor<T>::fan_in_uniform({hidden, in}, in, rng)),
          w_z(Tensor<T>::fan_in_uniform({hidden, in}, in, rng)),
          w_h(Tensor<T>::fan_in_uniform({hidden, in}, in, rng)),
          u_r(Tensor<T>::fan_in_uniform({hidden, hidden}, hidden, rng)),
          u_z(Tensor<T>::fan_in_uniform({hidden, hidden}, hidden, rng)),
          u_h(Tensor<T>::fan_in_uniform({hidden, hidden}, hidden, rng)),
          b_r(Tensor<T>::zeros({hidden}, true)),
          b_z(Tensor<T>::zeros({hidden}, true)),
          b_h(Tensor<T>::zeros({hidden}, true)) {}

    void collect_params(const std::string& prefix, NamedParams<T>& out) const {
        out.emplace_back(prefix + ".w_r", w_r);
        out.emplace_back(prefix + ".w_z", w_z);
        out.emplace_back(prefix + ".w_h", w_h);
        out.emplace_back(prefix + ".u_r", u_r);
        out.emplace_back(prefix + ".u_z", u_z);
        out.emplace_back(prefix + ".u_h", u_h);
        out.emplace_back(prefix + ".b_r", b_r);
        out.emplace_back(prefix + ".b_z", b_z);
        out.emplace_back(prefix + ".b_h", b_h);
    }
};

template <class T>
struct GruLayer {
    std::size_t in = 0, hidden = 0;
    bool bidirectional = false;
    GruDirection<T> fwd;
    std::optional<GruDirection<T>> bwd;

    GruLayer() = default;
    GruLayer(std::size_t in_, std::size_t hidden_, bool bidir, Rng& rng)
        : in(in_), hidden(hidden_), bidirectional(bidir), fwd(in_, hidden_, rng) {
        if (bidir) bwd.emplace(in_, hidden_, rng);
    }

    std::size_t out_dim() const { return hidden * (bidirectional ? 2 : 1); }

    void collect_params(const std::string& prefix, NamedParams<T>& out) const {
        fwd.collect_params(prefix + ".fwd", out);
        if (bwd) bwd->collect_params(prefix + ".bwd", out);
    }
};

namespace detail {

template <class T>
struct GruDirCache {
    std::vector<T> r, z, hc, hs;  // each [T x hidden], indexed by scan slot
};

// y = sigmoid(v) in place
template <class T>
inline void sigmoid_inplace(T* v, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) v[i] = T(1) / (T(1) + std::exp(-v[i]));
}

}  // namespace detail

// r_t = sig(W_r x_t + U_r h_{t-1} + b_r)
// z_t = sig(W_z x_t + U_z h_{t-1} + b_z)
// hc_t = tanh(W_h x_t + U_h (r_t * h_{t-1}) + b_h)
// h_t = (1 - z_t) * h_{t-1} + z_t * hc_t
// Bidirectional runs a second pass over the reversed sequence (same h0) and
// concatenates its states feature-wise.
template <class T>
Tensor<T> gru_forward(const GruLayer<T>& layer, const Tensor<T>& x, const Tensor<T>& h0) {
    if (x.rank() != 2 || x.shape()[1] != layer.in)
        throw std::invalid_argument("gru_forward: input shape " + shape_str(x.shape()) +
                                    " does not match in=" + std::to_string(layer.in));
    const std::size_t steps = x.shape()[0];
    if (steps == 0) throw std::invalid_argument("gru_forward: empty sequence");
    const std::size_t h = layer.hidden;
    if (h0.numel() != h)
        throw std::invalid_argument("gru_forward: h0 shape " + shape_str(h0.shape()) +
                                    " does not match hidden=" + std::to_string(h));

    const std::size_t dirs = layer.bidirectional ? 2 : 1;
    std::vector<std::shared_ptr<TensorNode<T>>> parents{x.node(), h0.node()};
    auto push_dir = [&parents](const GruDirection<T>& d) {
        for (const Tensor<T>* p : {&d.w_r, &d.w_z, &d.w_h, &d.u_r, &d.u_z, &d.u_h, &d.b_r, &d.b_z, &d.b_h})
            parents.push_back(p->node());
    };
    push_dir(layer.fwd);
    if (layer.bidirectional) push_dir(*layer.bwd);

    auto node = detail::make_node<T>({steps, dirs * h}, std::move(parents));

    std::vector<detail::GruDirCache<T>> caches(dirs);
    const std::size_t in = layer.in;
    const T* xv = x.value().data();

    for (std::size_t d = 0; d < dirs; ++d) {
        const GruDirection<T>& dir = d == 0 ? layer.fwd : *layer.bwd;
        auto& cache = caches[d];
        cache.r.assign(steps * h, T(0));
        cache.z.assign(steps * h, T(0));
        cache.hc.assign(steps * h, T(0));
        cache.hs.assign(steps * h, T(0));

        // batched input projections: G_* = X * W_*^T + b_*
        std::vector<T> gr(steps * h, T(0)), gz(steps * h, T(0)), gh(steps * h, T(0));
        mm_nt_acc(gr.data(), xv, dir.w_r.value().data(), steps, in, h);
        mm_nt_acc(gz.data(), xv, dir.w_z.value().data(), steps, in, h);
        mm_nt_acc(gh.data(), xv, dir.w_h.value().data(), steps, in, h);

        std::vector<T> h_prev(h0.value().begin(), h0.value().end());
        std::vector<T> ar(h), az(h), ah(h), q(h);
        for (std::size_t i = 0; i < steps; ++i) {
            const std::size_t t = d == 0 ? i : steps - 1 - i;
            for (std::size_t j = 0; j < h; ++j) {
                ar[j] = gr[t * h + j] + dir.b_r.value()[j];
                az[j] = gz[t * h + j] + dir.b_z.value()[j];
            }
            mm_acc(ar.data(), dir.u_r.value().data(), h_prev.data(), h, h, 1);
            mm_acc(az.data(), dir.u_z.value().data(), h_prev.data(), h, h, 1);
            detail::sigmoid_inplace(ar.data(), h);
            detail::sigmoid_inplace(az.data(), h);
            for (std::size_t j = 0; j < h; ++j) {
                q[j] = ar[j] * h_prev[j];
                ah[j] = gh[t * h + j] + dir.b_h.value()[j];
            }
            mm_acc(ah.data(), dir.u_h.value().data(), q.data(), h, h, 1);
            T* slot_h = cache.hs.data() + i * h;
            for (std::size_t j = 0; j < h; ++j) {
                const T hcj = std::tanh(ah[j]);
                const T hj = (T(1) - az[j]) * h_prev[j] + az[j] * hcj;
                cache.r[i * h + j] = ar[j];
                cache.z[i * h + j] = az[j];
                cache.hc[i * h + j] = hcj;
                slot_h[j] = hj;
                node->value[t * dirs * h + d * h + j] = hj;
            }
            h_prev.assign(slot_h, slot_h + h);
        }
    }

    if (node->requires_grad) {
        node->backprop = [steps, h, in, dirs, caches = std::move(caches)](TensorNode<T>& self) {
            auto& px = *self.parents[0];
            auto& ph0 = *self.parents[1];
            const T* xv = px.value.data();
            if (px.requires_grad) px.ensure_grad();
            if (ph0.requires_grad) ph0.ensure_grad();

            for (std::size_t d = 0; d < dirs; ++d) {
                const std::size_t pbase = 2 + d * 9;
                auto& w_r = *self.parents[pbase + 0];
                auto& w_z = *self.parents[pbase + 1];
                auto& w_h = *self.parents[pbase + 2];
                auto& u_r = *self.parents[pbase + 3];
                auto& u_z = *self.parents[pbase + 4];
                auto& u_h = *self.parents[pbase + 5];
                auto& b_r = *self.parents[pbase + 6];
                auto& b_z = *self.parents[pbase + 7];
                auto& b_h = *self.parents[pbase + 8];
                for (auto* p : {&w_r, &w_z, &w_h, &u_r, &u_z, &u_h, &b_r, &b_z, &b_h}) p->ensure_grad();

                const auto& cache = caches[d];
                // da_* and h_prev rows indexed by time so the weight grads batch
                std::vector<T> A_r(steps * h, T(0)), A_z(steps * h, T(0)), A_h(steps * h, T(0));
                std::vector<T> Hp(steps * h, T(0));
                std::vector<T> carry(h, T(0)), dh(h), dq(h), tmp(h);

                for (std::size_t ii = steps; ii-- > 0;) {
                    const std::size_t t = d == 0 ? ii : steps - 1 - ii;
                    const T* h_prev = ii == 0 ? ph0.value.data() : cache.hs.data() + (ii - 1) * h;
                    const T* r = cache.r.data() + ii * h;
                    const T* z = cache.z.data() + ii * h;
                    const T* hc = cache.hc.data() + ii * h;
                    T* da_r = A_r.data() + t * h;
                    T* da_z = A_z.data() + t * h;
                    T* da_h = A_h.data() + t * h;
                    std::copy(h_prev, h_prev + h, Hp.data() + t * h);

                    for (std::size_t j = 0; j < h; ++j)
                        dh[j] = self.grad[t * dirs * h + d * h + j] + carry[j];

                    for (std::size_t j = 0; j < h; ++j) {
                        const T dz = dh[j] * (hc[j] - h_prev[j]);
                        const T dhc = dh[j] * z[j];
                        da_h[j] = dhc * (T(1) - hc[j] * hc[j]);
                        da_z[j] = dz * z[j] * (T(1) - z[j]);
                        carry[j] = dh[j] * (T(1) - z[j]);  // dh_prev so far
                    }
                    // dq = U_h^T da_h; q = r * h_prev
                    std::fill(dq.begin(), dq.end(), T(0));
                    mm_tn_acc(dq.data(), u_h.value.data(), da_h, h, h, 1);
                    for (std::size_t j = 0; j < h; ++j) {
                        const T dr = dq[j] * h_prev[j];
                        carry[j] += dq[j] * r[j];
                        da_r[j] = dr * r[j] * (T(1) - r[j]);
                    }
                    std::fill(tmp.begin(), tmp.end(), T(0));
                    mm_tn_acc(tmp.data(), u_r.value.data(), da_r, h, h, 1);
                    mm_tn_acc(tmp.data(), u_z.value.data(), da_z, h, h, 1);
                    for (std::size_t j = 0; j < h; ++j) carry[j] += tmp[j];

                    for (std::size_t j = 0; j < h; ++j) {
                        b_r.grad[j] += da_r[j];
                        b_z.grad[j] += da_z[j];
                        b_h.grad[j] += da_h[j];
                    }
                }
                if (ph0.requires_grad)
                    for (std::size_t j = 0; j < h; ++j) ph0.grad[j] += carry[j];

                // dW_* += A_*^T X ; dU_* += A_*^T Hp ; recurrent input for hc is r*h_prev
                std::vector<T> Qp(steps * h);
                for (std::size_t i = 0; i < steps * h; ++i) Qp[i] = T(0);
                for (std::size_t ii = 0; ii < steps; ++ii) {
                    const std::size_t t = d == 0 ? ii : steps - 1 - ii;
                    const T* h_prev = Hp.data() + t * h;
                    const T* r = cache.r.data() + ii * h;
                    for (std::size_t j = 0; j < h; ++j) Qp[t * h + j] = r[j] * h_prev[j];
                }
                mm_tn_acc(w_r.grad.data(), A_r.data(), xv, h, steps, in);
                mm_tn_acc(w_z.grad.data(), A_z.data(), xv, h, steps, in);
                mm_tn_acc(w_h.grad.data(), A_h.data(), xv, h, steps, in);
                mm_tn_acc(u_r.grad.data(), A_r.data(), Hp.data(), h, steps, h);
                mm_tn_acc(u_z.grad.data(), A_z.data(), Hp.data(), h, steps, h);
                mm_tn_acc(u_h.grad.data(), A_h.data(), Qp.data(), h, steps, h);
                if (px.requires_grad) {
                    mm_acc(px.grad.data(), A_r.data(), w_r.value.data(), steps, h, in);
                    mm_acc(px.grad.data(), A_z.data(), w_z.value.data(), steps, h, in);
                    mm_acc(px.grad.data(), A_h.data(), w_h.value.data(), steps, h, in);
                }
            }
        };
    }
    return Tensor<T>(node);
}

template <class T>
Tensor<T> gru_forward(const GruLayer<T>& layer, const Tensor<T>& x) {
    return gru_forward(layer, x, Tensor<T>::zeros({layer.hidden}));
}

// ---------------------------------------------------------------------------
// multi-head self-attention and transformer encoder block (pre-norm)
// ---------------------------------------------------------------------------

template <class T>
struct MultiHeadSelfAttention {
    std::size_t width = 0, heads = 0;
    Linear<T> q, k, v, o;

    MultiHeadSelfAttention() = default;
    MultiHeadSelfAttention(std::size_t width_, std::size_t heads_, Rng& rng)
        : width(width_),
          heads(heads_),
          q(width_, width_, rng),
          k(width_, width_, rng),
          v(width_, width_, rng),
          o(width_, width_, rng) {
        if (width_ % heads_ != 0)
            throw std::invalid_argument("attention width " + std::to_string(width_) +
                                        " not divisible by heads " + std::to_string(heads_));
    }

    // valid_rows: frames >= valid_rows are padding; they receive -1e30 pre-softmax
    // as attention keys so unmasked outputs do not depend on them.
    Tensor<T> forward(const Tensor<T>& x, std::size_t valid_rows) const {
        if (x.rank() != 2 || x.shape()[1] != width)
            throw std::invalid_argument("attention: input " + shape_str(x.shape()) +
                                        " does not match width " + std::to_string(width));
        const std::size_t steps = x.shape()[0];
        const std::size_t dh = width / heads;
        const T scl = T(1) / std::sqrt(static_cast<T>(dh));

        Tensor<T> Q = q.forward(x), K = k.forward(x), V = v.forward(x);

        Tensor<T> mask_bias;
        if (valid_rows < steps) {
            mask_bias = Tensor<T>::zeros({steps, steps});
            for (std::size_t i = 0; i < steps; ++i)
                for (std::size_t j = valid_rows; j < steps; ++j) mask_bias.at(i, j) = T(-1e30);
        }

        std::vector<Tensor<T>> head_out;
        head_out.reserve(heads);
        for (std::size_t hd = 0; hd < heads; ++hd) {
            Tensor<T> qi = slice_cols(Q, hd * dh, (hd + 1) * dh);
            Tensor<T> ki = slice_cols(K, hd * dh, (hd + 1) * dh);
            Tensor<T> vi = slice_cols(V, hd * dh, (hd + 1) * dh);
            Tensor<T> scores = scale(matmul_nt(qi, ki), scl);
            if (mask_bias.defined()) scores = add(scores, mask_bias);
            Tensor<T> attn = softmax(scores, 1);
            head_out.push_back(matmul(attn, vi));
        }
        return o.forward(hstack(head_out));
    }

    Tensor<T> forward(const Tensor<T>& x) const { return forward(x, x.shape()[0]); }

    void collect_params(const std::string& prefix, NamedParams<T>& out) const {
        q.collect_params(prefix + ".q", out);
        k.collect_params(prefix + ".k", out);
        v.collect_params(prefix + ".v", out);
        o.collect_params(prefix + ".o", out);
    }
};

template <class T>
struct TransformerBlock {
    std::size_t width = 0;
    MultiHeadSelfAttention<T> attn;
    Linear<T> ff1, ff2;
    Tensor<T> ln1_g, ln1_b, ln2_g, ln2_b;
    double dropout_rate = 0.0;

    TransformerBlock() = default;
    TransformerBlock(std::size_t width_, std::size_t heads, std::size_t ff_width, double drop, Rng& rng)
        : width(width_),
          attn(width_, heads, rng),
          ff1(width_, ff_width, rng),
          ff2(ff_width, width_, rng),
          ln1_g(Tensor<T>::filled({width_}, T(1), true)),
          ln1_b(Tensor<T>::zeros({width_}, true)),
          ln2_g(Tensor<T>::filled({width_}, T(1), true)),
          ln2_b(Tensor<T>::zeros({width_}, true)),
          dropout_rate(drop) {}

    Tensor<T> forward(const Tensor<T>& x, std::size_t valid_rows, Rng* drop_rng = nullptr) const {
        const bool training = drop_rng != nullptr;
        Tensor<T> a = attn.forward(layer_norm(x, ln1_g, ln1_b), valid_rows);
        if (training) a = dropout(a, dropout_rate, *drop_rng, true);
        Tensor<T> mid = add(x, a);
        Tensor<T> f = ff2.forward(gelu_op(ff1.forward(layer_norm(mid, ln2_g, ln2_b))));
        if (training) f = dropout(f, dropout_rate, *drop_rng, true);
        return add(mid, f);
    }

    Tensor<T> forward(const Tensor<T>& x) const { return forward(x, x.shape()[0]); }

    void collect_params(const std::string& prefix, NamedParams<T>& out) const {
        attn.collect_params(prefix + ".attn", out);
        ff1.collect_params(prefix + ".ff1", out);
        ff2.collect_params(prefix + ".ff2", out);
        out.emplace_back(prefix + ".ln1_g", ln1_g);
        out.emplace_back(prefix + ".ln1_b", ln1_b);
        out.emplace_back(prefix + ".ln2_g", ln2_g);
        out.emplace_back(prefix + ".ln2_b", ln2_b);
    }
};

// Learned absolute positional table.
template <class T>
struct PositionalEncoding {
    Tensor<T> table;  // [max_len x width]

    PositionalEncoding() = default;
    PositionalEncoding(std::size_t max_len, std::size_t width, Rng& rng)
        : table(Tensor<T>::fan_in_uniform({max_len, width}, width, rng)) {}

    Tensor<T> forward(const Tensor<T>& x) const {
        const std::size_t steps = x.shape()[0];
        if (steps > table.shape()[0])
            throw std::invalid_argument("positional encoding: sequence length " + std::to_string(steps) +
                                        " exceeds max_len " + std::to_string(table.shape()[0]));
        return add(x, slice_rows(table, 0, steps));
    }

    void collect_params(const std::string& prefix, NamedParams<T>& out) const {
        out.emplace_back(prefix + ".table", table);
    }
};

// Ordered composition of layers; layer errors are rethrown with the index attached.
template <class T>
struct Stack {
    std::vector<std::function<Tensor<T>(const Tensor<T>&)>> layers;

    Tensor<T> forward(const Tensor<T>& x) const {
        Tensor<T> cur = x;
        for (std::size_t i = 0; i < layers.size(); ++i) {
            try {
                cur = layers[i](cur);
            } catch (const std::exception& e) {
                throw std::runtime_error("stack layer " + std::to_string(i) + ": " + e.what());
            }
        }
        return cur;
    }
};

}  // namespace b2t
