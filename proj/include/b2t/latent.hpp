#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "b2t/dataset.hpp"
#include "b2t/model.hpp"
#include "b2t/rng.hpp"

namespace b2t {

struct LatentSet {
    std::size_t dim = 0;
    std::vector<double> points;  // [n x dim]
    std::vector<char> labels;    // 'A' or 'B' per point
    std::string stage;           // "pre" or "post"

    std::size_t size() const { return labels.size(); }
};

struct LatentPair {
    LatentSet pre, post;
};

namespace detail {

inline void append_pooled(LatentSet& set, const std::vector<float>& frames, std::size_t steps,
                          std::size_t dim, char label) {
    std::vector<double> pooled(dim, 0.0);
    for (std::size_t t = 0; t < steps; ++t)
        for (std::size_t c = 0; c < dim; ++c) pooled[c] += frames[t * dim + c];
    for (auto& v : pooled) v /= static_cast<double>(steps);
    set.points.insert(set.points.end(), pooled.begin(), pooled.end());
    set.labels.push_back(label);
}

template <class T>
void append_pooled(LatentSet& set, const Tensor<T>& frames, char label) {
    std::vector<float> vals(frames.value().begin(), frames.value().end());
    append_pooled(set, vals, frames.shape()[0], frames.shape()[1], label);
}

}  // namespace detail

// Sentence-mean latent vectors for both modalities at both stages. Defined
// only for a frozen-trunk decoder: in the other regimes the trunk has moved
// away from the pretrained one and the two paths no longer share it.
// Items are matched across modalities by (day, block, sentence).
template <class T>
LatentPair extract_latents(const BrainDecoder<T>& model, const std::string& model_regime,
                           const PretrainModel<T>& pretrained, const Dataset& data_b,
                           const Dataset& data_a, Partition part) {
    if (model_regime != "frozen")
        throw std::invalid_argument("extract_latents: defined only for frozen-trunk models, got regime '" +
                                    model_regime + "'");
    const auto items_b = data_b.partition(part);
    std::map<std::tuple<int, int, int>, const DatasetItem*> by_key;
    for (const auto* it : data_a.partition(part))
        by_key[{it->day_id, it->block_id, it->sentence_id}] = it;

    LatentPair out;
    out.pre.stage = "pre";
    out.post.stage = "post";
    out.pre.dim = out.post.dim = model.cfg.trunk.width;

    NoGradGuard ng;
    for (const auto* b : items_b) {
        auto it = by_key.find({b->day_id, b->block_id, b->sentence_id});
        if (it == by_key.end())
            throw std::invalid_argument("extract_latents: no modality-A pair for day " +
                                        std::to_string(b->day_id));
        const DatasetItem* a = it->second;
        if (b->features.frames == 0 || a->features.frames == 0)
            throw std::invalid_argument("extract_latents: zero-length sentence");

        auto day = model.day_layers.find(b->day_id);
        if (day == model.day_layers.end())
            throw std::invalid_argument("extract_latents: unknown day id " + std::to_string(b->day_id));
        Tensor<T> pre_b = model.bfe.forward(day->second.forward(to_tensor<T>(b->features)));
        Tensor<T> post_b = model.trunk.forward(pre_b);
        detail::append_pooled(out.pre, pre_b, 'B');
        detail::append_pooled(out.post, post_b, 'B');

        Tensor<T> pre_a = pretrained.frontend.forward(to_tensor<T>(a->features));
        Tensor<T> post_a = pretrained.trunk.forward(pre_a);
        detail::append_pooled(out.pre, pre_a, 'A');
        detail::append_pooled(out.post, post_a, 'A');
    }
    return out;
}

// ---------------------------------------------------------------------------
// exact t-SNE (O(n^2)) with perplexity binary search
// ---------------------------------------------------------------------------

struct TsneResult {
    std::vector<double> embedding;  // [n x 2]
    std::vector<double> kl_trace;   // KL against the unexaggerated P, per iteration
};

namespace detail {

// binary-search the Gaussian precision so the conditional entropy matches
// log(perplexity); returns the row p_{j|i}
inline void tsne_row_affinities(const std::vector<double>& sqd, std::size_t n, std::size_t i,
                                double target_entropy, std::vector<double>& row) {
    double beta = 1.0, beta_min = 0.0, beta_max = std::numeric_limits<double>::infinity();
    for (int iter = 0; iter < 200; ++iter) {
        double sum = 0.0, wsum = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            if (j == i) {
                row[j] = 0.0;
                continue;
            }
            const double w = std::exp(-beta * sqd[i * n + j]);
            row[j] = w;
            sum += w;
            wsum += w * sqd[i * n + j];
        }
        // H = log(sum) + beta * E[d]
        const double entropy = std::log(sum) + beta * wsum / sum;
        const double diff = entropy - target_entropy;
        if (std::fabs(diff) < 1e-6) break;
        if (diff > 0) {  // entropy too high: sharpen
            beta_min = beta;
            beta = std::isinf(beta_max) ? beta * 2.0 : (beta + beta_max) / 2.0;
        } else {
            beta_max = beta;
            beta = (beta + beta_min) / 2.0;
        }
    }
    double sum = 0.0;
    for (std::size_t j = 0; j < n; ++j) sum += row[j];
    for (std::size_t j = 0; j < n; ++j) row[j] /= sum;
}

}  // namespace detail

inline TsneResult tsne(const std::vector<double>& points, std::size_t n, std::size_t d,
                       double perplexity = 15.0, int iters = 500, std::uint64_t seed = 0) {
    if (points.size() != n * d) throw std::invalid_argument("tsne: point buffer size mismatch");
    if (static_cast<double>(n) < 3.0 * perplexity)
        throw std::invalid_argument("tsne: need n >= 3*perplexity, got n=" + std::to_string(n));

    std::vector<double> sqd(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) {
            double s = 0.0;
            for (std::size_t c = 0; c < d; ++c) {
                const double diff = points[i * d + c] - points[j * d + c];
                s += diff * diff;
            }
            sqd[i * n + j] = sqd[j * n + i] = s;
        }

    // symmetrized affinities
    std::vector<double> p(n * n, 0.0), row(n);
    const double target_entropy = std::log(perplexity);
    for (std::size_t i = 0; i < n; ++i) {
        detail::tsne_row_affinities(sqd, n, i, target_entropy, row);
        for (std::size_t j = 0; j < n; ++j) p[i * n + j] = row[j];
    }
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) {
            const double v = (p[i * n + j] + p[j * n + i]) / (2.0 * static_cast<double>(n));
            p[i * n + j] = p[j * n + i] = std::max(v, 1e-12);
        }

    constexpr int kExaggerationIters = 100;
    constexpr double kExaggeration = 4.0;
    constexpr int kMomentumSwitch = 250;
    constexpr double kEta = 200.0;

    Rng rng(mix_seed(seed, "tsne"));
    std::vector<double> y(n * 2), dy(n * 2, 0.0), uy(n * 2, 0.0), gains(n * 2, 1.0);
    for (auto& v : y) v = rng.normal() * 1e-4;

    TsneResult res;
    std::vector<double> w(n * n, 0.0);
    for (int iter = 0; iter < iters; ++iter) {
        // student-t weights and normalization
        double wsum = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = i + 1; j < n; ++j) {
                const double d0 = y[i * 2] - y[j * 2];
                const double d1 = y[i * 2 + 1] - y[j * 2 + 1];
                const double wij = 1.0 / (1.0 + d0 * d0 + d1 * d1);
                w[i * n + j] = w[j * n + i] = wij;
                wsum += 2.0 * wij;
            }

        const double exag = iter < kExaggerationIters ? kExaggeration : 1.0;
        std::fill(dy.begin(), dy.end(), 0.0);
        double kl = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) {
                if (i == j) continue;
                const double pij = p[i * n + j];
                const double qij = std::max(w[i * n + j] / wsum, 1e-12);
                const double mult = (exag * pij - qij) * w[i * n + j];
                dy[i * 2] += 4.0 * mult * (y[i * 2] - y[j * 2]);
                dy[i * 2 + 1] += 4.0 * mult * (y[i * 2 + 1] - y[j * 2 + 1]);
                if (j > i) kl += 2.0 * pij * std::log(pij / qij);
            }
        res.kl_trace.push_back(kl);

        const double momentum = iter < kMomentumSwitch ? 0.5 : 0.8;
        for (std::size_t k = 0; k < n * 2; ++k) {
            gains[k] = (dy[k] > 0.0) != (uy[k] > 0.0) ? gains[k] + 0.2 : gains[k] * 0.8;
            gains[k] = std::max(gains[k], 0.01);
            uy[k] = momentum * uy[k] - kEta * gains[k] * dy[k];
            y[k] += uy[k];
        }
        double m0 = 0.0, m1 = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            m0 += y[i * 2];
            m1 += y[i * 2 + 1];
        }
        m0 /= static_cast<double>(n);
        m1 /= static_cast<double>(n);
        for (std::size_t i = 0; i < n; ++i) {
            y[i * 2] -= m0;
            y[i * 2 + 1] -= m1;
        }
    }
    res.embedding = std::move(y);
    return res;
}

// ---------------------------------------------------------------------------
// cross-modal separability: 2-fold CV accuracy of a ridge classifier
// ---------------------------------------------------------------------------

namespace detail {

// solve (A + lambda I) x = b via Cholesky; A symmetric positive semidefinite
inline std::vector<double> ridge_solve(std::vector<double> a, std::vector<double> b, std::size_t d,
                                       double lambda) {
    for (std::size_t i = 0; i < d; ++i) a[i * d + i] += lambda;
    // in-place Cholesky a = L L^T
    for (std::size_t i = 0; i < d; ++i) {
        for (std::size_t j = 0; j <= i; ++j) {
            double s = a[i * d + j];
            for (std::size_t k = 0; k < j; ++k) s -= a[i * d + k] * a[j * d + k];
            if (i == j)
                a[i * d + i] = std::sqrt(std::max(s, 1e-30));
            else
                a[i * d + j] = s / a[j * d + j];
        }
    }
    // forward then backward substitution
    for (std::size_t i = 0; i < d; ++i) {
        double s = b[i];
        for (std::size_t k = 0; k < i; ++k) s -= a[i * d + k] * b[k];
        b[i] = s / a[i * d + i];
    }
    for (std::size_t i = d; i-- > 0;) {
        double s = b[i];
        for (std::size_t k = i + 1; k < d; ++k) s -= a[k * d + i] * b[k];
        b[i] = s / a[i * d + i];
    }
    return b;
}

}  // namespace detail

// 0.5 ~ modalities indistinguishable, 1.0 ~ fully separated. Ridge regression
// on centered features with +-1 targets, so the score is exactly invariant to
// global rotations of the point cloud.
inline double separability(const LatentSet& latents, std::uint64_t seed = 0, double lambda = 1e-2) {
    const std::size_t n = latents.size(), d = latents.dim;
    bool has_a = false, has_b = false;
    for (char l : latents.labels) (l == 'A' ? has_a : has_b) = true;
    if (!has_a || !has_b)
        throw std::invalid_argument("separability: need both modality labels present");
    if (n < 4) throw std::invalid_argument("separability: too few points");

    // rotation-invariant scale normalization
    double rms = 0.0;
    for (double v : latents.points) rms += v * v;
    rms = std::sqrt(rms / static_cast<double>(n));
    const double inv_scale = rms > 0 ? 1.0 / rms : 1.0;

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(mix_seed(seed, "separability"));
    rng.shuffle(order);

    double correct = 0.0;
    for (int fold = 0; fold < 2; ++fold) {
        std::vector<std::size_t> train, test;
        for (std::size_t i = 0; i < n; ++i)
            (static_cast<int>(i % 2) == fold ? train : test).push_back(order[i]);

        std::vector<double> mean(d, 0.0);
        for (auto i : train)
            for (std::size_t c = 0; c < d; ++c) mean[c] += latents.points[i * d + c] * inv_scale;
        for (auto& v : mean) v /= static_cast<double>(train.size());

        std::vector<double> gram(d * d, 0.0), rhs(d, 0.0), x(d);
        double ymean = 0.0;
        for (auto i : train) ymean += latents.labels[i] == 'A' ? 1.0 : -1.0;
        ymean /= static_cast<double>(train.size());
        for (auto i : train) {
            for (std::size_t c = 0; c < d; ++c)
                x[c] = latents.points[i * d + c] * inv_scale - mean[c];
            const double yc = (latents.labels[i] == 'A' ? 1.0 : -1.0) - ymean;
            for (std::size_t r = 0; r < d; ++r) {
                rhs[r] += x[r] * yc;
                for (std::size_t c = r; c < d; ++c) gram[r * d + c] += x[r] * x[c];
            }
        }
        for (std::size_t r = 0; r < d; ++r)
            for (std::size_t c = 0; c < r; ++c) gram[r * d + c] = gram[c * d + r];

        const std::vector<double> weights = detail::ridge_solve(std::move(gram), std::move(rhs), d, lambda);
        for (auto i : test) {
            double score = ymean;
            for (std::size_t c = 0; c < d; ++c)
                score += weights[c] * (latents.points[i * d + c] * inv_scale - mean[c]);
            const char pred = score >= 0.0 ? 'A' : 'B';
            if (pred == latents.labels[i]) correct += 1.0;
        }
    }
    return correct / static_cast<double>(n);
}

}  // namespace b2t
