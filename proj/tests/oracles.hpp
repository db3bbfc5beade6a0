#pragma once

// Independent reference implementations used to check the library. These are
// deliberately written as direct transcriptions of the definitions (full path
// enumeration, full DP matrices, sign-mask enumeration) rather than sharing
// any code with the implementations under test.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <string>
#include <vector>

#include "b2t/tensor.hpp"

namespace oracle {

// collapse a CTC path: merge consecutive duplicates, then remove blanks (0)
inline std::vector<int> collapse_path(const std::vector<int>& path) {
    std::vector<int> out;
    int prev = -1;
    for (int v : path) {
        if (v != prev && v != 0) out.push_back(v);
        prev = v;
    }
    return out;
}

// probability of every labeling by enumerating all V^T paths
inline std::map<std::vector<int>, double> ctc_all_labelings(const b2t::Tensor<double>& logits) {
    const std::size_t steps = logits.shape()[0];
    const std::size_t v = logits.shape()[1];
    std::vector<std::vector<double>> probs(steps, std::vector<double>(v));
    for (std::size_t t = 0; t < steps; ++t) {
        double mx = logits.at(t, 0);
        for (std::size_t k = 1; k < v; ++k) mx = std::max(mx, logits.at(t, k));
        double sum = 0.0;
        for (std::size_t k = 0; k < v; ++k) sum += std::exp(logits.at(t, k) - mx);
        for (std::size_t k = 0; k < v; ++k) probs[t][k] = std::exp(logits.at(t, k) - mx) / sum;
    }

    std::map<std::vector<int>, double> out;
    std::vector<int> path(steps, 0);
    const std::size_t total = static_cast<std::size_t>(std::pow(static_cast<double>(v), static_cast<double>(steps)) + 0.5);
    for (std::size_t idx = 0; idx < total; ++idx) {
        std::size_t rem = idx;
        double p = 1.0;
        for (std::size_t t = 0; t < steps; ++t) {
            path[t] = static_cast<int>(rem % v);
            rem /= v;
            p *= probs[t][static_cast<std::size_t>(path[t])];
        }
        out[collapse_path(path)] += p;
    }
    return out;
}

// -log p(target) by direct enumeration
inline double ctc_loss_brute(const b2t::Tensor<double>& logits, const std::vector<int>& target) {
    auto all = ctc_all_labelings(logits);
    auto it = all.find(target);
    return -std::log(it == all.end() ? 0.0 : it->second);
}

// labeling with the highest total probability
inline std::vector<int> max_marginal_labeling(const b2t::Tensor<double>& logits) {
    auto all = ctc_all_labelings(logits);
    std::vector<int> best;
    double best_p = -1.0;
    for (const auto& [label, p] : all)
        if (p > best_p) {
            best_p = p;
            best = label;
        }
    return best;
}

// full-matrix edit distance, quadratic memory
template <class Seq>
std::size_t levenshtein_full(const Seq& a, const Seq& b) {
    const std::size_t n = a.size(), m = b.size();
    std::vector<std::vector<std::size_t>> dp(n + 1, std::vector<std::size_t>(m + 1, 0));
    for (std::size_t i = 0; i <= n; ++i) dp[i][0] = i;
    for (std::size_t j = 0; j <= m; ++j) dp[0][j] = j;
    for (std::size_t i = 1; i <= n; ++i)
        for (std::size_t j = 1; j <= m; ++j) {
            const std::size_t sub = dp[i - 1][j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
            dp[i][j] = std::min({dp[i - 1][j] + 1, dp[i][j - 1] + 1, sub});
        }
    return dp[n][m];
}

// exact one-sided (x < y) Wilcoxon p by enumerating all 2^n sign assignments
inline double wilcoxon_enum_p(const std::vector<double>& x, const std::vector<double>& y) {
    std::vector<double> d;
    for (std::size_t i = 0; i < x.size(); ++i)
        if (x[i] != y[i]) d.push_back(x[i] - y[i]);
    const std::size_t n = d.size();

    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::sort(idx.begin(), idx.end(),
              [&](std::size_t a, std::size_t b) { return std::fabs(d[a]) < std::fabs(d[b]); });
    std::vector<double> rank(n);
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j < n && std::fabs(d[idx[j]]) == std::fabs(d[idx[i]])) ++j;
        const double avg = 0.5 * static_cast<double>(i + 1 + j);
        for (std::size_t k = i; k < j; ++k) rank[idx[k]] = avg;
        i = j;
    }

    double w_obs = 0.0;
    for (std::size_t k = 0; k < n; ++k)
        if (d[k] > 0.0) w_obs += rank[k];

    std::uint64_t le = 0;
    const std::uint64_t total = std::uint64_t{1} << n;
    for (std::uint64_t mask = 0; mask < total; ++mask) {
        double w = 0.0;
        for (std::size_t k = 0; k < n; ++k)
            if (mask & (std::uint64_t{1} << k)) w += rank[k];
        if (w <= w_obs + 1e-12) ++le;
    }
    return static_cast<double>(le) / static_cast<double>(total);
}

}  // namespace oracle
