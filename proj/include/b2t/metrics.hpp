#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace b2t {

// Minimal insert/delete/substitute count with unit costs (two-row DP).
template <class Seq>
std::size_t levenshtein(const Seq& a, const Seq& b) {
    const std::size_t n = a.size(), m = b.size();
    if (n == 0) return m;
    if (m == 0) return n;
    std::vector<std::size_t> prev(m + 1), cur(m + 1);
    std::iota(prev.begin(), prev.end(), std::size_t{0});
    for (std::size_t i = 1; i <= n; ++i) {
        cur[0] = i;
        for (std::size_t j = 1; j <= m; ++j) {
            const std::size_t sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
            cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
        }
        std::swap(prev, cur);
    }
    return prev[m];
}

inline std::vector<std::string> split_words(const std::string& s) {
    std::vector<std::string> words;
    std::string cur;
    for (char c : s) {
        if (c == ' ') {
            if (!cur.empty()) words.push_back(std::move(cur));
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    if (!cur.empty()) words.push_back(std::move(cur));
    return words;
}

struct ErrorRates {
    double cer = 0.0;  // may exceed 1 (>= 100% reads as "no learning")
    double wer = 0.0;
};

struct EditCounts {
    std::size_t char_edits = 0, char_ref = 0;
    std::size_t word_edits = 0, word_ref = 0;

    EditCounts& operator+=(const EditCounts& o) {
        char_edits += o.char_edits;
        char_ref += o.char_ref;
        word_edits += o.word_edits;
        word_ref += o.word_ref;
        return *this;
    }

    ErrorRates rates() const {
        if (char_ref == 0 || word_ref == 0)
            throw std::invalid_argument("error_rates: empty reference");
        return {static_cast<double>(char_edits) / static_cast<double>(char_ref),
                static_cast<double>(word_edits) / static_cast<double>(word_ref)};
    }
};

inline EditCounts edit_counts(const std::string& ref, const std::string& hyp) {
    if (ref.empty()) throw std::invalid_argument("error_rates: empty reference");
    EditCounts c;
    c.char_edits = levenshtein(ref, hyp);
    c.char_ref = ref.size();
    const auto ref_words = split_words(ref);
    const auto hyp_words = split_words(hyp);
    c.word_edits = levenshtein(ref_words, hyp_words);
    c.word_ref = ref_words.size();
    return c;
}

inline ErrorRates error_rates(const std::string& ref, const std::string& hyp) {
    return edit_counts(ref, hyp).rates();
}

// Corpus-level rates pool edit counts and reference lengths across sentences.
inline ErrorRates corpus_error_rates(const std::vector<std::string>& refs,
                                     const std::vector<std::string>& hyps) {
    if (refs.size() != hyps.size())
        throw std::invalid_argument("corpus_error_rates: ref/hyp count mismatch");
    if (refs.empty()) throw std::invalid_argument("corpus_error_rates: empty corpus");
    EditCounts total;
    for (std::size_t i = 0; i < refs.size(); ++i) total += edit_counts(refs[i], hyps[i]);
    return total.rates();
}

// ---------------------------------------------------------------------------
// one-sided Wilcoxon signed-rank test (alternative: x < y)
// ---------------------------------------------------------------------------

struct WilcoxonResult {
    double w_plus = 0.0;  // rank sum of positive differences x - y
    double p = 1.0;
    std::size_t n = 0;  // pairs after dropping zero differences
    bool exact = false;
};

// Zero differences are dropped; ties share average ranks. Exact p for
// n <= 20 via subset-sum counting over doubled ranks (average ranks are
// half-integers, so doubling gives integers); normal approximation with tie
// and continuity correction above that.
inline WilcoxonResult wilcoxon_one_sided_less(const std::vector<double>& x,
                                              const std::vector<double>& y) {
    if (x.size() != y.size()) throw std::invalid_argument("wilcoxon: length mismatch");
    std::vector<double> diffs;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double d = x[i] - y[i];
        if (d != 0.0) diffs.push_back(d);
    }
    if (diffs.empty()) throw std::invalid_argument("wilcoxon: all differences zero, test undefined");
    const std::size_t n = diffs.size();
    if (n < 5) throw std::invalid_argument("wilcoxon: need at least 5 nonzero pairs, got " + std::to_string(n));

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return std::fabs(diffs[a]) < std::fabs(diffs[b]); });

    std::vector<double> rank(n, 0.0);
    std::vector<std::size_t> tie_sizes;
    for (std::size_t i = 0; i < n;) {
        std::size_t j = i;
        while (j < n && std::fabs(diffs[order[j]]) == std::fabs(diffs[order[i]])) ++j;
        const double avg = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
        for (std::size_t k = i; k < j; ++k) rank[order[k]] = avg;
        tie_sizes.push_back(j - i);
        i = j;
    }

    WilcoxonResult res;
    res.n = n;
    for (std::size_t i = 0; i < n; ++i)
        if (diffs[i] > 0.0) res.w_plus += rank[i];

    if (n <= 20) {
        // subset-sum distribution over doubled ranks; counts fit in uint64
        std::vector<std::int64_t> dr(n);
        std::int64_t max_sum = 0;
        for (std::size_t i = 0; i < n; ++i) {
            dr[i] = std::llround(2.0 * rank[i]);
            max_sum += dr[i];
        }
        std::vector<std::uint64_t> count(static_cast<std::size_t>(max_sum) + 1, 0);
        count[0] = 1;
        for (std::size_t i = 0; i < n; ++i)
            for (std::int64_t s = max_sum; s >= dr[i]; --s) count[s] += count[s - dr[i]];
        const std::int64_t w2 = std::llround(2.0 * res.w_plus);
        std::uint64_t le = 0;
        for (std::int64_t s = 0; s <= w2 && s <= max_sum; ++s) le += count[s];
        res.p = static_cast<double>(le) / std::pow(2.0, static_cast<double>(n));
        res.exact = true;
    } else {
        const double nd = static_cast<double>(n);
        const double mean = nd * (nd + 1.0) / 4.0;
        double tie_term = 0.0;
        for (std::size_t t : tie_sizes) {
            const double td = static_cast<double>(t);
            tie_term += td * td * td - td;
        }
        const double var = nd * (nd + 1.0) * (2.0 * nd + 1.0) / 24.0 - tie_term / 48.0;
        const double z = (res.w_plus - mean + 0.5) / std::sqrt(var);
        res.p = 0.5 * std::erfc(-z / std::sqrt(2.0));
        res.exact = false;
    }
    return res;
}

}  // namespace b2t
