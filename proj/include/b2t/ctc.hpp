#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "b2t/tensor.hpp"
#include "b2t/vocab.hpp"

namespace b2t {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

inline double log_add(double a, double b) {
    if (a == kNegInf) return b;
    if (b == kNegInf) return a;
    const double m = std::max(a, b);
    return m + std::log1p(std::exp(-std::fabs(a - b)));
}

class CtcInfeasibleError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct CtcLossResult {
    double loss = 0.0;
    std::vector<double> dlogits;  // [T x V], d(loss)/d(logits)
};

// CTC negative log likelihood with analytic gradient via the blank-augmented
// forward-backward lattice. All lattice arithmetic is in log space. The blank
// token is index 0. Throws CtcInfeasibleError when T < |target| + repeats.
template <class T>
CtcLossResult ctc_loss(const Tensor<T>& logits, const std::vector<int>& target) {
    if (logits.rank() != 2)
        throw std::invalid_argument("ctc_loss: logits must be [T x V], got " + shape_str(logits.shape()));
    const std::size_t steps = logits.shape()[0];
    const std::size_t vocab = logits.shape()[1];
    if (target.empty()) throw std::invalid_argument("ctc_loss: empty target");
    std::size_t repeats = 0;
    for (std::size_t i = 0; i < target.size(); ++i) {
        if (target[i] <= 0 || static_cast<std::size_t>(target[i]) >= vocab)
            throw std::invalid_argument("ctc_loss: target token " + std::to_string(target[i]) +
                                        " outside [1, " + std::to_string(vocab) + ")");
        if (i > 0 && target[i] == target[i - 1]) ++repeats;
    }
    if (steps < target.size() + repeats)
        throw CtcInfeasibleError("ctc_loss: T=" + std::to_string(steps) + " cannot emit target of length " +
                                 std::to_string(target.size()) + " with " + std::to_string(repeats) +
                                 " repeats");

    // augmented label sequence: blank-interleaved
    const std::size_t S = 2 * target.size() + 1;
    std::vector<int> aug(S, 0);
    for (std::size_t i = 0; i < target.size(); ++i) aug[2 * i + 1] = target[i];

    // per-frame log-softmax in double
    std::vector<double> lp(steps * vocab);
    for (std::size_t t = 0; t < steps; ++t) {
        const T* row = logits.value().data() + t * vocab;
        double mx = static_cast<double>(row[0]);
        for (std::size_t v = 1; v < vocab; ++v) mx = std::max(mx, static_cast<double>(row[v]));
        double sum = 0.0;
        for (std::size_t v = 0; v < vocab; ++v) sum += std::exp(static_cast<double>(row[v]) - mx);
        const double lse = mx + std::log(sum);
        for (std::size_t v = 0; v < vocab; ++v) lp[t * vocab + v] = static_cast<double>(row[v]) - lse;
    }

    auto allows_skip = [&](std::size_t s) { return aug[s] != 0 && aug[s] != aug[s - 2]; };

    std::vector<double> alpha(steps * S, kNegInf), beta(steps * S, kNegInf);
    alpha[0] = lp[aug[0]];
    if (S > 1) alpha[1] = lp[aug[1]];
    for (std::size_t t = 1; t < steps; ++t)
        for (std::size_t s = 0; s < S; ++s) {
            double a = alpha[(t - 1) * S + s];
            if (s >= 1) a = log_add(a, alpha[(t - 1) * S + s - 1]);
            if (s >= 2 && allows_skip(s)) a = log_add(a, alpha[(t - 1) * S + s - 2]);
            alpha[t * S + s] = a == kNegInf ? kNegInf : a + lp[t * vocab + aug[s]];
        }

    double log_p = alpha[(steps - 1) * S + S - 1];
    if (S > 1) log_p = log_add(log_p, alpha[(steps - 1) * S + S - 2]);

    beta[(steps - 1) * S + S - 1] = lp[(steps - 1) * vocab + aug[S - 1]];
    if (S > 1) beta[(steps - 1) * S + S - 2] = lp[(steps - 1) * vocab + aug[S - 2]];
    for (std::size_t t = steps - 1; t-- > 0;)
        for (std::size_t s = 0; s < S; ++s) {
            double b = beta[(t + 1) * S + s];
            if (s + 1 < S) b = log_add(b, beta[(t + 1) * S + s + 1]);
            if (s + 2 < S && allows_skip(s + 2)) b = log_add(b, beta[(t + 1) * S + s + 2]);
            beta[t * S + s] = b == kNegInf ? kNegInf : b + lp[t * vocab + aug[s]];
        }

    CtcLossResult res;
    res.loss = -log_p;
    res.dlogits.assign(steps * vocab, 0.0);
    // d(-log p)/d(logit[t][k]) = softmax[t][k] - sum_{s: aug[s]=k} exp(alpha+beta-lp-log_p)
    for (std::size_t t = 0; t < steps; ++t) {
        for (std::size_t v = 0; v < vocab; ++v)
            res.dlogits[t * vocab + v] = std::exp(lp[t * vocab + v]);
        for (std::size_t s = 0; s < S; ++s) {
            const double ab = alpha[t * S + s] + beta[t * S + s];
            if (ab == kNegInf) continue;
            res.dlogits[t * vocab + aug[s]] -= std::exp(ab - lp[t * vocab + aug[s]] - log_p);
        }
    }
    return res;
}

// Graph wrapper: scalar loss node whose backward feeds the analytic gradient
// into the logits.
template <class T>
Tensor<T> ctc_loss_op(const Tensor<T>& logits, const std::vector<int>& target) {
    CtcLossResult res = ctc_loss(logits, target);
    auto node = detail::make_node<T>({1}, {logits.node()});
    node->value[0] = static_cast<T>(res.loss);
    if (node->requires_grad) {
        node->backprop = [dl = std::move(res.dlogits)](TensorNode<T>& self) {
            auto& p = *self.parents[0];
            p.ensure_grad();
            const T g = self.grad[0];
            for (std::size_t i = 0; i < dl.size(); ++i) p.grad[i] += g * static_cast<T>(dl[i]);
        };
    }
    return Tensor<T>(node);
}

// ---------------------------------------------------------------------------
// greedy decoding
// ---------------------------------------------------------------------------

// Per-frame argmax (ties toward the lowest token index), collapse repeats,
// then drop blanks.
template <class T>
std::string greedy_decode(const Tensor<T>& logits, const Vocabulary& vocab) {
    const std::size_t steps = logits.rank() == 2 ? logits.shape()[0] : 0;
    const std::size_t v = logits.rank() == 2 ? logits.shape()[1] : 0;
    std::string out;
    int prev = -1;
    for (std::size_t t = 0; t < steps; ++t) {
        const T* row = logits.value().data() + t * v;
        std::size_t best = 0;
        for (std::size_t k = 1; k < v; ++k)
            if (row[k] > row[best]) best = k;
        if (static_cast<int>(best) != prev && best != Vocabulary::kBlankId)
            out.push_back(vocab.token(best));
        prev = static_cast<int>(best);
    }
    return out;
}

// ---------------------------------------------------------------------------
// character 3-gram LM with fixed-weight interpolation
// ---------------------------------------------------------------------------

class CharNGramLM {
public:
    static constexpr char kStart = '^';
    static constexpr char kEnd = '$';

    CharNGramLM() = default;

    // Interpolated ML estimates over 3/2/1-gram relative frequencies with
    // add-k smoothing at the unigram level. A lower order substitutes when a
    // context was never observed, so conditionals always sum to 1.
    static CharNGramLM fit(const std::vector<std::string>& corpus,
                           const std::string& alphabet = Vocabulary::default_alphabet()) {
        if (corpus.empty()) throw std::invalid_argument("fit_ngram: empty corpus");
        CharNGramLM lm;
        lm.alphabet_ = alphabet;
        for (const auto& sentence : corpus) {
            for (char c : sentence)
                if (alphabet.find(c) == std::string::npos)
                    throw std::invalid_argument(std::string("fit_ngram: character '") + c +
                                                "' outside the LM alphabet");
            const std::string padded = std::string(2, kStart) + sentence + kEnd;
            for (std::size_t i = 2; i < padded.size(); ++i) {
                lm.tri_[padded.substr(i - 2, 3)]++;
                lm.tri_ctx_[padded.substr(i - 2, 2)]++;
                lm.bi_[padded.substr(i - 1, 2)]++;
                lm.bi_ctx_[padded.substr(i - 1, 1)]++;
                lm.uni_[padded.substr(i, 1)]++;
                lm.total_++;
            }
        }
        return lm;
    }

    // Outcome space: alphabet plus the end marker.
    std::string outcomes() const { return alphabet_ + kEnd; }
    const std::string& alphabet() const { return alphabet_; }

    double prob(char c, char h2, char h1) const {
        const double vsz = static_cast<double>(alphabet_.size() + 1);
        const double p1 =
            (lookup(uni_, std::string(1, c)) + add_k_) / (static_cast<double>(total_) + add_k_ * vsz);
        const std::string ctx1(1, h1);
        double f2 = p1;
        if (auto n = lookup(bi_ctx_, ctx1); n > 0) f2 = lookup(bi_, ctx1 + c) / static_cast<double>(n);
        std::string ctx2{h2, h1};
        double f3 = f2;
        if (auto n = lookup(tri_ctx_, ctx2); n > 0) f3 = lookup(tri_, ctx2 + c) / static_cast<double>(n);
        return w3_ * f3 + w2_ * f2 + w1_ * p1;
    }

    double log_prob(char c, char h2, char h1) const { return std::log(prob(c, h2, h1)); }

    // log p of a whole string, optionally including the end-marker emission
    double sequence_log_prob(const std::string& s, bool include_end = false) const {
        const std::string padded = std::string(2, kStart) + s + (include_end ? std::string(1, kEnd) : "");
        double lp = 0.0;
        for (std::size_t i = 2; i < padded.size(); ++i) lp += log_prob(padded[i], padded[i - 2], padded[i - 1]);
        return lp;
    }

    double perplexity(const std::vector<std::string>& corpus, bool include_end = false) const {
        double lp = 0.0;
        std::size_t n = 0;
        for (const auto& s : corpus) {
            lp += sequence_log_prob(s, include_end);
            n += s.size() + (include_end ? 1 : 0);
        }
        return std::exp(-lp / static_cast<double>(n));
    }

    std::uint64_t total_events() const { return total_; }

    template <class Json>
    Json to_json() const {
        Json j;
        j["order"] = 3;
        j["weights"] = {w3_, w2_, w1_};
        j["add_k"] = add_k_;
        j["alphabet"] = alphabet_;
        j["trigrams"] = tri_;
        j["bigrams"] = bi_;
        j["unigrams"] = uni_;
        return j;
    }

    template <class Json>
    static CharNGramLM from_json(const Json& j) {
        CharNGramLM lm;
        lm.w3_ = j["weights"][0];
        lm.w2_ = j["weights"][1];
        lm.w1_ = j["weights"][2];
        lm.add_k_ = j["add_k"];
        lm.alphabet_ = j["alphabet"].template get<std::string>();
        lm.tri_ = j["trigrams"].template get<std::map<std::string, std::uint64_t>>();
        lm.bi_ = j["bigrams"].template get<std::map<std::string, std::uint64_t>>();
        lm.uni_ = j["unigrams"].template get<std::map<std::string, std::uint64_t>>();
        for (const auto& [k, v] : lm.tri_) lm.tri_ctx_[k.substr(0, 2)] += v;
        for (const auto& [k, v] : lm.bi_) lm.bi_ctx_[k.substr(0, 1)] += v;
        lm.total_ = 0;
        for (const auto& [k, v] : lm.uni_) lm.total_ += v;
        return lm;
    }

private:
    static std::uint64_t lookup(const std::map<std::string, std::uint64_t>& m, const std::string& k) {
        auto it = m.find(k);
        return it == m.end() ? 0 : it->second;
    }

    double w3_ = 0.7, w2_ = 0.2, w1_ = 0.1;
    double add_k_ = 0.01;
    std::string alphabet_;
    std::map<std::string, std::uint64_t> tri_, bi_, uni_;
    std::map<std::string, std::uint64_t> tri_ctx_, bi_ctx_;
    std::uint64_t total_ = 0;
};

inline CharNGramLM fit_ngram(const std::vector<std::string>& corpus,
                             const std::string& alphabet = Vocabulary::default_alphabet()) {
    return CharNGramLM::fit(corpus, alphabet);
}

// ---------------------------------------------------------------------------
// prefix beam search with optional LM shallow fusion
// ---------------------------------------------------------------------------

struct BeamParams {
    std::size_t width = 25;
    double lm_alpha = 0.5;
    double length_beta = 0.1;
};

// Prefix beam search over CTC logits. Blank and non-blank path masses are
// merged per prefix; candidate score is
//   log p_ctc(prefix) + alpha * log p_lm(prefix) + beta * |prefix|.
template <class T>
std::string beam_search_decode(const Tensor<T>& logits, const Vocabulary& vocab, const CharNGramLM* lm,
                               const BeamParams& params) {
    if (params.width < 1) throw std::invalid_argument("beam_search_decode: width must be >= 1");
    const std::size_t steps = logits.shape()[0];
    const std::size_t v = logits.shape()[1];

    std::vector<double> lp(steps * v);
    for (std::size_t t = 0; t < steps; ++t) {
        const T* row = logits.value().data() + t * v;
        double mx = static_cast<double>(row[0]);
        for (std::size_t k = 1; k < v; ++k) mx = std::max(mx, static_cast<double>(row[k]));
        double sum = 0.0;
        for (std::size_t k = 0; k < v; ++k) sum += std::exp(static_cast<double>(row[k]) - mx);
        const double lse = mx + std::log(sum);
        for (std::size_t k = 0; k < v; ++k) lp[t * v + k] = static_cast<double>(row[k]) - lse;
    }

    struct Entry {
        double lpb = kNegInf;   // log mass of paths ending in blank
        double lpnb = kNegInf;  // log mass of paths ending in the last char
        double lm = 0.0;        // accumulated LM log prob of the prefix
    };
    auto score = [&](const std::string& prefix, const Entry& e) {
        return log_add(e.lpb, e.lpnb) + params.lm_alpha * e.lm +
               params.length_beta * static_cast<double>(prefix.size());
    };
    auto lm_ext = [&](const std::string& prefix, char c) {
        if (!lm) return 0.0;
        const char h1 = prefix.empty() ? CharNGramLM::kStart : prefix.back();
        const char h2 = prefix.size() < 2 ? CharNGramLM::kStart : prefix[prefix.size() - 2];
        return lm->log_prob(c, h2, h1);
    };

    std::map<std::string, Entry> beams;
    beams[""] = Entry{0.0, kNegInf, 0.0};

    for (std::size_t t = 0; t < steps; ++t) {
        std::map<std::string, Entry> next;
        for (const auto& [prefix, e] : beams) {
            const double total = log_add(e.lpb, e.lpnb);
            {
                Entry& ne = next[prefix];
                ne.lm = e.lm;
                ne.lpb = log_add(ne.lpb, total + lp[t * v + Vocabulary::kBlankId]);
            }
            for (std::size_t k = 1; k < v; ++k) {
                const char c = vocab.token(k);
                const double lpc = lp[t * v + k];
                if (!prefix.empty() && prefix.back() == c) {
                    // same char continues the emission without growing the prefix
                    Entry& same = next[prefix];
                    same.lm = e.lm;
                    same.lpnb = log_add(same.lpnb, e.lpnb + lpc);
                    // a blank-separated repeat grows the prefix
                    const std::string grown = prefix + c;
                    Entry& ge = next[grown];
                    if (ge.lpb == kNegInf && ge.lpnb == kNegInf) ge.lm = e.lm + lm_ext(prefix, c);
                    ge.lpnb = log_add(ge.lpnb, e.lpb + lpc);
                } else {
                    const std::string grown = prefix + c;
                    Entry& ge = next[grown];
                    if (ge.lpb == kNegInf && ge.lpnb == kNegInf) ge.lm = e.lm + lm_ext(prefix, c);
                    ge.lpnb = log_add(ge.lpnb, total + lpc);
                }
            }
        }
        if (next.size() > params.width) {
            std::vector<std::pair<double, const std::string*>> ranked;
            ranked.reserve(next.size());
            for (const auto& [prefix, e] : next) ranked.emplace_back(score(prefix, e), &prefix);
            std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
                if (a.first != b.first) return a.first > b.first;
                return *a.second < *b.second;
            });
            std::map<std::string, Entry> pruned;
            for (std::size_t i = 0; i < params.width; ++i) pruned[*ranked[i].second] = next[*ranked[i].second];
            next = std::move(pruned);
        }
        beams = std::move(next);
    }

    std::string best;
    double best_score = kNegInf;
    for (const auto& [prefix, e] : beams) {
        const double s = score(prefix, e);
        if (s > best_score) {
            best_score = s;
            best = prefix;
        }
    }
    return best;
}

template <class T>
std::string beam_search_decode(const Tensor<T>& logits, const Vocabulary& vocab,
                               const BeamParams& params = {}) {
    return beam_search_decode(logits, vocab, nullptr, params);
}

}  // namespace b2t
