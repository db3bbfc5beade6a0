#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <map>

#include <json.hpp>

#include "b2t/ctc.hpp"
#include "b2t/gradcheck.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace b2t;
using Catch::Approx;
using nlohmann::json;

TEST_CASE("ctc single-frame uniform case") {
    auto logits = Tensor64::zeros({1, 2});
    auto res = ctc_loss(logits, {1});
    CHECK(res.loss == Approx(-std::log(0.5)).margin(1e-12));
}

TEST_CASE("ctc two-frame uniform case sums the three paths") {
    auto logits = Tensor64::zeros({2, 2});
    auto res = ctc_loss(logits, {1});
    // paths aa, a-, -a each have probability 1/4
    CHECK(res.loss == Approx(-std::log(0.75)).margin(1e-12));
}

TEST_CASE("ctc repeat target needs a separating blank") {
    auto logits = Tensor64::zeros({3, 2});
    auto res = ctc_loss(logits, {1, 1});
    CHECK(res.loss == Approx(oracle::ctc_loss_brute(logits, {1, 1})).margin(1e-10));
    // T=2 cannot emit "aa"
    CHECK_THROWS_AS(ctc_loss(Tensor64::zeros({2, 2}), {1, 1}), CtcInfeasibleError);
}

TEST_CASE("ctc matches brute-force enumeration on random instances") {
    Rng rng(42);
    int cases = 0;
    while (cases < 60) {
        const std::size_t steps = 1 + rng.below(6);
        const std::size_t vocab = 2 + rng.below(3);
        const std::size_t tlen = 1 + rng.below(3);
        std::vector<int> target;
        for (std::size_t i = 0; i < tlen; ++i)
            target.push_back(1 + static_cast<int>(rng.below(vocab - 1)));
        std::size_t repeats = 0;
        for (std::size_t i = 1; i < target.size(); ++i) repeats += target[i] == target[i - 1];
        if (steps < target.size() + repeats) continue;

        auto logits = testutil::random_tensor({steps, vocab}, rng, 2.0, false);
        const double expected = oracle::ctc_loss_brute(logits, target);
        const double got = ctc_loss(logits, target).loss;
        INFO("T=" << steps << " V=" << vocab << " len=" << tlen);
        REQUIRE(got == Approx(expected).margin(1e-8));
        ++cases;
    }
}

TEST_CASE("ctc total probability partitions across labelings") {
    Rng rng(43);
    for (int trial = 0; trial < 5; ++trial) {
        const std::size_t steps = 2 + rng.below(3);  // T <= 4
        const std::size_t vocab = 2 + rng.below(2);
        auto logits = testutil::random_tensor({steps, vocab}, rng, 1.5, false);
        double total = 0.0;
        // every labeling of length <= T, including the empty one via brute force
        auto all = oracle::ctc_all_labelings(logits);
        for (const auto& [label, p] : all) {
            if (label.empty()) {
                total += p;
                continue;
            }
            total += std::exp(-ctc_loss(logits, label).loss);
        }
        CHECK(total == Approx(1.0).margin(1e-8));
    }
}

TEST_CASE("ctc gradient matches finite differences") {
    Rng rng(44);
    for (int trial = 0; trial < 10; ++trial) {
        const std::size_t steps = 3 + rng.below(4);  // T <= 6
        auto logits = testutil::random_tensor({steps, 4}, rng, 1.0);
        std::vector<int> target{1, 2};
        std::vector<Tensor<double>> inputs{logits};
        auto rep = grad_check([&] { return ctc_loss_op(logits, target); }, inputs, 1e-5, 1e-4);
        INFO("trial " << trial << " rel err " << rep.max_rel_err);
        REQUIRE(rep.pass);
    }
}

TEST_CASE("ctc loss is invariant to constant row shifts") {
    Rng rng(45);
    auto logits = testutil::random_tensor({5, 3}, rng, 1.0, false);
    const double base = ctc_loss(logits, {1, 2}).loss;
    auto shifted = Tensor64::from(logits.shape(), logits.value());
    for (std::size_t c = 0; c < 3; ++c) shifted.at(2, c) += 7.25;
    CHECK(ctc_loss(shifted, {1, 2}).loss == Approx(base).margin(1e-10));
}

TEST_CASE("greedy decode collapse rules") {
    Vocabulary vocab("ab");
    auto one_hot = [&](const std::vector<int>& ids) {
        auto t = Tensor64::zeros({ids.size(), vocab.size()});
        for (std::size_t i = 0; i < ids.size(); ++i) t.at(i, ids[i]) = 5.0;
        return t;
    };
    CHECK(greedy_decode(one_hot({1, 1, 0, 2, 2}), vocab) == "ab");
    CHECK(greedy_decode(one_hot({0, 0, 0}), vocab) == "");
    CHECK(greedy_decode(one_hot({1, 0, 1}), vocab) == "aa");
    // ties break toward the lowest token index (blank here)
    CHECK(greedy_decode(Tensor64::zeros({3, 3}), vocab) == "");
}

TEST_CASE("beam search with saturating width equals exhaustive max-marginal labeling") {
    Rng rng(46);
    Vocabulary vocab("ab");
    BeamParams params;
    params.width = 100000;
    params.lm_alpha = 0.0;
    params.length_beta = 0.0;
    for (int trial = 0; trial < 30; ++trial) {
        const std::size_t steps = 1 + rng.below(5);
        const std::size_t v = 2 + rng.below(2);
        auto logits = testutil::random_tensor({steps, v}, rng, 2.0, false);
        const auto expect_ids = oracle::max_marginal_labeling(logits);
        std::string expect;
        for (int id : expect_ids) expect.push_back(vocab.token(id));
        CHECK(beam_search_decode(logits, vocab, params) == expect);
    }
}

TEST_CASE("beam width 1 equals greedy on one-hot logits") {
    Rng rng(47);
    Vocabulary vocab("abc");
    BeamParams params;
    params.width = 1;
    params.lm_alpha = 0.0;
    params.length_beta = 0.0;
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t steps = 1 + rng.below(6);
        auto logits = Tensor64::zeros({steps, vocab.size()});
        for (std::size_t t = 0; t < steps; ++t) logits.at(t, rng.below(vocab.size())) = 12.0;
        CHECK(beam_search_decode(logits, vocab, params) == greedy_decode(logits, vocab));
    }
}

TEST_CASE("a dominant LM steers ambiguous logits") {
    Vocabulary vocab("ab");
    CharNGramLM lm = fit_ngram({"ab", "ab", "ab", "ab"}, "ab");
    // two frames, nearly flat between 'a' and 'b'
    auto logits = Tensor64::zeros({2, 3});
    logits.at(0, 1) = 1.0;
    logits.at(0, 2) = 0.99;
    logits.at(1, 1) = 0.99;
    logits.at(1, 2) = 1.0;
    BeamParams params;
    params.width = 8;
    params.length_beta = 0.0;

    params.lm_alpha = 25.0;
    const std::string fused = beam_search_decode(logits, vocab, &lm, params);
    INFO("fused decode: " << fused);
    // with an overwhelming LM the decode must be a substring of the "ab" pattern;
    // without it, "ba" or "bb" would be in play on these near-flat logits
    CHECK((fused == "ab" || fused == "a" || fused == "b" || fused.empty()));
}

TEST_CASE("ngram fit favors observed continuations") {
    CharNGramLM lm = fit_ngram({"aa"}, "ab");
    CHECK(lm.prob('a', CharNGramLM::kStart, 'a') > lm.prob('b', CharNGramLM::kStart, 'a'));
}

TEST_CASE("ngram conditionals sum to one over the outcome space") {
    CharNGramLM lm = fit_ngram({"the cat", "the hat", "a cat sat"});
    const std::string outcomes = lm.outcomes();
    std::vector<std::pair<char, char>> contexts{{CharNGramLM::kStart, CharNGramLM::kStart},
                                                {CharNGramLM::kStart, 't'},
                                                {'t', 'h'},
                                                {'h', 'e'},
                                                {'c', 'a'},
                                                {' ', 'c'},
                                                {'q', 'q'}};  // unseen context
    for (auto [h2, h1] : contexts) {
        double sum = 0.0;
        for (char c : outcomes) sum += lm.prob(c, h2, h1);
        INFO("context " << h2 << h1);
        CHECK(sum == Approx(1.0).margin(1e-9));
    }
}

TEST_CASE("ngram rejects an empty corpus") {
    CHECK_THROWS_AS(fit_ngram({}), std::invalid_argument);
}

TEST_CASE("held-out perplexity approaches the entropy of a known markov chain") {
    // two-state chain over {a, b}: p(same) = 0.8, p(switch) = 0.2
    const double p_same = 0.8;
    const double entropy = -(p_same * std::log(p_same) + (1 - p_same) * std::log(1 - p_same));
    Rng rng(48);
    auto sample = [&](std::size_t len) {
        std::string s(1, rng.bernoulli(0.5) ? 'a' : 'b');
        for (std::size_t i = 1; i < len; ++i) {
            const char prev = s.back();
            s.push_back(rng.bernoulli(p_same) ? prev : (prev == 'a' ? 'b' : 'a'));
        }
        return s;
    };
    std::vector<std::string> train, held;
    for (int i = 0; i < 200; ++i) train.push_back(sample(200));
    for (int i = 0; i < 20; ++i) held.push_back(sample(200));
    CharNGramLM lm = fit_ngram(train, "ab");
    const double ppl = lm.perplexity(held);
    INFO("perplexity " << ppl << " chain entropy exp " << std::exp(entropy));
    CHECK(std::log(ppl) == Approx(entropy).epsilon(0.10));
}

TEST_CASE("lm serialization round-trips through json") {
    CharNGramLM lm = fit_ngram({"the cat sat", "a hat"});
    const json j = lm.to_json<json>();
    CharNGramLM back = CharNGramLM::from_json(j);
    for (char c : std::string("ta h")) {
        CHECK(back.prob(c, 't', 'h') == Approx(lm.prob(c, 't', 'h')).margin(1e-15));
        CHECK(back.prob(c, CharNGramLM::kStart, CharNGramLM::kStart) ==
              Approx(lm.prob(c, CharNGramLM::kStart, CharNGramLM::kStart)).margin(1e-15));
    }
}
