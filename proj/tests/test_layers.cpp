#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "b2t/gradcheck.hpp"
#include "b2t/layers.hpp"
#include "test_util.hpp"

using namespace b2t;
using Catch::Approx;

namespace {

std::vector<Tensor<double>> params_of(const NamedParams<double>& named, Tensor<double> extra) {
    std::vector<Tensor<double>> out{std::move(extra)};
    for (const auto& [n, p] : named) out.push_back(p);
    return out;
}

}  // namespace

TEST_CASE("gru with zero weights halves a nonzero initial state") {
    Rng rng(1);
    GruLayer<double> gru(2, 2, /*bidirectional=*/false, rng);
    NamedParams<double> ps;
    gru.collect_params("g", ps);
    for (auto& [n, p] : ps) std::fill(p.value().begin(), p.value().end(), 0.0);

    auto x = Tensor64::zeros({2, 2});
    auto h0 = Tensor64::from({2}, {1, 1});
    auto out = gru_forward(gru, x, h0);
    // r = z = 0.5, hc = 0, so each step halves the carried state
    CHECK(out.at(0, 0) == Approx(0.5));
    CHECK(out.at(0, 1) == Approx(0.5));
    CHECK(out.at(1, 0) == Approx(0.25));
    CHECK(out.at(1, 1) == Approx(0.25));
}

TEST_CASE("gru with zero weights and zero state stays zero") {
    Rng rng(2);
    GruLayer<double> gru(3, 4, false, rng);
    NamedParams<double> ps;
    gru.collect_params("g", ps);
    for (auto& [n, p] : ps) std::fill(p.value().begin(), p.value().end(), 0.0);
    auto out = gru_forward(gru, Tensor64::zeros({5, 3}));
    for (double v : out.value()) CHECK(v == 0.0);
}

TEST_CASE("gru rejects empty sequences") {
    Rng rng(3);
    GruLayer<double> gru(3, 4, false, rng);
    CHECK_THROWS_WITH(gru_forward(gru, Tensor64::zeros({0, 3})),
                      Catch::Matchers::ContainsSubstring("empty sequence"));
}

TEST_CASE("gru gradient vs finite differences, both directions") {
    Rng rng(4);
    for (bool bidir : {false, true}) {
        GruLayer<double> gru(3, 4, bidir, rng);
        auto x = testutil::random_tensor({4, 3}, rng);
        NamedParams<double> named;
        gru.collect_params("g", named);
        auto inputs = params_of(named, x);
        auto rep = grad_check([&] { return sum_all(gru_forward(gru, x)); }, inputs, 1e-5, 1e-4);
        INFO("bidir=" << bidir << " rel err " << rep.max_rel_err);
        CHECK(rep.pass);
    }
}

TEST_CASE("gru hidden states stay inside the unit ball from a zero state") {
    Rng rng(5);
    for (int trial = 0; trial < 10; ++trial) {
        GruLayer<double> gru(4, 6, true, rng);
        auto x = testutil::random_tensor({20, 4}, rng, 3.0, false);
        auto out = gru_forward(gru, x);
        for (double v : out.value()) CHECK(std::fabs(v) < 1.0);
    }
}

TEST_CASE("stacked gru output width doubles when bidirectional") {
    Rng rng(6);
    GruLayer<double> gru(3, 5, true, rng);
    auto out = gru_forward(gru, Tensor64::zeros({7, 3}));
    CHECK(out.shape() == Shape{7, 10});
}

TEST_CASE("attention weight rows sum to one") {
    Rng rng(7);
    MultiHeadSelfAttention<double> attn(8, 2, rng);
    auto x = testutil::random_tensor({5, 8}, rng, 1.0, false);
    // probe the softmax by checking that a constant value matrix passes through:
    // rows summing to 1 make attention over constant values the identity on them
    auto q = attn.q.forward(x), k = attn.k.forward(x);
    auto qi = slice_cols(q, 0, 4), ki = slice_cols(k, 0, 4);
    auto weights = softmax(scale(matmul_nt(qi, ki), 0.5), 1);
    for (std::size_t r = 0; r < 5; ++r) {
        double sum = 0;
        for (std::size_t c = 0; c < 5; ++c) sum += weights.at(r, c);
        CHECK(sum == Approx(1.0).margin(1e-9));
    }
}

TEST_CASE("attention is permutation-equivariant without positional encoding") {
    Rng rng(8);
    MultiHeadSelfAttention<double> attn(8, 2, rng);
    auto x = testutil::random_tensor({5, 8}, rng, 1.0, false);
    auto y = attn.forward(x);

    const std::vector<std::size_t> perm{3, 0, 4, 1, 2};
    auto xp = Tensor64::zeros({5, 8});
    for (std::size_t r = 0; r < 5; ++r)
        for (std::size_t c = 0; c < 8; ++c) xp.at(r, c) = x.at(perm[r], c);
    auto yp = attn.forward(xp);
    for (std::size_t r = 0; r < 5; ++r)
        for (std::size_t c = 0; c < 8; ++c)
            CHECK(yp.at(r, c) == Approx(y.at(perm[r], c)).margin(1e-12));
}

TEST_CASE("masked frames cannot influence unmasked outputs") {
    Rng rng(9);
    MultiHeadSelfAttention<double> attn(8, 2, rng);
    auto x = testutil::random_tensor({6, 8}, rng, 1.0, false);
    auto y = attn.forward(x, 5);

    auto x2 = Tensor64::from(x.shape(), x.value());
    for (std::size_t c = 0; c < 8; ++c) x2.at(5, c) += 10.0 + static_cast<double>(c);
    auto y2 = attn.forward(x2, 5);
    for (std::size_t r = 0; r < 5; ++r)
        for (std::size_t c = 0; c < 8; ++c) CHECK(y2.at(r, c) == Approx(y.at(r, c)).margin(1e-12));
}

TEST_CASE("attention rejects width mismatch") {
    Rng rng(10);
    MultiHeadSelfAttention<double> attn(8, 2, rng);
    CHECK_THROWS_AS(attn.forward(Tensor64::zeros({4, 6})), std::invalid_argument);
    CHECK_THROWS_AS(MultiHeadSelfAttention<double>(10, 4, rng), std::invalid_argument);
}

TEST_CASE("attention and transformer block gradients") {
    Rng rng(11);
    MultiHeadSelfAttention<double> attn(8, 2, rng);
    auto x = testutil::random_tensor({5, 8}, rng);
    NamedParams<double> named;
    attn.collect_params("a", named);
    auto inputs = params_of(named, x);
    auto rep = grad_check([&] { return sum_all(attn.forward(x)); }, inputs, 1e-5, 1e-4);
    INFO("attn rel err " << rep.max_rel_err);
    CHECK(rep.pass);

    TransformerBlock<double> block(8, 2, 16, 0.0, rng);
    NamedParams<double> bnamed;
    block.collect_params("b", bnamed);
    auto binputs = params_of(bnamed, x);
    auto brep = grad_check([&] { return sum_all(block.forward(x)); }, binputs, 1e-5, 1e-4);
    INFO("block rel err " << brep.max_rel_err);
    CHECK(brep.pass);
}

TEST_CASE("transformer block preserves shape for all sequence lengths") {
    Rng rng(12);
    TransformerBlock<double> block(8, 4, 16, 0.0, rng);
    for (std::size_t steps : {1, 2, 5, 17}) {
        auto x = testutil::random_tensor({steps, 8}, rng, 1.0, false);
        CHECK(block.forward(x).shape() == x.shape());
    }
}

TEST_CASE("positional encoding rejects overly long sequences") {
    Rng rng(13);
    PositionalEncoding<double> pos(10, 4, rng);
    CHECK_THROWS_AS(pos.forward(Tensor64::zeros({11, 4})), std::invalid_argument);
    CHECK(pos.forward(Tensor64::zeros({10, 4})).shape() == Shape{10, 4});
}

TEST_CASE("empty stack is the identity") {
    Stack<double> stack;
    auto x = Tensor64::from({2, 2}, {1, 2, 3, 4});
    CHECK(stack.forward(x).value() == x.value());
}

TEST_CASE("identity linear leaves input unchanged") {
    Rng rng(14);
    Linear<double> lin(2, 2, rng);
    lin.W.value() = {1, 0, 0, 1};
    lin.b.value() = {0, 0};
    Stack<double> stack;
    stack.layers.push_back([&](const Tensor<double>& t) { return lin.forward(t); });
    auto x = Tensor64::from({3, 2}, {1, 2, 3, 4, 5, 6});
    CHECK(stack.forward(x).value() == x.value());
}

TEST_CASE("two stacked linears equal one linear with product weights") {
    Rng rng(15);
    Linear<double> l1(3, 4, rng), l2(4, 2, rng);
    Stack<double> stack;
    stack.layers.push_back([&](const Tensor<double>& t) { return l1.forward(t); });
    stack.layers.push_back([&](const Tensor<double>& t) { return l2.forward(t); });

    // combined: W = W2 W1, b = W2 b1 + b2
    Linear<double> combined(3, 2, rng);
    for (std::size_t i = 0; i < 2; ++i) {
        for (std::size_t j = 0; j < 3; ++j) {
            double s = 0;
            for (std::size_t k = 0; k < 4; ++k) s += l2.W.at(i, k) * l1.W.at(k, j);
            combined.W.at(i, j) = s;
        }
        double s = l2.b.value()[i];
        for (std::size_t k = 0; k < 4; ++k) s += l2.W.at(i, k) * l1.b.value()[k];
        combined.b.value()[i] = s;
    }

    auto x = testutil::random_tensor({5, 3}, rng, 1.0, false);
    auto a = stack.forward(x);
    auto b = combined.forward(x);
    for (std::size_t i = 0; i < a.numel(); ++i)
        CHECK(a.value()[i] == Approx(b.value()[i]).margin(1e-10));
}

TEST_CASE("stack errors carry the failing layer index") {
    Rng rng(16);
    Linear<double> l1(3, 4, rng), l2(5, 2, rng);  // mismatched on purpose
    Stack<double> stack;
    stack.layers.push_back([&](const Tensor<double>& t) { return l1.forward(t); });
    stack.layers.push_back([&](const Tensor<double>& t) { return l2.forward(t); });
    CHECK_THROWS_WITH(stack.forward(Tensor64::zeros({2, 3})),
                      Catch::Matchers::ContainsSubstring("stack layer 1"));
}
