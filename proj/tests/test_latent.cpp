#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "b2t/latent.hpp"
#include "b2t/train.hpp"
#include "test_util.hpp"

using namespace b2t;
using Catch::Approx;

namespace {

// two well-separated gaussian clusters in d dimensions
LatentSet two_clusters(std::size_t per_cluster, std::size_t dim, double separation, Rng& rng) {
    LatentSet set;
    set.dim = dim;
    set.stage = "pre";
    for (std::size_t i = 0; i < 2 * per_cluster; ++i) {
        const char label = i < per_cluster ? 'A' : 'B';
        for (std::size_t c = 0; c < dim; ++c) {
            double v = rng.normal();
            if (c == 0 && label == 'B') v += separation;
            set.points.push_back(v);
        }
        set.labels.push_back(label);
    }
    return set;
}

}  // namespace

TEST_CASE("tsne separates two distant gaussian clusters") {
    Rng rng(1);
    const LatentSet set = two_clusters(45, 4, 20.0, rng);
    const auto res = tsne(set.points, set.size(), set.dim, 15.0, 500, 3);

    // nearest-centroid assignment in the embedding vs the true cluster
    double cx[2] = {0, 0}, cy[2] = {0, 0};
    for (std::size_t i = 0; i < set.size(); ++i) {
        const int k = set.labels[i] == 'A' ? 0 : 1;
        cx[k] += res.embedding[i * 2];
        cy[k] += res.embedding[i * 2 + 1];
    }
    for (int k = 0; k < 2; ++k) {
        cx[k] /= 45.0;
        cy[k] /= 45.0;
    }
    int agree = 0;
    for (std::size_t i = 0; i < set.size(); ++i) {
        const double x = res.embedding[i * 2], y = res.embedding[i * 2 + 1];
        double d0 = (x - cx[0]) * (x - cx[0]) + (y - cy[0]) * (y - cy[0]);
        double d1 = (x - cx[1]) * (x - cx[1]) + (y - cy[1]) * (y - cy[1]);
        const char pred = d0 <= d1 ? 'A' : 'B';
        agree += pred == set.labels[i];
    }
    INFO("agreement " << agree << "/90");
    CHECK(agree >= 86);  // >= 95%
}

TEST_CASE("tsne kl trace is finite and decreases after exaggeration ends") {
    Rng rng(2);
    const LatentSet set = two_clusters(30, 3, 6.0, rng);
    const auto res = tsne(set.points, set.size(), set.dim, 12.0, 400, 5);
    REQUIRE(res.kl_trace.size() == 400);
    for (double v : res.kl_trace) CHECK(std::isfinite(v));
    CHECK(res.kl_trace.back() < res.kl_trace[99]);
}

TEST_CASE("tsne is deterministic in the seed") {
    Rng rng(3);
    const LatentSet set = two_clusters(25, 3, 4.0, rng);
    const auto a = tsne(set.points, set.size(), set.dim, 10.0, 120, 11);
    const auto b = tsne(set.points, set.size(), set.dim, 10.0, 120, 11);
    CHECK(a.embedding == b.embedding);
    const auto c = tsne(set.points, set.size(), set.dim, 10.0, 120, 12);
    CHECK(a.embedding != c.embedding);
}

TEST_CASE("tsne perplexity binary search hits the target entropy") {
    Rng rng(4);
    const std::size_t n = 60, d = 5;
    std::vector<double> pts(n * d);
    for (auto& v : pts) v = rng.normal();
    const double perplexity = 15.0;

    // recompute row affinities exactly as the implementation does and check entropy
    std::vector<double> sqd(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            double s = 0;
            for (std::size_t c = 0; c < d; ++c) {
                const double diff = pts[i * d + c] - pts[j * d + c];
                s += diff * diff;
            }
            sqd[i * n + j] = s;
        }
    std::vector<double> row(n);
    for (std::size_t i = 0; i < n; ++i) {
        detail::tsne_row_affinities(sqd, n, i, std::log(perplexity), row);
        double h = 0;
        for (std::size_t j = 0; j < n; ++j)
            if (row[j] > 0) h -= row[j] * std::log(row[j]);
        CHECK(h == Approx(std::log(perplexity)).margin(1e-4));
    }
}

TEST_CASE("tsne rejects too few points") {
    std::vector<double> pts(10 * 2, 0.0);
    CHECK_THROWS_WITH(tsne(pts, 10, 2, 15.0, 50, 1), Catch::Matchers::ContainsSubstring("3*perplexity"));
}

TEST_CASE("separability is near chance for identical distributions") {
    Rng rng(5);
    LatentSet set;
    set.dim = 6;
    for (std::size_t i = 0; i < 200; ++i) {
        for (std::size_t c = 0; c < 6; ++c) set.points.push_back(rng.normal());
        set.labels.push_back(i % 2 ? 'A' : 'B');
    }
    const double score = separability(set, 1);
    INFO("score " << score);
    CHECK(score == Approx(0.5).margin(0.1));
}

TEST_CASE("separability saturates for well-separated clusters") {
    Rng rng(6);
    const LatentSet set = two_clusters(60, 5, 30.0, rng);
    CHECK(separability(set, 2) >= 0.95);
}

TEST_CASE("separability is invariant to global rotations") {
    Rng rng(7);
    LatentSet set = two_clusters(50, 4, 2.0, rng);  // overlapping clusters, non-trivial score
    const double base = separability(set, 3);

    // random rotation via gram-schmidt on a random matrix
    const std::size_t d = 4;
    std::vector<double> q(d * d);
    for (auto& v : q) v = rng.normal();
    for (std::size_t i = 0; i < d; ++i) {
        for (std::size_t j = 0; j < i; ++j) {
            double dot = 0;
            for (std::size_t c = 0; c < d; ++c) dot += q[i * d + c] * q[j * d + c];
            for (std::size_t c = 0; c < d; ++c) q[i * d + c] -= dot * q[j * d + c];
        }
        double norm = 0;
        for (std::size_t c = 0; c < d; ++c) norm += q[i * d + c] * q[i * d + c];
        norm = std::sqrt(norm);
        for (std::size_t c = 0; c < d; ++c) q[i * d + c] /= norm;
    }
    LatentSet rotated = set;
    for (std::size_t i = 0; i < set.size(); ++i)
        for (std::size_t r = 0; r < d; ++r) {
            double s = 0;
            for (std::size_t c = 0; c < d; ++c) s += q[r * d + c] * set.points[i * d + c];
            rotated.points[i * d + r] = s;
        }
    const double rot = separability(rotated, 3);
    INFO("base " << base << " rotated " << rot);
    CHECK(rot == Approx(base).margin(0.05));
}

TEST_CASE("separability requires both labels") {
    LatentSet set;
    set.dim = 2;
    for (int i = 0; i < 10; ++i) {
        set.points.push_back(0.0);
        set.points.push_back(1.0);
        set.labels.push_back('A');
    }
    CHECK_THROWS_AS(separability(set), std::invalid_argument);
}

TEST_CASE("latent extraction pairs modalities and pools to trunk width") {
    TempDirGuard dir;
    GeneratorConfig gcfg;
    gcfg.seed = 21;
    gcfg.days = 2;
    gcfg.blocks_per_day = 3;
    gcfg.sentences_per_block = 3;
    gcfg.channels_a = 6;
    gcfg.channels_b = 8;
    gcfg.excluded_channels_b = 2;
    gcfg.latent_dim = 4;
    const auto manifest = generate_corpus(gcfg, dir.str());
    const Dataset data_a = load_dataset(manifest, 'A');
    const Dataset data_b = load_dataset(manifest, 'B');

    ModelConfig mcfg;
    mcfg.bfe = {1, 4, {}};
    mcfg.trunk.width = 8;
    mcfg.trunk.blocks = 1;
    mcfg.trunk.heads = 2;
    mcfg.trunk.ff_width = 16;
    mcfg.trunk.max_len = 256;
    mcfg.trunk.dropout = 0.0;

    PretrainModel<float> pre(mcfg.trunk, data_a.vocab, data_a.channels, 77);
    auto model = build_model<float>(mcfg, data_b.vocab, data_b.day_ids, data_b.channels, 78);
    load_pretrained_trunk(model, pre);

    const auto pair = extract_latents(model, "frozen", pre, data_b, data_a, Partition::Test);
    CHECK(pair.pre.size() == 2 * 6);  // n sentences -> 2n points per stage
    CHECK(pair.post.size() == 2 * 6);
    CHECK(pair.pre.dim == 8);
    CHECK(pair.post.dim == 8);
    CHECK(pair.pre.points.size() == pair.pre.size() * 8);

    std::size_t a_count = 0;
    for (char l : pair.pre.labels) a_count += l == 'A';
    CHECK(a_count == 6);

    CHECK_THROWS_WITH(extract_latents(model, "fft", pre, data_b, data_a, Partition::Test),
                      Catch::Matchers::ContainsSubstring("frozen"));
}
