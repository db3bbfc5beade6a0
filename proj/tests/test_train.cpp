#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "b2t/train.hpp"
#include "test_util.hpp"

using namespace b2t;
using Catch::Approx;
namespace fs = std::filesystem;

namespace {

// tiny corpus shared by the training-mechanics tests
struct TinyCorpus {
    TempDirGuard dir;
    CorpusManifest manifest;
    Dataset data_a, data_b;

    TinyCorpus() {
        GeneratorConfig cfg;
        cfg.seed = 505;
        cfg.days = 2;
        cfg.blocks_per_day = 3;
        cfg.sentences_per_block = 3;
        cfg.channels_a = 6;
        cfg.channels_b = 8;
        cfg.excluded_channels_b = 2;
        cfg.latent_dim = 4;
        cfg.noise_b = 0.1;
        manifest = generate_corpus(cfg, dir.str());
        data_a = load_dataset(manifest, 'A');
        data_b = load_dataset(manifest, 'B');
    }
};

const TinyCorpus& tiny() {
    static TinyCorpus corpus;
    return corpus;
}

ModelConfig tiny_model() {
    ModelConfig cfg;
    cfg.bfe = {1, 6, {}};
    cfg.trunk.width = 8;
    cfg.trunk.blocks = 1;
    cfg.trunk.heads = 2;
    cfg.trunk.ff_width = 16;
    cfg.trunk.max_len = 256;
    cfg.trunk.dropout = 0.1;
    return cfg;
}

TrainConfig tiny_train(int epochs = 2) {
    TrainConfig cfg;
    cfg.max_epochs = epochs;
    cfg.patience = std::min(epochs, 10);
    cfg.seed = 7;
    return cfg;
}

}  // namespace

TEST_CASE("trunk learning-rate schedule") {
    TrainConfig cfg;
    CHECK(trunk_lr(1, cfg) == 0.0);
    CHECK(trunk_lr(3, cfg) == 0.0);
    CHECK(trunk_lr(6, cfg) == 0.0);
    CHECK(trunk_lr(7, cfg) == Approx(2.5e-6));
    CHECK(trunk_lr(8, cfg) == Approx(5e-6));
    CHECK(trunk_lr(9, cfg) == Approx(7.5e-6));
    CHECK(trunk_lr(10, cfg) == Approx(1e-5));
    CHECK(trunk_lr(11, cfg) == Approx(1e-5));
    CHECK(trunk_lr(100, cfg) == Approx(1e-5));
    CHECK_THROWS_AS(trunk_lr(0, cfg), std::invalid_argument);
}

TEST_CASE("early stopping fires exactly at patience exhaustion") {
    EarlyStopper stopper(10);
    const std::vector<double> stream{5, 4, 4, 4, 4, 4, 4, 4, 4, 4, 4, 4};
    int stopped_after = 0;
    for (std::size_t i = 0; i < stream.size(); ++i) {
        if (stopper.update(stream[i])) {
            stopped_after = static_cast<int>(i + 1);
            break;
        }
    }
    CHECK(stopped_after == 12);

    EarlyStopper improving(3);
    for (double v : {5.0, 4.0, 3.0, 2.0, 1.0}) CHECK_FALSE(improving.update(v));
}

TEST_CASE("adam minimizes a quadratic") {
    auto x = Tensor<double>::scalar(0.0, true);
    Adam<double> opt;
    opt.add_group({{"x", x}}, 0.05);
    for (int i = 0; i < 800; ++i) {
        opt.zero_grad();
        auto diff = sub(x, Tensor<double>::scalar(3.0));
        mul(diff, diff).backward();
        opt.step();
    }
    CHECK(x.item() == Approx(3.0).margin(1e-3));
}

TEST_CASE("optimizer step with zero lr leaves parameters bitwise unchanged") {
    Rng rng(3);
    auto p = testutil::random_tensor({4, 4}, rng);
    const auto before = p.value();
    Adam<double> opt;
    opt.add_group({{"p", p}}, 0.0);
    for (int i = 0; i < 3; ++i) {
        opt.zero_grad();
        sum_all(mul(p, p)).backward();
        opt.step();
    }
    CHECK(p.value() == before);
}

TEST_CASE("gradient clipping caps the global norm") {
    auto a = Tensor<double>::from({2}, {3.0, 4.0}, true);
    Adam<double> opt;
    opt.add_group({{"a", a}}, 0.1);
    a.grad() = {30.0, 40.0};  // norm 50
    opt.clip_global_norm(1.0);
    CHECK(a.grad()[0] == Approx(0.6).margin(1e-12));
    CHECK(a.grad()[1] == Approx(0.8).margin(1e-12));
}

TEST_CASE("training regime preconditions") {
    const auto& c = tiny();
    PretrainModel<float> pre(tiny_model().trunk, c.data_a.vocab, c.data_a.channels, 1);
    CHECK_THROWS_WITH(run_training<float>(c.data_b, Regime::FullFineTune, tiny_model(), nullptr,
                                          tiny_train()),
                      Catch::Matchers::ContainsSubstring("requires a pretrained checkpoint"));
    CHECK_THROWS_WITH(run_training<float>(c.data_b, Regime::Scratch, tiny_model(), &pre, tiny_train()),
                      Catch::Matchers::ContainsSubstring("must not receive"));
}

TEST_CASE("frozen trunk run leaves trunk parameters bitwise unchanged end to end") {
    const auto& c = tiny();
    const auto mcfg = tiny_model();
    PretrainModel<float> pre(mcfg.trunk, c.data_b.vocab, c.data_a.channels, 99);

    BrainDecoder<float> model;
    run_training<float>(c.data_b, Regime::FrozenTrunk, mcfg, &pre, tiny_train(2), nullptr, &model);

    std::map<std::string, Tensor<float>> src;
    for (auto& [n, p] : pre.named_params()) src.emplace(n, p);
    for (const auto& [name, p] : model.named_params())
        if (name.rfind("trunk.", 0) == 0 || name.rfind("lm_head.", 0) == 0)
            CHECK(p.value() == src.at(name).value());
}

TEST_CASE("full fine-tune moves trunk parameters once its lr ramps in") {
    const auto& c = tiny();
    const auto mcfg = tiny_model();
    PretrainModel<float> pre(mcfg.trunk, c.data_b.vocab, c.data_a.channels, 99);
    auto tcfg = tiny_train(2);
    tcfg.trunk_warmup_start = 1;
    tcfg.trunk_warmup_end = 1;
    tcfg.trunk_lr_peak = 1e-3;

    BrainDecoder<float> model;
    run_training<float>(c.data_b, Regime::FullFineTune, mcfg, &pre, tcfg, nullptr, &model);

    std::map<std::string, Tensor<float>> src;
    for (auto& [n, p] : pre.named_params()) src.emplace(n, p);
    bool trunk_moved = false;
    for (const auto& [name, p] : model.named_params())
        if (name.rfind("trunk.", 0) == 0 && p.value() != src.at(name).value()) trunk_moved = true;
    CHECK(trunk_moved);
}

TEST_CASE("identical config and seed reproduce identical run metrics") {
    const auto& c = tiny();
    const auto r1 = run_training<float>(c.data_b, Regime::Scratch, tiny_model(), nullptr, tiny_train(2));
    const auto r2 = run_training<float>(c.data_b, Regime::Scratch, tiny_model(), nullptr, tiny_train(2));
    CHECK(r1.val_cer == r2.val_cer);
    CHECK(r1.test_cer == r2.test_cer);
    CHECK(r1.test_wer == r2.test_wer);
    REQUIRE(r1.epochs.size() == r2.epochs.size());
    for (std::size_t i = 0; i < r1.epochs.size(); ++i) {
        CHECK(r1.epochs[i].train_loss == r2.epochs[i].train_loss);
        CHECK(r1.epochs[i].val_loss == r2.epochs[i].val_loss);
        CHECK(r1.epochs[i].val_cer == r2.epochs[i].val_cer);
    }
}

TEST_CASE("reported metrics come from the epoch minimizing val cer") {
    const auto& c = tiny();
    const auto res = run_training<float>(c.data_b, Regime::Scratch, tiny_model(), nullptr, tiny_train(3));
    REQUIRE(!res.epochs.empty());
    int argmin = 0;
    for (std::size_t i = 1; i < res.epochs.size(); ++i)
        if (res.epochs[i].val_cer < res.epochs[argmin].val_cer) argmin = static_cast<int>(i);
    CHECK(res.selected_epoch == argmin + 1);
    CHECK(res.val_cer == res.epochs[argmin].val_cer);
}

TEST_CASE("pretraining runs and reports a finite gate metric") {
    const auto& c = tiny();
    auto cfg = tiny_train(2);
    const auto out = pretrain_surrogate<float>(c.data_a, tiny_model().trunk, cfg);
    CHECK(out.result.epochs_run == 2);
    CHECK(std::isfinite(out.result.val_cer));
    CHECK(out.result.val_cer >= 0.0);
}

TEST_CASE("an untrained model is uninformative: per-frame cross-entropy near log |V|") {
    const auto& c = tiny();
    PretrainModel<double> model(tiny_model().trunk, c.data_a.vocab, c.data_a.channels, 31);
    NoGradGuard ng;
    const double uniform = std::log(29.0);

    double ce = 0.0, loss = 0.0, frames = 0.0;
    for (const auto* item : c.data_a.partition(Partition::Train)) {
        const auto logits = model.forward(to_tensor<double>(item->features));
        const auto lsm = log_softmax(logits, 1);
        for (double v : lsm.value()) ce -= v;
        loss += ctc_loss(logits, item->tokens).loss;
        frames += static_cast<double>(item->features.frames);
    }
    const double per_frame_ce = ce / (frames * 29.0);
    INFO("per-frame CE " << per_frame_ce << " vs log(29) " << uniform);
    CHECK(per_frame_ce == Approx(uniform).epsilon(0.20));

    // the CTC objective per frame sits below log |V| by the alignment-count
    // entropy but must start in the same ballpark
    const double per_frame_loss = loss / frames;
    INFO("per-frame CTC loss " << per_frame_loss);
    CHECK(per_frame_loss > 0.5 * uniform);
    CHECK(per_frame_loss < 1.1 * uniform);
}

TEST_CASE("sweep writes one row per cell and resumes without duplicates") {
    const auto& c = tiny();
    TempDirGuard out;

    SweepConfig sweep;
    sweep.grid = {BFEConfig{1, 4, {}}, BFEConfig{1, 6, {}}};
    sweep.regimes = {Regime::Scratch};
    sweep.seeds = {1, 2};
    sweep.trunk = tiny_model().trunk;
    sweep.train = tiny_train(1);
    sweep.out_dir = out.str();
    sweep.workers = 2;
    sweep.quiet = true;

    const auto results = run_sweep<float>(c.data_b, sweep);
    CHECK(results.size() == 4);

    std::ifstream csv(out.file("results.csv"));
    std::string header;
    std::getline(csv, header);
    CHECK(header == std::string(RunResult::csv_header()));
    std::set<std::string> rows;
    std::string line;
    std::size_t count = 0;
    while (std::getline(csv, line))
        if (!line.empty()) {
            rows.insert(line);
            ++count;
        }
    CHECK(count == 4);
    CHECK(rows.size() == 4);  // unique

    // resume: rerun; completed runs must be reused with identical results
    const auto again = run_sweep<float>(c.data_b, sweep);
    REQUIRE(again.size() == results.size());
    for (std::size_t i = 0; i < results.size(); ++i) {
        CHECK(again[i].test_cer == results[i].test_cer);
        CHECK(again[i].wall_s == results[i].wall_s);  // stored result, not re-run
    }

    // corrupt one cell: the sweep re-runs exactly that cell
    {
        std::ofstream bad(out.file("runs/" + run_key(sweep.grid[0], Regime::Scratch, 1) + ".json"));
        bad << "{ not json";
    }
    const auto repaired = run_sweep<float>(c.data_b, sweep);
    CHECK(repaired[0].test_cer == results[0].test_cer);
}

TEST_CASE("run result json round trip") {
    RunResult r;
    r.config_id = "g1h4_fcnone";
    r.regime = "scratch";
    r.seed = 3;
    r.epochs_run = 2;
    r.selected_epoch = 1;
    r.epochs = {{3.0, 2.5, 0.9}, {2.0, 2.6, 0.95}};
    r.val_cer = 0.9;
    r.test_cer = 0.8;
    r.test_wer = 1.0;
    r.test_wer_lm = 0.9;
    r.wall_s = 12.5;
    const RunResult back = RunResult::from_json(r.to_json());
    CHECK(back.csv_row() == r.csv_row());
    CHECK(back.epochs.size() == 2);
    CHECK(back.selected_epoch == 1);
}

TEST_CASE("train config json round trip keeps decode settings") {
    TrainConfig cfg;
    cfg.max_epochs = 17;
    cfg.decode.width = 9;
    cfg.decode.lm_alpha = 0.25;
    const TrainConfig back = TrainConfig::from_json(cfg.to_json());
    CHECK(back.max_epochs == 17);
    CHECK(back.decode.width == 9);
    CHECK(back.decode.lm_alpha == Approx(0.25));
    CHECK_THROWS_AS([] {
        TrainConfig bad;
        bad.patience = 200;
        bad.check();
    }(), std::invalid_argument);
}
