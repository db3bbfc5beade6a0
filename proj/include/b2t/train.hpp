#pragma once

#include <atomic>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <mutex>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "b2t/checkpoint.hpp"
#include "b2t/ctc.hpp"
#include "b2t/dataset.hpp"
#include "b2t/metrics.hpp"
#include "b2t/model.hpp"

namespace b2t {

// ---------------------------------------------------------------------------
// configuration and schedules
// ---------------------------------------------------------------------------

struct TrainConfig {
    int max_epochs = 100;
    int patience = 10;  // consecutive epochs without val-loss improvement
    double general_lr = 1e-4;
    double trunk_lr_peak = 1e-5;
    int trunk_warmup_start = 7;  // epochs, 1-based, inclusive
    int trunk_warmup_end = 10;
    std::size_t batch_size = 8;
    std::uint64_t seed = 1;
    double grad_clip = 1.0;  // global norm; 0 disables
    BeamParams decode;       // LM-assisted evaluation settings
    double pretrain_cer_gate = 0.15;

    json to_json() const {
        return json{{"max_epochs", max_epochs},
                    {"patience", patience},
                    {"general_lr", general_lr},
                    {"trunk_lr_peak", trunk_lr_peak},
                    {"trunk_warmup_start", trunk_warmup_start},
                    {"trunk_warmup_end", trunk_warmup_end},
                    {"batch_size", batch_size},
                    {"seed", seed},
                    {"grad_clip", grad_clip},
                    {"beam_width", decode.width},
                    {"lm_alpha", decode.lm_alpha},
                    {"lm_beta", decode.length_beta},
                    {"pretrain_cer_gate", pretrain_cer_gate}};
    }
    static TrainConfig from_json(const json& j) {
        TrainConfig c;
        c.max_epochs = j.value("max_epochs", c.max_epochs);
        c.patience = j.value("patience", c.patience);
        c.general_lr = j.value("general_lr", c.general_lr);
        c.trunk_lr_peak = j.value("trunk_lr_peak", c.trunk_lr_peak);
        c.trunk_warmup_start = j.value("trunk_warmup_start", c.trunk_warmup_start);
        c.trunk_warmup_end = j.value("trunk_warmup_end", c.trunk_warmup_end);
        c.batch_size = j.value("batch_size", c.batch_size);
        c.seed = j.value("seed", c.seed);
        c.grad_clip = j.value("grad_clip", c.grad_clip);
        c.decode.width = j.value("beam_width", c.decode.width);
        c.decode.lm_alpha = j.value("lm_alpha", c.decode.lm_alpha);
        c.decode.length_beta = j.value("lm_beta", c.decode.length_beta);
        c.pretrain_cer_gate = j.value("pretrain_cer_gate", c.pretrain_cer_gate);
        return c;
    }

    void check() const {
        if (patience > max_epochs) throw std::invalid_argument("train config: patience > max_epochs");
        if (general_lr <= 0 || trunk_lr_peak <= 0) throw std::invalid_argument("train config: lr <= 0");
        if (batch_size < 1) throw std::invalid_argument("train config: batch_size < 1");
    }
};

// Trunk-group learning rate: 0 before the warm-up window, a linear ramp to the
// peak across it, then flat. With the defaults ([7,10], peak 1e-5):
// epoch 3 -> 0, epoch 8 -> 5e-6, epoch 10 -> 1e-5.
inline double trunk_lr(int epoch, const TrainConfig& cfg) {
    if (epoch < 1) throw std::invalid_argument("trunk_lr: epochs are 1-based");
    if (epoch < cfg.trunk_warmup_start) return 0.0;
    if (epoch > cfg.trunk_warmup_end) return cfg.trunk_lr_peak;
    const double span = static_cast<double>(cfg.trunk_warmup_end - cfg.trunk_warmup_start + 1);
    return cfg.trunk_lr_peak * static_cast<double>(epoch - cfg.trunk_warmup_start + 1) / span;
}

// Stops after `patience` consecutive epochs without strict improvement.
class EarlyStopper {
public:
    explicit EarlyStopper(int patience) : patience_(patience) {}

    // feed one epoch's validation loss; returns true when training should stop
    bool update(double val_loss) {
        if (val_loss < best_) {
            best_ = val_loss;
            stale_ = 0;
        } else {
            ++stale_;
        }
        return stale_ >= patience_;
    }

    double best() const { return best_; }

private:
    int patience_;
    int stale_ = 0;
    double best_ = std::numeric_limits<double>::infinity();
};

// ---------------------------------------------------------------------------
// Adam with two learning-rate groups (general / trunk schedule)
// ---------------------------------------------------------------------------

template <class T>
class Adam {
public:
    Adam(double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
        : beta1_(beta1), beta2_(beta2), eps_(eps) {}

    void add_group(const NamedParams<T>& params, double lr) {
        Group g;
        g.lr = lr;
        for (const auto& [name, p] : params) {
            g.params.push_back(p);
            g.m.emplace_back(p.numel(), T(0));
            g.v.emplace_back(p.numel(), T(0));
        }
        groups_.push_back(std::move(g));
    }

    void set_lr(std::size_t group, double lr) { groups_.at(group).lr = lr; }

    void zero_grad() {
        for (auto& g : groups_)
            for (auto& p : g.params) p.zero_grad();
    }

    // global-norm gradient clipping over every parameter in the optimizer
    void clip_global_norm(double max_norm) {
        if (max_norm <= 0) return;
        double sq = 0.0;
        for (auto& g : groups_)
            for (auto& p : g.params)
                for (T gv : p.grad()) sq += static_cast<double>(gv) * static_cast<double>(gv);
        const double norm = std::sqrt(sq);
        if (norm <= max_norm) return;
        const T s = static_cast<T>(max_norm / norm);
        for (auto& g : groups_)
            for (auto& p : g.params)
                for (T& gv : p.grad()) gv *= s;
    }

    void step() {
        ++t_;
        const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
        const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
        for (auto& g : groups_) {
            const T lr = static_cast<T>(g.lr);
            for (std::size_t i = 0; i < g.params.size(); ++i) {
                auto& p = g.params[i];
                auto& val = p.value();
                auto& grad = p.grad();
                auto& m = g.m[i];
                auto& v = g.v[i];
                for (std::size_t k = 0; k < val.size(); ++k) {
                    const T gk = grad[k];
                    m[k] = static_cast<T>(beta1_) * m[k] + static_cast<T>(1.0 - beta1_) * gk;
                    v[k] = static_cast<T>(beta2_) * v[k] + static_cast<T>(1.0 - beta2_) * gk * gk;
                    const T mhat = m[k] / static_cast<T>(bc1);
                    const T vhat = v[k] / static_cast<T>(bc2);
                    val[k] -= lr * mhat / (std::sqrt(vhat) + static_cast<T>(eps_));
                }
            }
        }
    }

private:
    struct Group {
        double lr = 0.0;
        std::vector<Tensor<T>> params;
        std::vector<std::vector<T>> m, v;
    };
    std::vector<Group> groups_;
    double beta1_, beta2_, eps_;
    std::int64_t t_ = 0;
};

// ---------------------------------------------------------------------------
// evaluation helpers
// ---------------------------------------------------------------------------

template <class T>
using ForwardFn = std::function<Tensor<T>(const DatasetItem&, Rng* drop_rng)>;

template <class T>
double mean_ctc_loss(const ForwardFn<T>& forward, const std::vector<const DatasetItem*>& items) {
    NoGradGuard ng;
    double total = 0.0;
    for (const auto* it : items) total += ctc_loss(forward(*it, nullptr), it->tokens).loss;
    return total / static_cast<double>(items.size());
}

template <class T>
ErrorRates greedy_eval(const ForwardFn<T>& forward, const std::vector<const DatasetItem*>& items,
                       const Vocabulary& vocab) {
    NoGradGuard ng;
    std::vector<std::string> refs, hyps;
    for (const auto* it : items) {
        refs.push_back(it->transcript);
        hyps.push_back(greedy_decode(forward(*it, nullptr), vocab));
    }
    return corpus_error_rates(refs, hyps);
}

template <class T>
ErrorRates beam_eval(const ForwardFn<T>& forward, const std::vector<const DatasetItem*>& items,
                     const Vocabulary& vocab, const CharNGramLM* lm, const BeamParams& params) {
    NoGradGuard ng;
    std::vector<std::string> refs, hyps;
    for (const auto* it : items) {
        refs.push_back(it->transcript);
        hyps.push_back(beam_search_decode(forward(*it, nullptr), vocab, lm, params));
    }
    return corpus_error_rates(refs, hyps);
}

// ---------------------------------------------------------------------------
// run results
// ---------------------------------------------------------------------------

struct EpochLog {
    double train_loss = 0.0, val_loss = 0.0, val_cer = 0.0;
};

struct RunResult {
    std::string config_id;
    std::string regime;
    std::uint64_t seed = 0;
    int epochs_run = 0;
    int selected_epoch = 0;  // 1-based argmin of val CER
    std::vector<EpochLog> epochs;
    double val_cer = 0.0;  // at the selected epoch
    double test_cer = 0.0, test_wer = 0.0, test_wer_lm = 0.0;
    double wall_s = 0.0;

    static const char* csv_header() {
        return "config_id,regime,seed,epochs_run,val_cer,test_cer,test_wer,test_wer_lm,wall_s";
    }

    std::string csv_row() const {
        std::ostringstream os;
        os.precision(10);
        os << config_id << ',' << regime << ',' << seed << ',' << epochs_run << ',' << val_cer << ','
           << test_cer << ',' << test_wer << ',' << test_wer_lm << ',' << wall_s;
        return os.str();
    }

    json to_json() const {
        json ep = json::array();
        for (const auto& e : epochs)
            ep.push_back({{"train_loss", e.train_loss}, {"val_loss", e.val_loss}, {"val_cer", e.val_cer}});
        return json{{"config_id", config_id}, {"regime", regime},       {"seed", seed},
                    {"epochs_run", epochs_run}, {"selected_epoch", selected_epoch},
                    {"epochs", ep},             {"val_cer", val_cer},   {"test_cer", test_cer},
                    {"test_wer", test_wer},     {"test_wer_lm", test_wer_lm}, {"wall_s", wall_s}};
    }

    static RunResult from_json(const json& j) {
        RunResult r;
        r.config_id = j.at("config_id");
        r.regime = j.at("regime");
        r.seed = j.at("seed");
        r.epochs_run = j.at("epochs_run");
        r.selected_epoch = j.at("selected_epoch");
        for (const auto& e : j.at("epochs"))
            r.epochs.push_back({e.at("train_loss"), e.at("val_loss"), e.at("val_cer")});
        r.val_cer = j.at("val_cer");
        r.test_cer = j.at("test_cer");
        r.test_wer = j.at("test_wer");
        r.test_wer_lm = j.at("test_wer_lm");
        r.wall_s = j.at("wall_s");
        return r;
    }
};

// ---------------------------------------------------------------------------
// core epoch loop, shared by pretraining and the transfer regimes
// ---------------------------------------------------------------------------

namespace detail {

template <class T>
struct LoopOutcome {
    std::vector<EpochLog> epochs;
    int epochs_run = 0;
    int selected_epoch = 0;
    double best_val_cer = std::numeric_limits<double>::infinity();
    std::vector<std::vector<T>> best_values;  // snapshot of every param at the selected epoch
};

// One optimization run: shuffled gradient-accumulation batches, per-epoch
// validation loss (early stopping) and CER (checkpoint selection).
// `all_params` must cover every parameter so the best snapshot can be
// restored; `opt` owns the trainable subset. `scheduled_group`, when >= 0,
// receives trunk_lr(epoch) each epoch.
template <class T>
LoopOutcome<T> train_loop(const ForwardFn<T>& forward, const Dataset& data, const TrainConfig& cfg,
                          Adam<T>& opt, int scheduled_group, const NamedParams<T>& all_params,
                          Rng& drop_rng) {
    cfg.check();
    const auto train_items = data.partition(Partition::Train);
    const auto val_items = data.partition(Partition::Val);
    if (train_items.empty() || val_items.empty())
        throw std::invalid_argument("train_loop: empty train or val partition");

    Rng shuffle_rng(mix_seed(cfg.seed, "shuffle"));
    EarlyStopper stopper(cfg.patience);
    LoopOutcome<T> out;

    std::vector<std::size_t> order(train_items.size());
    std::iota(order.begin(), order.end(), std::size_t{0});

    for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
        if (scheduled_group >= 0) opt.set_lr(static_cast<std::size_t>(scheduled_group), trunk_lr(epoch, cfg));
        shuffle_rng.shuffle(order);

        double epoch_loss = 0.0;
        std::size_t done = 0;
        while (done < order.size()) {
            const std::size_t batch = std::min(cfg.batch_size, order.size() - done);
            opt.zero_grad();
            for (std::size_t b = 0; b < batch; ++b) {
                const DatasetItem& item = *train_items[order[done + b]];
                Tensor<T> loss = ctc_loss_op(forward(item, &drop_rng), item.tokens);
                const double lv = static_cast<double>(loss.item());
                if (!std::isfinite(lv))
                    throw std::runtime_error("training diverged: non-finite CTC loss at epoch " +
                                             std::to_string(epoch) + ", sentence day " +
                                             std::to_string(item.day_id) + "/block " +
                                             std::to_string(item.block_id) + "/sent " +
                                             std::to_string(item.sentence_id));
                epoch_loss += lv;
                scale(loss, T(1) / static_cast<T>(batch)).backward();
            }
            opt.clip_global_norm(cfg.grad_clip);
            opt.step();
            done += batch;
        }

        EpochLog log;
        log.train_loss = epoch_loss / static_cast<double>(order.size());
        log.val_loss = mean_ctc_loss(forward, val_items);
        log.val_cer = greedy_eval(forward, val_items, data.vocab).cer;
        out.epochs.push_back(log);
        out.epochs_run = epoch;

        if (log.val_cer < out.best_val_cer) {
            out.best_val_cer = log.val_cer;
            out.selected_epoch = epoch;
            out.best_values.clear();
            for (const auto& [name, p] : all_params) out.best_values.push_back(p.value());
        }
        if (stopper.update(log.val_loss)) break;
    }

    return out;
}

template <class T>
void restore_snapshot(const NamedParams<T>& params, const std::vector<std::vector<T>>& values) {
    if (params.size() != values.size())
        throw std::logic_error("restore_snapshot: parameter count mismatch");
    for (std::size_t i = 0; i < params.size(); ++i) {
        Tensor<T> handle = params[i].second;  // handles share the node
        handle.value() = values[i];
    }
}

}  // namespace detail

// ---------------------------------------------------------------------------
// surrogate pretraining on modality A
// ---------------------------------------------------------------------------

template <class T>
struct PretrainOutcome {
    PretrainModel<T> model;
    RunResult result;
    bool reached_gate = false;  // best val CER under the configured gate
};

// Supervised CTC pretraining of front-end + trunk + LM head on the
// surrogate-audio corpus. Flags failure when the gate CER is not reached.
template <class T>
PretrainOutcome<T> pretrain_surrogate(const Dataset& corpus_a, const TrunkConfig& trunk_cfg,
                                      const TrainConfig& cfg) {
    const auto start = std::chrono::steady_clock::now();
    PretrainOutcome<T> out;
    out.model = PretrainModel<T>(trunk_cfg, corpus_a.vocab, corpus_a.channels, cfg.seed);

    Rng drop_rng(mix_seed(cfg.seed, "dropout"));
    ForwardFn<T> forward = [&m = out.model](const DatasetItem& item, Rng* rng) {
        return m.forward(to_tensor<T>(item.features), rng);
    };

    const auto params = out.model.named_params();
    Adam<T> opt;
    opt.add_group(params, cfg.general_lr);

    auto loop = detail::train_loop<T>(forward, corpus_a, cfg, opt, /*scheduled_group=*/-1, params,
                                      drop_rng);
    detail::restore_snapshot(params, loop.best_values);

    out.result.config_id = "pretrain";
    out.result.regime = "pretrain";
    out.result.seed = cfg.seed;
    out.result.epochs_run = loop.epochs_run;
    out.result.selected_epoch = loop.selected_epoch;
    out.result.epochs = loop.epochs;
    out.result.val_cer = loop.best_val_cer;
    const auto test_items = corpus_a.partition(Partition::Test);
    const ErrorRates test = greedy_eval(forward, test_items, corpus_a.vocab);
    out.result.test_cer = test.cer;
    out.result.test_wer = test.wer;
    out.result.test_wer_lm = test.wer;
    out.result.wall_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    out.reached_gate = loop.best_val_cer < cfg.pretrain_cer_gate;
    return out;
}

// ---------------------------------------------------------------------------
// one transfer-regime training run on modality B
// ---------------------------------------------------------------------------

template <class T>
RunResult run_training(const Dataset& corpus_b, Regime regime, const ModelConfig& mcfg,
                       const PretrainModel<T>* pretrained, const TrainConfig& cfg,
                       const CharNGramLM* lm = nullptr, BrainDecoder<T>* out_model = nullptr) {
    const bool needs_pretrained = regime != Regime::Scratch;
    if (needs_pretrained && pretrained == nullptr)
        throw std::invalid_argument("run_training: regime " + std::string(regime_name(regime)) +
                                    " requires a pretrained checkpoint");
    if (!needs_pretrained && pretrained != nullptr)
        throw std::invalid_argument("run_training: scratch regime must not receive a pretrained checkpoint");

    const auto start = std::chrono::steady_clock::now();
    BrainDecoder<T> model =
        build_model<T>(mcfg, corpus_b.vocab, corpus_b.day_ids, corpus_b.channels, cfg.seed);
    if (needs_pretrained) load_pretrained_trunk(model, *pretrained);

    Rng drop_rng(mix_seed(cfg.seed, "dropout"));
    ForwardFn<T> forward = [&model](const DatasetItem& item, Rng* rng) {
        return model.forward(to_tensor<T>(item.features), item.day_id, rng);
    };

    const auto all_params = model.named_params();
    NamedParams<T> general, scheduled;
    for (const auto& [name, p] : all_params) {
        const bool trunk_part = name.rfind("trunk.", 0) == 0 || name.rfind("lm_head.", 0) == 0;
        if (regime == Regime::FrozenTrunk && trunk_part) continue;  // excluded from the optimizer
        if (regime == Regime::FullFineTune && trunk_part)
            scheduled.emplace_back(name, p);
        else
            general.emplace_back(name, p);  // scratch trains everything at the general LR
    }

    Adam<T> opt;
    opt.add_group(general, cfg.general_lr);
    int scheduled_group = -1;
    if (!scheduled.empty()) {
        opt.add_group(scheduled, 0.0);
        scheduled_group = 1;
    }

    auto loop = detail::train_loop<T>(forward, corpus_b, cfg, opt, scheduled_group, all_params, drop_rng);
    detail::restore_snapshot(all_params, loop.best_values);

    RunResult res;
    res.config_id = mcfg.bfe.id();
    res.regime = regime_name(regime);
    res.seed = cfg.seed;
    res.epochs_run = loop.epochs_run;
    res.selected_epoch = loop.selected_epoch;
    res.epochs = loop.epochs;
    res.val_cer = loop.best_val_cer;

    const auto test_items = corpus_b.partition(Partition::Test);
    const ErrorRates greedy = greedy_eval(forward, test_items, corpus_b.vocab);
    res.test_cer = greedy.cer;
    res.test_wer = greedy.wer;
    if (lm)
        res.test_wer_lm = beam_eval(forward, test_items, corpus_b.vocab, lm, cfg.decode).wer;
    else
        res.test_wer_lm = greedy.wer;
    res.wall_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

    if (out_model) *out_model = std::move(model);
    return res;
}

// ---------------------------------------------------------------------------
// sweep orchestration: grid x regimes x seeds, resumable, CSV output
// ---------------------------------------------------------------------------

struct SweepConfig {
    std::vector<BFEConfig> grid;
    std::vector<Regime> regimes;
    std::vector<std::uint64_t> seeds;
    TrunkConfig trunk;
    TrainConfig train;
    std::string out_dir;
    // pretrain checkpoint path per seed; required when a pretrained regime is swept
    std::map<std::uint64_t, std::string> pretrained_by_seed;
    int workers = 1;
    bool quiet = false;
};

inline std::string run_key(const BFEConfig& bfe, Regime regime, std::uint64_t seed) {
    return bfe.id() + "_" + regime_name(regime) + "_s" + std::to_string(seed);
}

// Runs the full cross product. Completed runs found in <out_dir>/runs are
// skipped, so an interrupted sweep resumes without duplicating work.
template <class T>
std::vector<RunResult> run_sweep(const Dataset& corpus_b, const SweepConfig& sweep,
                                 const CharNGramLM* lm = nullptr) {
    if (sweep.grid.empty()) throw std::invalid_argument("run_sweep: empty grid");
    namespace fs = std::filesystem;
    const fs::path run_dir = fs::path(sweep.out_dir) / "runs";
    fs::create_directories(run_dir);

    struct Cell {
        const BFEConfig* bfe;
        Regime regime;
        std::uint64_t seed;
    };
    std::vector<Cell> cells;
    for (const auto& bfe : sweep.grid)
        for (Regime regime : sweep.regimes)
            for (std::uint64_t seed : sweep.seeds) cells.push_back({&bfe, regime, seed});

    // pretrained models shared across worker threads (read-only during runs)
    std::map<std::uint64_t, PretrainModel<T>> pretrained;
    for (const auto& [seed, path] : sweep.pretrained_by_seed)
        pretrained.emplace(seed, load_pretrain_checkpoint<T>(path).model);

    std::vector<RunResult> results(cells.size());
    std::atomic<std::size_t> next{0};
    std::mutex io_mutex;
    std::exception_ptr first_error;

    auto worker_body = [&]() {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= cells.size()) return;
            const Cell& cell = cells[i];
            const std::string key = run_key(*cell.bfe, cell.regime, cell.seed);
            const fs::path result_file = run_dir / (key + ".json");

            if (fs::exists(result_file)) {
                try {
                    std::ifstream is(result_file);
                    json j;
                    is >> j;
                    results[i] = RunResult::from_json(j);
                    if (!sweep.quiet) {
                        std::lock_guard<std::mutex> lock(io_mutex);
                        std::fprintf(stderr, "[sweep] %s: reusing completed run\n", key.c_str());
                    }
                    continue;
                } catch (const std::exception&) {
                    // corrupt partial result: re-run the cell
                    fs::remove(result_file);
                }
            }

            ModelConfig mcfg;
            mcfg.bfe = *cell.bfe;
            mcfg.trunk = sweep.trunk;
            TrainConfig tcfg = sweep.train;
            tcfg.seed = cell.seed;

            const PretrainModel<T>* pre = nullptr;
            if (cell.regime != Regime::Scratch) {
                auto it = pretrained.find(cell.seed);
                if (it == pretrained.end())
                    throw std::invalid_argument("run_sweep: no pretrained checkpoint for seed " +
                                                std::to_string(cell.seed));
                pre = &it->second;
            }
            RunResult r = run_training<T>(corpus_b, cell.regime, mcfg, pre, tcfg, lm);
            {
                std::ofstream os(result_file);
                os << r.to_json().dump(1) << "\n";
            }
            if (!sweep.quiet) {
                std::lock_guard<std::mutex> lock(io_mutex);
                std::fprintf(stderr, "[sweep] %s: test_cer=%.4f test_wer=%.4f (%d epochs, %.1fs)\n",
                             key.c_str(), r.test_cer, r.test_wer, r.epochs_run, r.wall_s);
            }
            results[i] = std::move(r);
        }
    };
    auto worker = [&]() {
        try {
            worker_body();
        } catch (...) {
            std::lock_guard<std::mutex> lock(io_mutex);
            if (!first_error) first_error = std::current_exception();
            next.store(cells.size());  // drain remaining work
        }
    };

    const int workers = std::max(1, sweep.workers);
    if (workers == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }
    if (first_error) std::rethrow_exception(first_error);

    std::ofstream csv(fs::path(sweep.out_dir) / "results.csv");
    csv << RunResult::csv_header() << "\n";
    for (const auto& r : results) csv << r.csv_row() << "\n";
    return results;
}

}  // namespace b2t
