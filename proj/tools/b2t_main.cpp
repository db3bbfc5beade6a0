// Command-line front end: corpus generation, pretraining, transfer training,
// sweeps, evaluation, paired statistics, and latent analysis.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "b2t/checkpoint.hpp"
#include "b2t/ctc.hpp"
#include "b2t/data.hpp"
#include "b2t/dataset.hpp"
#include "b2t/latent.hpp"
#include "b2t/metrics.hpp"
#include "b2t/model.hpp"
#include "b2t/train.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace b2t;

namespace {

json read_json_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot open " + path);
    json j;
    is >> j;
    return j;
}

void write_json_file(const std::string& path, const json& j) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot write " + path);
    os << j.dump(1) << "\n";
}

TrainConfig load_train_config(const std::string& path) {
    if (path.empty()) return TrainConfig{};
    return TrainConfig::from_json(read_json_file(path));
}

TrunkConfig load_trunk_config(const std::string& path) {
    if (path.empty()) return TrunkConfig{};
    return TrunkConfig::from_json(read_json_file(path));
}

std::vector<BFEConfig> load_grid(const std::string& path) {
    const json j = read_json_file(path);
    if (j.is_object() && j.contains("preset")) {
        const std::string preset = j["preset"];
        if (preset == "paper") return enumerate_paper_grid();
        if (preset == "desk") return enumerate_desk_grid();
        throw std::runtime_error("unknown grid preset '" + preset + "'");
    }
    std::vector<BFEConfig> grid;
    for (const auto& e : j) grid.push_back(BFEConfig::from_json(e));
    if (grid.empty()) throw std::runtime_error("grid file " + path + " holds no configs");
    return grid;
}

CharNGramLM fit_lm_on_train(const CorpusManifest& manifest) {
    const auto parts = split(manifest);
    std::vector<std::string> corpus;
    for (std::size_t i = 0; i < manifest.records.size(); ++i)
        if (parts[i] == Partition::Train && manifest.records[i].modality == 'B')
            corpus.push_back(manifest.records[i].transcript);
    return fit_ngram(corpus);
}

// run-result CSV -> metric per (config_id, seed), plus row order
std::map<std::string, double> read_metric_csv(const std::string& path, const std::string& metric,
                                              std::vector<std::string>* order) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot open " + path);
    std::string header;
    std::getline(is, header);
    std::vector<std::string> cols;
    for (std::size_t start = 0; start <= header.size();) {
        const auto comma = header.find(',', start);
        cols.push_back(header.substr(start, comma == std::string::npos ? std::string::npos : comma - start));
        if (comma == std::string::npos) break;
        start = comma + 1;
    }
    int metric_col = -1, config_col = -1, seed_col = -1;
    for (std::size_t i = 0; i < cols.size(); ++i) {
        if (cols[i] == metric) metric_col = static_cast<int>(i);
        if (cols[i] == "config_id") config_col = static_cast<int>(i);
        if (cols[i] == "seed") seed_col = static_cast<int>(i);
    }
    if (metric_col < 0 || config_col < 0 || seed_col < 0)
        throw std::runtime_error(path + ": missing column (need config_id, seed, " + metric + ")");

    std::map<std::string, double> out;
    std::string line;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::vector<std::string> fields;
        for (std::size_t start = 0; start <= line.size();) {
            const auto comma = line.find(',', start);
            fields.push_back(line.substr(start, comma == std::string::npos ? std::string::npos : comma - start));
            if (comma == std::string::npos) break;
            start = comma + 1;
        }
        const std::string key = fields[config_col] + "#" + fields[seed_col];
        out[key] = std::stod(fields[metric_col]);
        if (order) order->push_back(key);
    }
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"cross-modal CTC transcription testbed"};
    app.require_subcommand(1);

    // ---- generate-data ----
    auto* gen = app.add_subcommand("generate-data", "synthesize a paired-modality corpus");
    std::string gen_config, gen_out;
    gen->add_option("--config", gen_config, "generator config JSON (defaults used when omitted)");
    gen->add_option("--out", gen_out, "output directory")->required();
    gen->callback([&] {
        GeneratorConfig cfg;
        if (!gen_config.empty()) cfg = GeneratorConfig::from_json(read_json_file(gen_config));
        const auto manifest = generate_corpus(cfg, gen_out);
        std::cout << "wrote " << manifest.records.size() << " records under " << gen_out << "\n";
    });

    // ---- pretrain ----
    auto* pre = app.add_subcommand("pretrain", "surrogate-pretrain the trunk on modality A");
    std::string pre_data, pre_out, pre_trunk, pre_train;
    std::uint64_t pre_seed = 1;
    pre->add_option("--data", pre_data, "corpus manifest.json")->required();
    pre->add_option("--out", pre_out, "output checkpoint path")->required();
    pre->add_option("--trunk", pre_trunk, "trunk config JSON");
    pre->add_option("--train", pre_train, "train config JSON");
    pre->add_option("--seed", pre_seed, "seed");
    pre->callback([&] {
        const auto manifest = CorpusManifest::load(pre_data);
        const Dataset data_a = load_dataset(manifest, 'A');
        TrainConfig tcfg = load_train_config(pre_train);
        tcfg.seed = pre_seed;
        const auto outcome = pretrain_surrogate<float>(data_a, load_trunk_config(pre_trunk), tcfg);
        save_checkpoint(pre_out, outcome.model, outcome.result.selected_epoch,
                        json{{"val_cer", outcome.result.val_cer},
                             {"test_cer", outcome.result.test_cer},
                             {"reached_gate", outcome.reached_gate}});
        std::cout << "pretrain: val_cer=" << outcome.result.val_cer
                  << " test_cer=" << outcome.result.test_cer << " epochs=" << outcome.result.epochs_run
                  << (outcome.reached_gate ? "" : "  [WARNING: gate missed]") << "\n";
        if (!outcome.reached_gate) std::exit(2);
    });

    // ---- train ----
    auto* tr = app.add_subcommand("train", "train one transfer-regime run on modality B");
    std::string tr_regime, tr_bfe, tr_pretrained, tr_data, tr_out, tr_trunk, tr_train;
    std::uint64_t tr_seed = 1;
    tr->add_option("--regime", tr_regime, "fft|frozen|scratch")->required();
    tr->add_option("--bfe", tr_bfe, "BFE config JSON");
    tr->add_option("--pretrained", tr_pretrained, "pretrain checkpoint (fft/frozen)");
    tr->add_option("--data", tr_data, "corpus manifest.json")->required();
    tr->add_option("--out", tr_out, "output directory")->required();
    tr->add_option("--trunk", tr_trunk, "trunk config JSON");
    tr->add_option("--train", tr_train, "train config JSON");
    tr->add_option("--seed", tr_seed, "seed");
    tr->callback([&] {
        const auto manifest = CorpusManifest::load(tr_data);
        const Dataset data_b = load_dataset(manifest, 'B');
        const Regime regime = regime_from_name(tr_regime);

        ModelConfig mcfg;
        if (!tr_bfe.empty()) mcfg.bfe = BFEConfig::from_json(read_json_file(tr_bfe));
        mcfg.trunk = load_trunk_config(tr_trunk);
        TrainConfig tcfg = load_train_config(tr_train);
        tcfg.seed = tr_seed;

        LoadedPretrain<float> pretrained;
        const PretrainModel<float>* pre_ptr = nullptr;
        if (regime != Regime::Scratch) {
            if (tr_pretrained.empty())
                throw std::runtime_error("regime " + tr_regime + " requires --pretrained");
            pretrained = load_pretrain_checkpoint<float>(tr_pretrained);
            pre_ptr = &pretrained.model;
        }

        const CharNGramLM lm = fit_lm_on_train(manifest);
        fs::create_directories(tr_out);
        BrainDecoder<float> model;
        const RunResult res = run_training<float>(data_b, regime, mcfg, pre_ptr, tcfg, &lm, &model);
        write_json_file((fs::path(tr_out) / "result.json").string(), res.to_json());
        save_checkpoint((fs::path(tr_out) / "model.ntck").string(), model, res.selected_epoch,
                        json{{"val_cer", res.val_cer}, {"test_cer", res.test_cer}},
                        regime_name(regime));
        std::cout << RunResult::csv_header() << "\n" << res.csv_row() << "\n";
    });

    // ---- sweep ----
    auto* sw = app.add_subcommand("sweep", "run a grid x regimes x seeds sweep");
    std::string sw_grid, sw_data, sw_out, sw_trunk, sw_train, sw_regimes = "fft,frozen,scratch";
    std::string sw_pretrained_dir;
    int sw_seeds = 1;
    int sw_workers = 1;
    sw->add_option("--grid", sw_grid, "grid JSON (array of BFE configs or {\"preset\": ...})")->required();
    sw->add_option("--seeds", sw_seeds, "number of seeds (1..N)")->required();
    sw->add_option("--data", sw_data, "corpus manifest.json")->required();
    sw->add_option("--out", sw_out, "output directory")->required();
    sw->add_option("--regimes", sw_regimes, "comma-separated regimes");
    sw->add_option("--trunk", sw_trunk, "trunk config JSON");
    sw->add_option("--train", sw_train, "train config JSON");
    sw->add_option("--pretrained-dir", sw_pretrained_dir,
                   "directory with pretrain_s<seed>.ntck checkpoints");
    sw->add_option("--workers", sw_workers, "parallel run workers");
    sw->callback([&] {
        const auto manifest = CorpusManifest::load(sw_data);
        const Dataset data_b = load_dataset(manifest, 'B');

        SweepConfig sweep;
        sweep.grid = load_grid(sw_grid);
        for (std::size_t start = 0; start <= sw_regimes.size();) {
            const auto comma = sw_regimes.find(',', start);
            sweep.regimes.push_back(regime_from_name(
                sw_regimes.substr(start, comma == std::string::npos ? std::string::npos : comma - start)));
            if (comma == std::string::npos) break;
            start = comma + 1;
        }
        for (int s = 1; s <= sw_seeds; ++s) sweep.seeds.push_back(static_cast<std::uint64_t>(s));
        sweep.trunk = load_trunk_config(sw_trunk);
        sweep.train = load_train_config(sw_train);
        sweep.out_dir = sw_out;
        sweep.workers = sw_workers;
        for (std::uint64_t s : sweep.seeds) {
            const fs::path ck = fs::path(sw_pretrained_dir) / ("pretrain_s" + std::to_string(s) + ".ntck");
            if (fs::exists(ck)) sweep.pretrained_by_seed[s] = ck.string();
        }

        const CharNGramLM lm = fit_lm_on_train(manifest);
        const auto results = run_sweep<float>(data_b, sweep, &lm);
        std::cout << "sweep complete: " << results.size() << " runs, results in " << sw_out
                  << "/results.csv\n";
    });

    // ---- evaluate ----
    auto* ev = app.add_subcommand("evaluate", "decode a checkpoint on a partition");
    std::string ev_ckpt, ev_data, ev_partition = "test", ev_lm;
    std::size_t ev_width = BeamParams{}.width;
    double ev_alpha = BeamParams{}.lm_alpha, ev_beta = BeamParams{}.length_beta;
    ev->add_option("--ckpt", ev_ckpt, "decoder checkpoint")->required();
    ev->add_option("--data", ev_data, "corpus manifest.json")->required();
    ev->add_option("--partition", ev_partition, "train|val|test");
    ev->add_option("--lm", ev_lm, "character LM JSON for beam decoding");
    ev->add_option("--beam-width", ev_width, "beam width");
    ev->add_option("--lm-alpha", ev_alpha, "LM weight");
    ev->add_option("--lm-beta", ev_beta, "length reward");
    ev->callback([&] {
        const auto manifest = CorpusManifest::load(ev_data);
        const Dataset data_b = load_dataset(manifest, 'B');
        auto loaded = load_decoder_checkpoint<float>(ev_ckpt);
        const Partition part = ev_partition == "train"  ? Partition::Train
                               : ev_partition == "val" ? Partition::Val
                                                        : Partition::Test;
        const auto items = data_b.partition(part);
        ForwardFn<float> forward = [&](const DatasetItem& item, Rng*) {
            return loaded.model.forward(to_tensor<float>(item.features), item.day_id);
        };
        const ErrorRates greedy = greedy_eval(forward, items, data_b.vocab);
        json out{{"partition", ev_partition},
                 {"sentences", items.size()},
                 {"cer", greedy.cer},
                 {"wer", greedy.wer}};
        if (!ev_lm.empty()) {
            const CharNGramLM lm = CharNGramLM::from_json(read_json_file(ev_lm));
            BeamParams params{ev_width, ev_alpha, ev_beta};
            const ErrorRates beam = beam_eval(forward, items, data_b.vocab, &lm, params);
            out["wer_lm"] = beam.wer;
            out["cer_lm"] = beam.cer;
        }
        std::cout << out.dump(1) << "\n";
    });

    // ---- fit-lm ----
    auto* flm = app.add_subcommand("fit-lm", "fit the character 3-gram LM on training transcripts");
    std::string flm_data, flm_out;
    flm->add_option("--data", flm_data, "corpus manifest.json")->required();
    flm->add_option("--out", flm_out, "output LM JSON")->required();
    flm->callback([&] {
        const auto manifest = CorpusManifest::load(flm_data);
        const CharNGramLM lm = fit_lm_on_train(manifest);
        write_json_file(flm_out, lm.to_json<json>());
        std::cout << "lm fit on training transcripts, " << lm.total_events() << " events\n";
    });

    // ---- stats ----
    auto* st = app.add_subcommand("stats", "one-sided Wilcoxon signed-rank test between two run CSVs");
    std::string st_a, st_b, st_metric = "test_wer";
    st->add_option("--a", st_a, "first results CSV (alternative: a < b)")->required();
    st->add_option("--b", st_b, "second results CSV")->required();
    st->add_option("--metric", st_metric, "metric column to compare");
    st->callback([&] {
        std::vector<std::string> order;
        const auto ma = read_metric_csv(st_a, st_metric, &order);
        const auto mb = read_metric_csv(st_b, st_metric, nullptr);
        std::vector<double> x, y;
        for (const auto& key : order) {
            auto it = mb.find(key);
            if (it == mb.end()) continue;
            x.push_back(ma.at(key));
            y.push_back(it->second);
        }
        const auto res = wilcoxon_one_sided_less(x, y);
        const json out{{"metric", st_metric}, {"pairs", res.n},      {"w_plus", res.w_plus},
                       {"p_value", res.p},    {"exact", res.exact},  {"alternative", "a < b"}};
        std::cout << out.dump(1) << "\n";
    });

    // ---- analyze-latents ----
    auto* an = app.add_subcommand("analyze-latents", "t-SNE embedding and separability report");
    std::string an_ckpt, an_pretrained, an_data, an_out;
    std::uint64_t an_seed = 1;
    double an_perplexity = 15.0;
    an->add_option("--ckpt", an_ckpt, "frozen-regime decoder checkpoint")->required();
    an->add_option("--pretrained", an_pretrained, "pretrain checkpoint")->required();
    an->add_option("--data", an_data, "corpus manifest.json")->required();
    an->add_option("--out", an_out, "output directory")->required();
    an->add_option("--seed", an_seed, "t-SNE seed");
    an->add_option("--perplexity", an_perplexity, "t-SNE perplexity");
    an->callback([&] {
        const auto manifest = CorpusManifest::load(an_data);
        const Dataset data_a = load_dataset(manifest, 'A');
        const Dataset data_b = load_dataset(manifest, 'B');
        auto decoder = load_decoder_checkpoint<float>(an_ckpt);
        auto pre = load_pretrain_checkpoint<float>(an_pretrained);
        const std::string regime = decoder.header.value("regime", "unknown");

        const LatentPair pair =
            extract_latents(decoder.model, regime, pre.model, data_b, data_a, Partition::Test);
        fs::create_directories(an_out);

        std::ofstream csv(fs::path(an_out) / "embedding.csv");
        csv << "x,y,modality,stage\n";
        for (const LatentSet* set : {&pair.pre, &pair.post}) {
            const auto emb = tsne(set->points, set->size(), set->dim, an_perplexity, 500, an_seed);
            for (std::size_t i = 0; i < set->size(); ++i)
                csv << emb.embedding[i * 2] << ',' << emb.embedding[i * 2 + 1] << ','
                    << set->labels[i] << ',' << set->stage << "\n";
        }

        const double sep_pre = separability(pair.pre, an_seed);
        const double sep_post = separability(pair.post, an_seed);
        const json report{{"separability_pre", sep_pre},
                          {"separability_post", sep_post},
                          {"post_leq_pre", sep_post <= sep_pre},
                          {"points_per_stage", pair.pre.size()}};
        write_json_file((fs::path(an_out) / "separability.json").string(), report);
        std::cout << report.dump(1) << "\n";
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
