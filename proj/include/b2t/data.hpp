#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "b2t/feature.hpp"
#include "b2t/rng.hpp"
#include "b2t/vocab.hpp"

namespace b2t {

using nlohmann::json;

struct SentenceRecord {
    int day_id = 0, block_id = 0, sentence_id = 0;
    std::string transcript;
    std::string feature_file;  // relative to the manifest directory
    char modality = 'B';       // 'A' = surrogate-audio, 'B' = surrogate-brain
};

struct ChannelInfo {
    std::string group;   // feature kind ("txc" threshold crossings / "spw" spike power)
    std::string region;  // electrode region label
};

struct CorpusManifest {
    std::vector<SentenceRecord> records;
    std::size_t channels_a = 0, channels_b = 0;
    std::vector<ChannelInfo> channels_b_info;     // one entry per modality-B channel
    std::vector<std::string> excluded_regions;    // channel mask applied at load time
    std::string root_dir;                         // directory of the manifest; not serialized

    std::vector<int> day_ids() const {
        std::set<int> days;
        for (const auto& r : records) days.insert(r.day_id);
        return {days.begin(), days.end()};
    }

    std::vector<SentenceRecord> modality(char m) const {
        std::vector<SentenceRecord> out;
        for (const auto& r : records)
            if (r.modality == m) out.push_back(r);
        return out;
    }

    // indices of modality-B channels that survive the region exclusion mask
    std::vector<std::size_t> included_channels_b() const {
        std::vector<std::size_t> keep;
        for (std::size_t c = 0; c < channels_b; ++c) {
            const auto& region = channels_b_info[c].region;
            if (std::find(excluded_regions.begin(), excluded_regions.end(), region) ==
                excluded_regions.end())
                keep.push_back(c);
        }
        return keep;
    }

    void validate(const Vocabulary& vocab = Vocabulary()) const {
        std::set<std::tuple<char, int, int, int>> seen;
        std::map<int, std::set<int>> blocks_per_day;
        for (const auto& r : records) {
            if (r.transcript.empty())
                throw std::invalid_argument("manifest: empty transcript for day " + std::to_string(r.day_id));
            for (char c : r.transcript)
                if (!vocab.contains(c))
                    throw std::invalid_argument(std::string("manifest: transcript character '") + c +
                                                "' outside vocabulary");
            if (!seen.insert({r.modality, r.day_id, r.block_id, r.sentence_id}).second)
                throw std::invalid_argument("manifest: duplicate (day,block,sentence) triple " +
                                            std::to_string(r.day_id) + "/" + std::to_string(r.block_id) +
                                            "/" + std::to_string(r.sentence_id));
            blocks_per_day[r.day_id].insert(r.block_id);
        }
        for (const auto& [day, blocks] : blocks_per_day)
            if (blocks.size() < 2)
                throw std::invalid_argument("manifest: day " + std::to_string(day) +
                                            " has fewer than 2 blocks");
    }

    json to_json() const {
        json j;
        j["channels_a"] = channels_a;
        j["channels_b"] = channels_b;
        json chans = json::array();
        for (const auto& c : channels_b_info) chans.push_back({{"group", c.group}, {"region", c.region}});
        j["channels_b_info"] = chans;
        j["excluded_regions"] = excluded_regions;
        json recs = json::array();
        for (const auto& r : records)
            recs.push_back({{"day", r.day_id},
                            {"block", r.block_id},
                            {"sentence", r.sentence_id},
                            {"transcript", r.transcript},
                            {"file", r.feature_file},
                            {"modality", std::string(1, r.modality)}});
        j["records"] = recs;
        return j;
    }

    static CorpusManifest from_json(const json& j) {
        CorpusManifest m;
        m.channels_a = j["channels_a"];
        m.channels_b = j["channels_b"];
        for (const auto& c : j["channels_b_info"])
            m.channels_b_info.push_back({c["group"], c["region"]});
        m.excluded_regions = j["excluded_regions"].get<std::vector<std::string>>();
        for (const auto& r : j["records"]) {
            SentenceRecord rec;
            rec.day_id = r["day"];
            rec.block_id = r["block"];
            rec.sentence_id = r["sentence"];
            rec.transcript = r["transcript"];
            rec.feature_file = r["file"];
            rec.modality = r["modality"].get<std::string>()[0];
            m.records.push_back(std::move(rec));
        }
        return m;
    }

    void save(const std::string& path) const {
        std::ofstream os(path);
        if (!os) throw std::runtime_error("cannot write manifest: " + path);
        os << to_json().dump(1) << "\n";
    }

    static CorpusManifest load(const std::string& path) {
        std::ifstream is(path);
        if (!is) throw std::runtime_error("cannot open manifest: " + path);
        json j;
        is >> j;
        CorpusManifest m = from_json(j);
        m.root_dir = std::filesystem::path(path).parent_path().string();
        return m;
    }
};

// ---------------------------------------------------------------------------
// splits
// ---------------------------------------------------------------------------

enum class Partition { Train, Val, Test };

inline const char* partition_name(Partition p) {
    switch (p) {
        case Partition::Train: return "train";
        case Partition::Val: return "val";
        default: return "test";
    }
}

// Per day: the block with the lowest id becomes test, the next lowest becomes
// validation, the remainder trains. Returns one partition label per record.
inline std::vector<Partition> split(const CorpusManifest& manifest) {
    std::map<int, std::set<int>> blocks_per_day;
    for (const auto& r : manifest.records) blocks_per_day[r.day_id].insert(r.block_id);
    std::map<int, std::pair<int, int>> test_val;  // day -> (test block, val block)
    for (const auto& [day, blocks] : blocks_per_day) {
        if (blocks.size() < 3)
            throw std::invalid_argument("split: day " + std::to_string(day) + " has " +
                                        std::to_string(blocks.size()) + " blocks, need >= 3");
        auto it = blocks.begin();
        const int test_block = *it++;
        const int val_block = *it;
        test_val[day] = {test_block, val_block};
    }
    std::vector<Partition> out;
    out.reserve(manifest.records.size());
    for (const auto& r : manifest.records) {
        const auto [tb, vb] = test_val.at(r.day_id);
        out.push_back(r.block_id == tb ? Partition::Test : r.block_id == vb ? Partition::Val : Partition::Train);
    }
    return out;
}

// ---------------------------------------------------------------------------
// synthetic paired-modality corpus generator
// ---------------------------------------------------------------------------

struct GeneratorConfig {
    std::uint64_t seed = 1234;
    int days = 8;
    int blocks_per_day = 5;
    int sentences_per_block = 20;
    int char_dur_min = 2, char_dur_max = 6;  // frames per character
    std::size_t latent_dim = 8;
    std::size_t channels_a = 16;
    std::size_t channels_b = 32;
    std::size_t excluded_channels_b = 8;  // trailing channels labeled with the excluded region
    double noise_a = 0.05;
    double noise_b = 0.3;
    double day_scale = 0.1;    // per-day distortion D_day = I + scale * R_day
    double block_drift = 0.2;  // per-block constant offset scale

    json to_json() const {
        return json{{"seed", seed},
                    {"days", days},
                    {"blocks_per_day", blocks_per_day},
                    {"sentences_per_block", sentences_per_block},
                    {"char_dur_min", char_dur_min},
                    {"char_dur_max", char_dur_max},
                    {"latent_dim", latent_dim},
                    {"channels_a", channels_a},
                    {"channels_b", channels_b},
                    {"excluded_channels_b", excluded_channels_b},
                    {"noise_a", noise_a},
                    {"noise_b", noise_b},
                    {"day_scale", day_scale},
                    {"block_drift", block_drift}};
    }

    static GeneratorConfig from_json(const json& j) {
        GeneratorConfig c;
        c.seed = j.value("seed", c.seed);
        c.days = j.value("days", c.days);
        c.blocks_per_day = j.value("blocks_per_day", c.blocks_per_day);
        c.sentences_per_block = j.value("sentences_per_block", c.sentences_per_block);
        c.char_dur_min = j.value("char_dur_min", c.char_dur_min);
        c.char_dur_max = j.value("char_dur_max", c.char_dur_max);
        c.latent_dim = j.value("latent_dim", c.latent_dim);
        c.channels_a = j.value("channels_a", c.channels_a);
        c.channels_b = j.value("channels_b", c.channels_b);
        c.excluded_channels_b = j.value("excluded_channels_b", c.excluded_channels_b);
        c.noise_a = j.value("noise_a", c.noise_a);
        c.noise_b = j.value("noise_b", c.noise_b);
        c.day_scale = j.value("day_scale", c.day_scale);
        c.block_drift = j.value("block_drift", c.block_drift);
        return c;
    }

    void check() const {
        if (days < 1 || blocks_per_day < 1 || sentences_per_block < 1)
            throw std::invalid_argument("generator: all counts must be >= 1");
        if (noise_a < 0 || noise_b < 0) throw std::invalid_argument("generator: noise sigma must be >= 0");
        if (char_dur_min < 1 || char_dur_max < char_dur_min)
            throw std::invalid_argument("generator: bad character duration range");
        if (excluded_channels_b >= channels_b)
            throw std::invalid_argument("generator: cannot exclude every modality-B channel");
    }
};

// 50 short words; sentences are 3-6 of them joined by single spaces.
inline const std::vector<std::string>& generator_word_list() {
    static const std::vector<std::string> words = {
        "the",  "and",  "you",   "was",  "for",  "are",  "with", "his",  "they", "this",
        "have", "from", "one",   "had",  "word", "but",  "not",  "what", "all",  "were",
        "when", "your", "can",   "said", "there", "use", "each", "which", "she", "how",
        "their", "will", "other", "about", "out", "many", "then", "them", "these", "some",
        "her",  "would", "make", "like", "him",  "into", "time", "don't", "it's", "two"};
    return words;
}

// Fixed random latent vector per character; the codebook is shared by both
// modalities so cross-modal transfer has actual shared structure.
struct LatentCodebook {
    std::size_t dim = 0;
    std::string alphabet;
    std::vector<double> vectors;  // [alphabet.size() x dim]

    const double* vec(char c) const {
        const auto pos = alphabet.find(c);
        if (pos == std::string::npos)
            throw std::invalid_argument(std::string("codebook: unknown character '") + c + "'");
        return vectors.data() + pos * dim;
    }
};

inline LatentCodebook make_codebook(std::size_t dim, Rng& rng,
                                    const std::string& alphabet = Vocabulary::default_alphabet()) {
    LatentCodebook cb;
    cb.dim = dim;
    cb.alphabet = alphabet;
    cb.vectors.resize(alphabet.size() * dim);
    for (auto& v : cb.vectors) v = rng.normal();
    return cb;
}

// [T x dim] latent frames: each character's codebook vector repeated for its duration
inline std::vector<double> latent_stream(const LatentCodebook& cb, const std::string& transcript,
                                         const std::vector<int>& durations) {
    if (transcript.size() != durations.size())
        throw std::invalid_argument("latent_stream: transcript/duration length mismatch");
    std::size_t total = 0;
    for (int d : durations) total += static_cast<std::size_t>(d);
    std::vector<double> out(total * cb.dim);
    std::size_t t = 0;
    for (std::size_t i = 0; i < transcript.size(); ++i) {
        const double* v = cb.vec(transcript[i]);
        for (int rep = 0; rep < durations[i]; ++rep, ++t)
            std::copy(v, v + cb.dim, out.begin() + t * cb.dim);
    }
    return out;
}

// latents [T x dim] * M [dim x C] (+ optional per-channel mix D [C x C]) + offset + noise
inline FeatureSeq render_features(const std::vector<double>& latents, std::size_t dim,
                                  const std::vector<double>& mix, std::size_t channels,
                                  const std::vector<double>* day_mat, const std::vector<double>* offset,
                                  double sigma, Rng& noise_rng) {
    const std::size_t frames = latents.size() / dim;
    FeatureSeq f(frames, channels);
    std::vector<double> row(channels), mixed(channels);
    for (std::size_t t = 0; t < frames; ++t) {
        std::fill(row.begin(), row.end(), 0.0);
        for (std::size_t l = 0; l < dim; ++l) {
            const double lv = latents[t * dim + l];
            for (std::size_t c = 0; c < channels; ++c) row[c] += lv * mix[l * channels + c];
        }
        if (day_mat) {
            std::fill(mixed.begin(), mixed.end(), 0.0);
            for (std::size_t i = 0; i < channels; ++i) {
                const double rv = row[i];
                for (std::size_t c = 0; c < channels; ++c) mixed[c] += rv * (*day_mat)[i * channels + c];
            }
            row = mixed;
        }
        for (std::size_t c = 0; c < channels; ++c) {
            double v = row[c];
            if (offset) v += (*offset)[c];
            v += sigma * noise_rng.normal();
            f.at(t, c) = static_cast<float>(v);
        }
    }
    return f;
}

// Generates the full paired corpus under out_dir: feature files plus
// manifest.json. Fully deterministic in cfg.seed.
inline CorpusManifest generate_corpus(const GeneratorConfig& cfg, const std::string& out_dir) {
    cfg.check();
    namespace fs = std::filesystem;
    fs::create_directories(fs::path(out_dir) / "features");

    Rng structure_rng(mix_seed(cfg.seed, "structure"));
    Rng transform_rng(mix_seed(cfg.seed, "transform"));
    Rng noise_rng(mix_seed(cfg.seed, "noise"));

    const LatentCodebook codebook = make_codebook(cfg.latent_dim, transform_rng);

    auto random_mix = [&](std::size_t channels) {
        std::vector<double> m(cfg.latent_dim * channels);
        const double s = 1.0 / std::sqrt(static_cast<double>(cfg.latent_dim));
        for (auto& v : m) v = transform_rng.normal() * s;
        return m;
    };
    const std::vector<double> mix_a = random_mix(cfg.channels_a);
    const std::vector<double> mix_b = random_mix(cfg.channels_b);

    // D_day = I + day_scale * R_day with R entries ~ N(0,1)/sqrt(C)
    std::vector<std::vector<double>> day_mats(cfg.days);
    for (int d = 0; d < cfg.days; ++d) {
        auto& m = day_mats[d];
        m.assign(cfg.channels_b * cfg.channels_b, 0.0);
        const double s = cfg.day_scale / std::sqrt(static_cast<double>(cfg.channels_b));
        for (std::size_t i = 0; i < cfg.channels_b; ++i)
            for (std::size_t j = 0; j < cfg.channels_b; ++j)
                m[i * cfg.channels_b + j] = (i == j ? 1.0 : 0.0) + s * transform_rng.normal();
    }

    CorpusManifest manifest;
    manifest.root_dir = out_dir;
    manifest.channels_a = cfg.channels_a;
    manifest.channels_b = cfg.channels_b;
    for (std::size_t c = 0; c < cfg.channels_b; ++c) {
        ChannelInfo info;
        info.group = (c % 2 == 0) ? "txc" : "spw";
        info.region = (c + cfg.excluded_channels_b >= cfg.channels_b) ? "a44" : "6v";
        manifest.channels_b_info.push_back(info);
    }
    if (cfg.excluded_channels_b > 0) manifest.excluded_regions.push_back("a44");

    const auto& words = generator_word_list();
    for (int day = 0; day < cfg.days; ++day) {
        for (int block = 0; block < cfg.blocks_per_day; ++block) {
            std::vector<double> drift(cfg.channels_b);
            for (auto& v : drift) v = cfg.block_drift * transform_rng.normal();
            for (int sent = 0; sent < cfg.sentences_per_block; ++sent) {
                const int word_count = 3 + static_cast<int>(structure_rng.below(4));
                std::string transcript;
                for (int w = 0; w < word_count; ++w) {
                    if (w) transcript += ' ';
                    transcript += words[structure_rng.below(words.size())];
                }
                std::vector<int> durations(transcript.size());
                for (auto& d : durations)
                    d = cfg.char_dur_min +
                        static_cast<int>(structure_rng.below(
                            static_cast<std::uint64_t>(cfg.char_dur_max - cfg.char_dur_min + 1)));

                const auto latents = latent_stream(codebook, transcript, durations);
                const FeatureSeq fa = render_features(latents, cfg.latent_dim, mix_a, cfg.channels_a,
                                                      nullptr, nullptr, cfg.noise_a, noise_rng);
                const FeatureSeq fb =
                    render_features(latents, cfg.latent_dim, mix_b, cfg.channels_b, &day_mats[day],
                                    &drift, cfg.noise_b, noise_rng);

                auto file_of = [&](char mod) {
                    return "features/d" + std::to_string(day) + "_b" + std::to_string(block) + "_s" +
                           std::to_string(sent) + "_" + mod + ".b2tf";
                };
                save_features((fs::path(out_dir) / file_of('A')).string(), fa);
                save_features((fs::path(out_dir) / file_of('B')).string(), fb);

                for (char mod : {'A', 'B'}) {
                    SentenceRecord r;
                    r.day_id = day;
                    r.block_id = block;
                    r.sentence_id = sent;
                    r.transcript = transcript;
                    r.feature_file = file_of(mod);
                    r.modality = mod;
                    manifest.records.push_back(std::move(r));
                }
            }
        }
    }
    manifest.save((fs::path(out_dir) / "manifest.json").string());
    return manifest;
}

// Load one record's features, applying the modality-B channel exclusion mask.
inline FeatureSeq load_record_features(const CorpusManifest& manifest, const SentenceRecord& record) {
    namespace fs = std::filesystem;
    FeatureSeq f = load_features((fs::path(manifest.root_dir) / record.feature_file).string());
    if (record.modality != 'B') return f;
    const auto keep = manifest.included_channels_b();
    if (keep.size() == manifest.channels_b) return f;
    FeatureSeq masked(f.frames, keep.size());
    for (std::size_t t = 0; t < f.frames; ++t)
        for (std::size_t i = 0; i < keep.size(); ++i) masked.at(t, i) = f.at(t, keep[i]);
    return masked;
}

}  // namespace b2t
