#pragma once

#include <algorithm>
#include <map>
#include <string>
#include <vector>

#include "b2t/data.hpp"
#include "b2t/preprocess.hpp"
#include "b2t/vocab.hpp"

namespace b2t {

struct PreprocessConfig {
    double lambda = 0.99;
    double epsilon = 1e-6;
    std::size_t warmup_frames = 50;

    json to_json() const {
        return json{{"lambda", lambda}, {"epsilon", epsilon}, {"warmup_frames", warmup_frames}};
    }
    static PreprocessConfig from_json(const json& j) {
        PreprocessConfig c;
        c.lambda = j.value("lambda", c.lambda);
        c.epsilon = j.value("epsilon", c.epsilon);
        c.warmup_frames = j.value("warmup_frames", c.warmup_frames);
        return c;
    }
};

struct DatasetItem {
    int day_id = 0, block_id = 0, sentence_id = 0;
    Partition partition = Partition::Train;
    FeatureSeq features;  // z-scored and drift-adapted
    std::string transcript;
    std::vector<int> tokens;
};

struct Dataset {
    std::vector<DatasetItem> items;
    std::size_t channels = 0;
    std::vector<int> day_ids;
    Vocabulary vocab;

    std::vector<const DatasetItem*> partition(Partition p) const {
        std::vector<const DatasetItem*> out;
        for (const auto& it : items)
            if (it.partition == p) out.push_back(&it);
        return out;
    }

    std::vector<std::string> transcripts(Partition p) const {
        std::vector<std::string> out;
        for (const auto& it : items)
            if (it.partition == p) out.push_back(it.transcript);
        return out;
    }
};

// Loads one modality of a corpus into memory with the full non-learned
// conditioning applied: channel mask, per-block z-scoring (each partition's
// blocks use their own statistics), then causal rolling adaptation threaded
// through each block in sentence order.
inline Dataset load_dataset(const CorpusManifest& manifest, char modality,
                            const PreprocessConfig& pp = {}, const Vocabulary& vocab = Vocabulary()) {
    manifest.validate(vocab);
    const auto partitions = split(manifest);

    struct Loaded {
        const SentenceRecord* rec;
        Partition part;
        std::size_t order;
    };
    std::map<std::pair<int, int>, std::vector<Loaded>> blocks;  // (day, block) -> records
    for (std::size_t i = 0; i < manifest.records.size(); ++i) {
        const auto& r = manifest.records[i];
        if (r.modality != modality) continue;
        blocks[{r.day_id, r.block_id}].push_back({&r, partitions[i], i});
    }
    if (blocks.empty())
        throw std::invalid_argument(std::string("load_dataset: no records for modality '") + modality +
                                    "'");

    Dataset ds;
    ds.vocab = vocab;
    std::set<int> days;
    for (auto& [key, recs] : blocks) {
        std::sort(recs.begin(), recs.end(),
                  [](const Loaded& a, const Loaded& b) { return a.rec->sentence_id < b.rec->sentence_id; });
        std::vector<FeatureSeq> feats;
        feats.reserve(recs.size());
        for (const auto& l : recs) feats.push_back(load_record_features(manifest, *l.rec));
        zscore_block(feats);
        RollingState state(feats.front().channels, pp.lambda, pp.epsilon, pp.warmup_frames);
        for (std::size_t i = 0; i < recs.size(); ++i) {
            DatasetItem item;
            item.day_id = recs[i].rec->day_id;
            item.block_id = recs[i].rec->block_id;
            item.sentence_id = recs[i].rec->sentence_id;
            item.partition = recs[i].part;
            item.transcript = recs[i].rec->transcript;
            item.tokens = vocab.encode(item.transcript);
            item.features = rolling_adapt(state, feats[i]);
            ds.items.push_back(std::move(item));
            days.insert(key.first);
        }
    }
    ds.channels = ds.items.front().features.channels;
    ds.day_ids.assign(days.begin(), days.end());
    return ds;
}

}  // namespace b2t
