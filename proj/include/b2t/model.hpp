#pragma once

#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "b2t/feature.hpp"
#include "b2t/layers.hpp"
#include "b2t/rng.hpp"
#include "b2t/vocab.hpp"

namespace b2t {

using nlohmann::json;

// ---------------------------------------------------------------------------
// configuration
// ---------------------------------------------------------------------------

struct TrunkConfig {
    std::size_t width = 64;
    std::size_t blocks = 2;
    std::size_t heads = 4;
    std::size_t ff_width = 128;
    std::size_t max_len = 512;
    double dropout = 0.1;

    json to_json() const {
        return json{{"width", width},   {"blocks", blocks},   {"heads", heads},
                    {"ff_width", ff_width}, {"max_len", max_len}, {"dropout", dropout}};
    }
    static TrunkConfig from_json(const json& j) {
        TrunkConfig c;
        c.width = j.value("width", c.width);
        c.blocks = j.value("blocks", c.blocks);
        c.heads = j.value("heads", c.heads);
        c.ff_width = j.value("ff_width", c.ff_width);
        c.max_len = j.value("max_len", c.max_len);
        c.dropout = j.value("dropout", c.dropout);
        return c;
    }
};

struct BFEConfig {
    std::size_t gru_layers = 1;
    std::size_t gru_hidden = 32;
    std::vector<std::size_t> fc_hidden;  // widths of hidden FC layers before the final projection

    std::string id() const {
        std::string s = "g" + std::to_string(gru_layers) + "h" + std::to_string(gru_hidden) + "_fc";
        if (fc_hidden.empty()) s += "none";
        for (std::size_t i = 0; i < fc_hidden.size(); ++i)
            s += (i ? "-" : "") + std::to_string(fc_hidden[i]);
        return s;
    }

    json to_json() const {
        return json{{"gru_layers", gru_layers}, {"gru_hidden", gru_hidden}, {"fc_hidden", fc_hidden}};
    }
    static BFEConfig from_json(const json& j) {
        BFEConfig c;
        c.gru_layers = j.value("gru_layers", c.gru_layers);
        c.gru_hidden = j.value("gru_hidden", c.gru_hidden);
        c.fc_hidden = j.value("fc_hidden", c.fc_hidden);
        return c;
    }

    bool operator==(const BFEConfig& o) const {
        return gru_layers == o.gru_layers && gru_hidden == o.gru_hidden && fc_hidden == o.fc_hidden;
    }
};

struct ModelConfig {
    BFEConfig bfe;
    TrunkConfig trunk;

    json to_json() const { return json{{"bfe", bfe.to_json()}, {"trunk", trunk.to_json()}}; }
    static ModelConfig from_json(const json& j) {
        ModelConfig c;
        c.bfe = BFEConfig::from_json(j.at("bfe"));
        c.trunk = TrunkConfig::from_json(j.at("trunk"));
        return c;
    }
};

// The 45 architectures swept in paper mode:
// GRU depth {1,3,5} x hidden {256,512,1024} x FC stack {[],[128],[256],[512],[512,128]}.
inline std::vector<BFEConfig> enumerate_paper_grid() {
    std::vector<BFEConfig> grid;
    for (std::size_t layers : {1, 3, 5})
        for (std::size_t hidden : {256, 512, 1024})
            for (const auto& fc : std::vector<std::vector<std::size_t>>{{}, {128}, {256}, {512}, {512, 128}})
                grid.push_back({layers, hidden, fc});
    return grid;
}

// CPU-tractable grid with the same 3 x 3 x |fc| structure.
inline std::vector<BFEConfig> enumerate_desk_grid() {
    std::vector<BFEConfig> grid;
    for (std::size_t layers : {1, 2, 3})
        for (std::size_t hidden : {16, 32, 64})
            for (const auto& fc : std::vector<std::vector<std::size_t>>{{}, {16}, {32}})
                grid.push_back({layers, hidden, fc});
    return grid;
}

enum class Regime { FullFineTune, FrozenTrunk, Scratch };

inline const char* regime_name(Regime r) {
    switch (r) {
        case Regime::FullFineTune: return "fft";
        case Regime::FrozenTrunk: return "frozen";
        default: return "scratch";
    }
}

inline Regime regime_from_name(const std::string& s) {
    if (s == "fft") return Regime::FullFineTune;
    if (s == "frozen") return Regime::FrozenTrunk;
    if (s == "scratch") return Regime::Scratch;
    throw std::invalid_argument("unknown regime '" + s + "' (expected fft|frozen|scratch)");
}

// ---------------------------------------------------------------------------
// model parts
// ---------------------------------------------------------------------------

template <class T>
struct Trunk {
    TrunkConfig cfg;
    PositionalEncoding<T> pos;
    std::vector<TransformerBlock<T>> blocks;
    Tensor<T> ln_g, ln_b;  // final pre-logits norm

    Trunk() = default;
    Trunk(const TrunkConfig& c, Rng& rng)
        : cfg(c),
          pos(c.max_len, c.width, rng),
          ln_g(Tensor<T>::filled({c.width}, T(1), true)),
          ln_b(Tensor<T>::zeros({c.width}, true)) {
        if (c.width % c.heads != 0)
            throw std::invalid_argument("trunk width " + std::to_string(c.width) +
                                        " not divisible by heads " + std::to_string(c.heads));
        for (std::size_t i = 0; i < c.blocks; ++i)
            blocks.emplace_back(c.width, c.heads, c.ff_width, c.dropout, rng);
    }

    Tensor<T> forward(const Tensor<T>& x, Rng* drop_rng = nullptr) const {
        Tensor<T> h = pos.forward(x);
        for (const auto& b : blocks) h = b.forward(h, h.shape()[0], drop_rng);
        return layer_norm(h, ln_g, ln_b);
    }

    void collect_params(const std::string& prefix, NamedParams<T>& out) const {
        pos.collect_params(prefix + ".pos", out);
        for (std::size_t i = 0; i < blocks.size(); ++i)
            blocks[i].collect_params(prefix + ".block" + std::to_string(i), out);
        out.emplace_back(prefix + ".ln_g", ln_g);
        out.emplace_back(prefix + ".ln_b", ln_b);
    }
};

// Brain Feature Extractor: bidirectional GRU stack, optional hidden FC layers
// with GELU, and a final linear projection to the trunk width.
template <class T>
struct Bfe {
    BFEConfig cfg;
    std::vector<GruLayer<T>> grus;
    std::vector<Linear<T>> hidden_fcs;
    Linear<T> proj;

    Bfe() = default;
    Bfe(const BFEConfig& c, std::size_t input_dim, std::size_t trunk_width, Rng& rng) : cfg(c) {
        std::size_t dim = input_dim;
        for (std::size_t i = 0; i < c.gru_layers; ++i) {
            grus.emplace_back(dim, c.gru_hidden, /*bidirectional=*/true, rng);
            dim = grus.back().out_dim();
        }
        for (std::size_t w : c.fc_hidden) {
            hidden_fcs.emplace_back(dim, w, rng);
            dim = w;
        }
        proj = Linear<T>(dim, trunk_width, rng);
    }

    Tensor<T> forward(const Tensor<T>& x) const {
        Tensor<T> h = x;
        for (const auto& g : grus) h = gru_forward(g, h);
        for (const auto& fc : hidden_fcs) h = gelu_op(fc.forward(h));
        return proj.forward(h);
    }

    void collect_params(const std::string& prefix, NamedParams<T>& out) const {
        for (std::size_t i = 0; i < grus.size(); ++i)
            grus[i].collect_params(prefix + ".gru" + std::to_string(i), out);
        for (std::size_t i = 0; i < hidden_fcs.size(); ++i)
            hidden_fcs[i].collect_params(prefix + ".fc" + std::to_string(i), out);
        proj.collect_params(prefix + ".proj", out);
    }
};

// ---------------------------------------------------------------------------
// full decoder: day layer -> BFE -> trunk -> LM head
// ---------------------------------------------------------------------------

template <class T>
class BrainDecoder {
public:
    ModelConfig cfg;
    Vocabulary vocab;
    std::size_t input_channels = 0;
    std::map<int, Linear<T>> day_layers;  // square C x C, one per recording day
    Bfe<T> bfe;
    Trunk<T> trunk;
    Linear<T> lm_head;

    BrainDecoder() = default;

    Tensor<T> forward(const Tensor<T>& x, int day_id, Rng* drop_rng = nullptr) const {
        auto it = day_layers.find(day_id);
        if (it == day_layers.end())
            throw std::invalid_argument("forward: unknown day id " + std::to_string(day_id));
        if (x.rank() != 2 || x.shape()[1] != input_channels)
            throw std::invalid_argument("forward: input " + shape_str(x.shape()) + " does not match C=" +
                                        std::to_string(input_channels));
        Tensor<T> h = it->second.forward(x);
        h = bfe.forward(h);
        h = trunk.forward(h, drop_rng);
        return lm_head.forward(h);
    }

    std::vector<int> day_ids() const {
        std::vector<int> out;
        for (const auto& [d, _] : day_layers) out.push_back(d);
        return out;
    }

    // declaration order: day layers (ascending id), bfe, trunk, lm_head
    NamedParams<T> named_params() const {
        NamedParams<T> out;
        for (const auto& [d, layer] : day_layers)
            layer.collect_params("day." + std::to_string(d), out);
        bfe.collect_params("bfe", out);
        trunk.collect_params("trunk", out);
        lm_head.collect_params("lm_head", out);
        return out;
    }

    std::size_t param_count() const {
        std::size_t n = 0;
        for (const auto& [name, p] : named_params()) n += p.numel();
        return n;
    }
};

inline bool frozen_under(const std::string& param_name, Regime regime) {
    if (regime != Regime::FrozenTrunk) return false;
    return param_name.rfind("trunk.", 0) == 0 || param_name.rfind("lm_head.", 0) == 0;
}

// FrozenTrunk excludes trunk and lm_head from optimization; the other regimes
// train everything. Day layers and BFE are always trainable.
template <class T>
NamedParams<T> trainable_parameters(const BrainDecoder<T>& model, Regime regime) {
    NamedParams<T> out;
    for (auto& [name, p] : model.named_params())
        if (!frozen_under(name, regime)) out.emplace_back(name, p);
    return out;
}

template <class T>
BrainDecoder<T> build_model(const ModelConfig& cfg, const Vocabulary& vocab, const std::vector<int>& days,
                            std::size_t input_channels, std::uint64_t seed) {
    if (days.empty()) throw std::invalid_argument("build_model: no recording days");
    if (cfg.trunk.width % cfg.trunk.heads != 0)
        throw std::invalid_argument("build_model: trunk width " + std::to_string(cfg.trunk.width) +
                                    " not divisible by heads " + std::to_string(cfg.trunk.heads));
    Rng rng(mix_seed(seed, "model"));
    BrainDecoder<T> m;
    m.cfg = cfg;
    m.vocab = vocab;
    m.input_channels = input_channels;
    std::vector<int> sorted_days = days;
    std::sort(sorted_days.begin(), sorted_days.end());
    for (int d : sorted_days) {
        // near-identity start: session drift correction begins as a pass-through
        Linear<T> layer(input_channels, input_channels, rng);
        for (std::size_t i = 0; i < input_channels; ++i)
            for (std::size_t j = 0; j < input_channels; ++j)
                layer.W.at(i, j) = static_cast<T>((i == j ? 1.0 : 0.0) + 0.01 * rng.normal());
        m.day_layers.emplace(d, std::move(layer));
    }
    m.bfe = Bfe<T>(cfg.bfe, input_channels, cfg.trunk.width, rng);
    m.trunk = Trunk<T>(cfg.trunk, rng);
    m.lm_head = Linear<T>(cfg.trunk.width, vocab.size(), rng);
    return m;
}

// ---------------------------------------------------------------------------
// surrogate pretraining model: linear front-end -> trunk -> LM head
// ---------------------------------------------------------------------------

template <class T>
class PretrainModel {
public:
    TrunkConfig cfg;
    Vocabulary vocab;
    std::size_t input_channels = 0;
    Linear<T> frontend;
    Trunk<T> trunk;
    Linear<T> lm_head;

    PretrainModel() = default;
    PretrainModel(const TrunkConfig& c, const Vocabulary& v, std::size_t channels, std::uint64_t seed)
        : cfg(c), vocab(v), input_channels(channels) {
        Rng rng(mix_seed(seed, "pretrain-model"));
        frontend = Linear<T>(channels, c.width, rng);
        trunk = Trunk<T>(c, rng);
        lm_head = Linear<T>(c.width, v.size(), rng);
    }

    Tensor<T> forward(const Tensor<T>& x, Rng* drop_rng = nullptr) const {
        return lm_head.forward(trunk.forward(frontend.forward(x), drop_rng));
    }

    NamedParams<T> named_params() const {
        NamedParams<T> out;
        frontend.collect_params("frontend", out);
        trunk.collect_params("trunk", out);
        lm_head.collect_params("lm_head", out);
        return out;
    }
};

template <class T>
Tensor<T> to_tensor(const FeatureSeq& f) {
    std::vector<T> data(f.data.begin(), f.data.end());
    return Tensor<T>::from({f.frames, f.channels}, std::move(data));
}

}  // namespace b2t
