#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "b2t/feature.hpp"
#include "b2t/model.hpp"

namespace b2t {

// Checkpoint container: magic "NTCK", u32 version, u32 header length, JSON
// header (config, vocab, day ids, epoch, metrics), then parameter blobs as
// little-endian 32-bit reals in declaration order.

namespace detail {

constexpr std::uint32_t kCheckpointVersion = 1;

template <class T>
void write_blobs(std::ostream& os, const NamedParams<T>& params) {
    std::vector<float> buf;
    for (const auto& [name, p] : params) {
        buf.resize(p.numel());
        for (std::size_t i = 0; i < buf.size(); ++i) buf[i] = static_cast<float>(p.value()[i]);
        os.write(reinterpret_cast<const char*>(buf.data()),
                 static_cast<std::streamsize>(buf.size() * sizeof(float)));
    }
}

template <class T>
void read_blobs(std::istream& is, const std::string& path, NamedParams<T>& params) {
    std::vector<float> buf;
    for (auto& [name, p] : params) {
        buf.resize(p.numel());
        if (!is.read(reinterpret_cast<char*>(buf.data()),
                     static_cast<std::streamsize>(buf.size() * sizeof(float))))
            throw TruncationError(path + ": truncated parameter blob for " + name);
        for (std::size_t i = 0; i < buf.size(); ++i) p.value()[i] = static_cast<T>(buf[i]);
    }
    is.peek();
    if (!is.eof()) throw FeatureFileError(path + ": trailing bytes after parameter blobs");
}

template <class T>
json param_index(const NamedParams<T>& params) {
    json out = json::array();
    for (const auto& [name, p] : params) out.push_back({{"name", name}, {"size", p.numel()}});
    return out;
}

inline void write_header(std::ostream& os, const json& header) {
    os.write("NTCK", 4);
    put_u32(os, kCheckpointVersion);
    const std::string h = header.dump();
    put_u32(os, static_cast<std::uint32_t>(h.size()));
    os.write(h.data(), static_cast<std::streamsize>(h.size()));
}

inline json read_header(std::istream& is, const std::string& path) {
    char magic[4];
    if (!is.read(magic, 4)) throw TruncationError(path + ": truncated before magic");
    if (std::memcmp(magic, "NTCK", 4) != 0) throw BadMagicError(path + ": bad checkpoint magic");
    const std::uint32_t version = get_u32(is, path + " version");
    if (version != kCheckpointVersion)
        throw FeatureFileError(path + ": unsupported checkpoint version " + std::to_string(version));
    const std::uint32_t hlen = get_u32(is, path + " header length");
    std::string h(hlen, '\0');
    if (!is.read(h.data(), hlen)) throw TruncationError(path + ": truncated header");
    return json::parse(h);
}

}  // namespace detail

template <class T>
void save_checkpoint(const std::string& path, const BrainDecoder<T>& model, int epoch,
                     const json& metrics, const std::string& regime) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw FeatureFileError("cannot open checkpoint for writing: " + path);
    const auto params = model.named_params();
    json header{{"kind", "decoder"},
                {"config", model.cfg.to_json()},
                {"vocab", model.vocab.alphabet()},
                {"day_ids", model.day_ids()},
                {"input_channels", model.input_channels},
                {"epoch", epoch},
                {"metrics", metrics},
                {"regime", regime},
                {"params", detail::param_index(params)}};
    detail::write_header(os, header);
    detail::write_blobs(os, params);
    if (!os) throw FeatureFileError("checkpoint write failed: " + path);
}

template <class T>
void save_checkpoint(const std::string& path, const PretrainModel<T>& model, int epoch,
                     const json& metrics) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw FeatureFileError("cannot open checkpoint for writing: " + path);
    const auto params = model.named_params();
    json header{{"kind", "pretrain"},
                {"config", model.cfg.to_json()},
                {"vocab", model.vocab.alphabet()},
                {"input_channels", model.input_channels},
                {"epoch", epoch},
                {"metrics", metrics},
                {"params", detail::param_index(params)}};
    detail::write_header(os, header);
    detail::write_blobs(os, params);
    if (!os) throw FeatureFileError("checkpoint write failed: " + path);
}

template <class T>
struct LoadedDecoder {
    BrainDecoder<T> model;
    json header;
};

template <class T>
struct LoadedPretrain {
    PretrainModel<T> model;
    json header;
};

namespace detail {

template <class T>
void check_and_read(std::istream& is, const std::string& path, const json& header,
                    NamedParams<T>& params) {
    const auto& index = header.at("params");
    if (index.size() != params.size())
        throw FeatureFileError(path + ": parameter count mismatch with header");
    for (std::size_t i = 0; i < params.size(); ++i) {
        if (index[i].at("name") != params[i].first ||
            index[i].at("size") != params[i].second.numel())
            throw FeatureFileError(path + ": parameter layout mismatch at " + params[i].first);
    }
    read_blobs(is, path, params);
}

}  // namespace detail

template <class T>
LoadedDecoder<T> load_decoder_checkpoint(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw FeatureFileError("cannot open checkpoint: " + path);
    json header = detail::read_header(is, path);
    if (header.at("kind") != "decoder")
        throw FeatureFileError(path + ": expected a decoder checkpoint, got " +
                               header.at("kind").get<std::string>());
    LoadedDecoder<T> out;
    const ModelConfig cfg = ModelConfig::from_json(header.at("config"));
    const Vocabulary vocab(header.at("vocab").get<std::string>());
    const auto days = header.at("day_ids").get<std::vector<int>>();
    out.model = build_model<T>(cfg, vocab, days, header.at("input_channels"), /*seed=*/0);
    auto params = out.model.named_params();
    detail::check_and_read(is, path, header, params);
    out.header = std::move(header);
    return out;
}

template <class T>
LoadedPretrain<T> load_pretrain_checkpoint(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw FeatureFileError("cannot open checkpoint: " + path);
    json header = detail::read_header(is, path);
    if (header.at("kind") != "pretrain")
        throw FeatureFileError(path + ": expected a pretrain checkpoint, got " +
                               header.at("kind").get<std::string>());
    LoadedPretrain<T> out;
    const TrunkConfig cfg = TrunkConfig::from_json(header.at("config"));
    const Vocabulary vocab(header.at("vocab").get<std::string>());
    out.model = PretrainModel<T>(cfg, vocab, header.at("input_channels"), /*seed=*/0);
    auto params = out.model.named_params();
    detail::check_and_read(is, path, header, params);
    out.header = std::move(header);
    return out;
}

// Copies trunk and LM-head parameters from a pretraining model into a decoder.
template <class T>
void load_pretrained_trunk(BrainDecoder<T>& decoder, const PretrainModel<T>& pretrained) {
    NamedParams<T> src_params = pretrained.named_params();
    std::map<std::string, Tensor<T>> src(src_params.begin(), src_params.end());
    for (auto& [name, p] : decoder.named_params()) {
        if (name.rfind("trunk.", 0) != 0 && name.rfind("lm_head.", 0) != 0) continue;
        auto it = src.find(name);
        if (it == src.end() || it->second.numel() != p.numel())
            throw std::invalid_argument("pretrained checkpoint does not provide parameter " + name +
                                        " with matching shape");
        p.value() = it->second.value();
    }
}

}  // namespace b2t
