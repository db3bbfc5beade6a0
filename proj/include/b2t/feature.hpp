#pragma once

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace b2t {

// Per-frame feature matrix at the 20 ms frame rate, row-major [frames x channels].
struct FeatureSeq {
    std::size_t frames = 0, channels = 0;
    std::vector<float> data;

    FeatureSeq() = default;
    FeatureSeq(std::size_t t, std::size_t c) : frames(t), channels(c), data(t * c, 0.0f) {}

    float& at(std::size_t t, std::size_t c) { return data[t * channels + c]; }
    float at(std::size_t t, std::size_t c) const { return data[t * channels + c]; }
};

class FeatureFileError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};
class BadMagicError : public FeatureFileError {
public:
    using FeatureFileError::FeatureFileError;
};
class TruncationError : public FeatureFileError {
public:
    using FeatureFileError::FeatureFileError;
};
class NanPayloadError : public FeatureFileError {
public:
    using FeatureFileError::FeatureFileError;
};
class EmptySequenceError : public FeatureFileError {
public:
    using FeatureFileError::FeatureFileError;
};

namespace detail {

inline void put_u32(std::ostream& os, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
    os.write(reinterpret_cast<const char*>(b), 4);
}

inline std::uint32_t get_u32(std::istream& is, const std::string& what) {
    unsigned char b[4];
    if (!is.read(reinterpret_cast<char*>(b), 4))
        throw TruncationError("truncated while reading " + what);
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

}  // namespace detail

// Binary feature format: magic "B2TF", u32 version=1, u32 T, u32 C, then
// T*C little-endian 32-bit reals, row-major frames.
inline void save_features(const std::string& path, const FeatureSeq& f) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw FeatureFileError("cannot open for writing: " + path);
    os.write("B2TF", 4);
    detail::put_u32(os, 1);
    detail::put_u32(os, static_cast<std::uint32_t>(f.frames));
    detail::put_u32(os, static_cast<std::uint32_t>(f.channels));
    static_assert(sizeof(float) == 4);
    os.write(reinterpret_cast<const char*>(f.data.data()),
             static_cast<std::streamsize>(f.data.size() * sizeof(float)));
    if (!os) throw FeatureFileError("write failed: " + path);
}

inline FeatureSeq load_features(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw FeatureFileError("cannot open: " + path);
    char magic[4];
    if (!is.read(magic, 4)) throw TruncationError(path + ": truncated before magic");
    if (std::memcmp(magic, "B2TF", 4) != 0) throw BadMagicError(path + ": bad magic");
    const std::uint32_t version = detail::get_u32(is, path + " version");
    if (version != 1)
        throw FeatureFileError(path + ": unsupported version " + std::to_string(version));
    const std::uint32_t t = detail::get_u32(is, path + " frame count");
    const std::uint32_t c = detail::get_u32(is, path + " channel count");
    if (t == 0) throw EmptySequenceError(path + ": empty sequence (T=0)");
    if (c == 0) throw FeatureFileError(path + ": zero channels");
    FeatureSeq f(t, c);
    if (!is.read(reinterpret_cast<char*>(f.data.data()),
                 static_cast<std::streamsize>(f.data.size() * sizeof(float))))
        throw TruncationError(path + ": truncated payload");
    is.peek();
    if (!is.eof()) throw FeatureFileError(path + ": trailing bytes after payload");
    for (float v : f.data)
        if (!std::isfinite(v)) throw NanPayloadError(path + ": non-finite value in payload");
    return f;
}

}  // namespace b2t
