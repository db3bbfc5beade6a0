#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "b2t/feature.hpp"

namespace b2t {

struct BlockStats {
    std::vector<double> mean, stddev;      // per feature, pooled over the block
    std::vector<bool> constant;            // std below threshold
    static constexpr double kConstEps = 1e-8;
};

// Feature- and recording-block-wise z-scoring: pooled per-feature mean 0 and
// (population) std 1 across all frames of the block. Constant features map to 0.
inline BlockStats zscore_block(std::vector<FeatureSeq>& block) {
    if (block.empty()) throw std::invalid_argument("zscore_block: empty block");
    const std::size_t channels = block.front().channels;
    for (const auto& f : block)
        if (f.channels != channels)
            throw std::invalid_argument("zscore_block: inconsistent channel counts within block");

    BlockStats stats;
    stats.mean.assign(channels, 0.0);
    stats.stddev.assign(channels, 0.0);
    stats.constant.assign(channels, false);

    std::size_t total_frames = 0;
    for (const auto& f : block) {
        total_frames += f.frames;
        for (std::size_t t = 0; t < f.frames; ++t)
            for (std::size_t c = 0; c < channels; ++c) stats.mean[c] += f.at(t, c);
    }
    if (total_frames == 0) throw std::invalid_argument("zscore_block: block has no frames");
    for (std::size_t c = 0; c < channels; ++c) stats.mean[c] /= static_cast<double>(total_frames);

    for (const auto& f : block)
        for (std::size_t t = 0; t < f.frames; ++t)
            for (std::size_t c = 0; c < channels; ++c) {
                const double d = f.at(t, c) - stats.mean[c];
                stats.stddev[c] += d * d;
            }
    for (std::size_t c = 0; c < channels; ++c) {
        stats.stddev[c] = std::sqrt(stats.stddev[c] / static_cast<double>(total_frames));
        stats.constant[c] = stats.stddev[c] < BlockStats::kConstEps;
    }

    for (auto& f : block)
        for (std::size_t t = 0; t < f.frames; ++t)
            for (std::size_t c = 0; c < channels; ++c)
                f.at(t, c) = stats.constant[c]
                                 ? 0.0f
                                 : static_cast<float>((f.at(t, c) - stats.mean[c]) / stats.stddev[c]);
    return stats;
}

// Causal exponential re-normalization tracking within-block feature drift.
// The first `warmup_frames` frames of a block pass through unchanged while a
// plain sample estimate of mean/variance accumulates; that estimate seeds the
// exponential stats, which are then updated (decay `lambda`) before each
// frame is normalized. lambda = 1 keeps the warm-up stats fixed.
struct RollingState {
    std::size_t channels = 0;
    double lambda = 0.99;
    double epsilon = 1e-6;
    std::size_t warmup_frames = 50;

    std::size_t seen = 0;                  // frames consumed so far
    std::vector<double> warm_sum, warm_sq;  // accumulators during warm-up
    std::vector<double> mean, var;          // exponential stats after warm-up

    RollingState() = default;
    explicit RollingState(std::size_t c, double lambda_ = 0.99, double epsilon_ = 1e-6,
                          std::size_t warmup = 50)
        : channels(c),
          lambda(lambda_),
          epsilon(epsilon_),
          warmup_frames(warmup),
          warm_sum(c, 0.0),
          warm_sq(c, 0.0),
          mean(c, 0.0),
          var(c, 1.0) {}

    template <class Json>
    Json to_json() const {
        Json j;
        j["channels"] = channels;
        j["lambda"] = lambda;
        j["epsilon"] = epsilon;
        j["warmup_frames"] = warmup_frames;
        j["seen"] = seen;
        j["warm_sum"] = warm_sum;
        j["warm_sq"] = warm_sq;
        j["mean"] = mean;
        j["var"] = var;
        return j;
    }

    template <class Json>
    static RollingState from_json(const Json& j) {
        RollingState s;
        s.channels = j["channels"];
        s.lambda = j["lambda"];
        s.epsilon = j["epsilon"];
        s.warmup_frames = j["warmup_frames"];
        s.seen = j["seen"];
        s.warm_sum = j["warm_sum"].template get<std::vector<double>>();
        s.warm_sq = j["warm_sq"].template get<std::vector<double>>();
        s.mean = j["mean"].template get<std::vector<double>>();
        s.var = j["var"].template get<std::vector<double>>();
        return s;
    }
};

inline FeatureSeq rolling_adapt(RollingState& state, const FeatureSeq& x) {
    if (x.channels != state.channels)
        throw std::invalid_argument("rolling_adapt: channel count " + std::to_string(x.channels) +
                                    " does not match state " + std::to_string(state.channels));
    FeatureSeq out(x.frames, x.channels);
    for (std::size_t t = 0; t < x.frames; ++t) {
        if (state.seen < state.warmup_frames) {
            for (std::size_t c = 0; c < x.channels; ++c) {
                const double v = x.at(t, c);
                state.warm_sum[c] += v;
                state.warm_sq[c] += v * v;
                out.at(t, c) = x.at(t, c);
            }
            ++state.seen;
            if (state.seen == state.warmup_frames) {
                const double n = static_cast<double>(state.warmup_frames);
                for (std::size_t c = 0; c < x.channels; ++c) {
                    state.mean[c] = state.warm_sum[c] / n;
                    state.var[c] = std::max(0.0, state.warm_sq[c] / n - state.mean[c] * state.mean[c]);
                }
            }
            continue;
        }
        for (std::size_t c = 0; c < x.channels; ++c) {
            const double v = x.at(t, c);
            state.mean[c] = state.lambda * state.mean[c] + (1.0 - state.lambda) * v;
            const double d = v - state.mean[c];
            state.var[c] = state.lambda * state.var[c] + (1.0 - state.lambda) * d * d;
            const double sd = std::sqrt(std::max(state.var[c], 0.0));
            out.at(t, c) = static_cast<float>((v - state.mean[c]) / std::max(sd, state.epsilon));
        }
        ++state.seen;
    }
    return out;
}

}  // namespace b2t
