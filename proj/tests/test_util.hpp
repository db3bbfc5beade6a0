#pragma once

#include <atomic>
#include <filesystem>
#include <string>
#include <vector>

#include <unistd.h>

#include "b2t/rng.hpp"
#include "b2t/tensor.hpp"

// fresh scratch directory per guard, removed on destruction
struct TempDirGuard {
    std::filesystem::path path;

    TempDirGuard() {
        static std::atomic<int> counter{0};
        path = std::filesystem::temp_directory_path() /
               ("b2t_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
        std::filesystem::remove_all(path);
        std::filesystem::create_directories(path);
    }
    ~TempDirGuard() {
        std::error_code ec;
        std::filesystem::remove_all(path, ec);
    }
    std::string str() const { return path.string(); }
    std::string file(const std::string& name) const { return (path / name).string(); }
};

namespace testutil {

inline b2t::Tensor<double> random_tensor(b2t::Shape shape, b2t::Rng& rng, double scale = 1.0,
                                         bool requires_grad = true) {
    auto t = b2t::Tensor<double>::zeros(std::move(shape), requires_grad);
    for (auto& v : t.value()) v = rng.normal() * scale;
    return t;
}

inline b2t::Tensor<float> random_tensor32(b2t::Shape shape, b2t::Rng& rng, float scale = 1.0f) {
    auto t = b2t::Tensor<float>::zeros(std::move(shape), true);
    for (auto& v : t.value()) v = static_cast<float>(rng.normal()) * scale;
    return t;
}

}  // namespace testutil
