#pragma once

#include <atomic>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <random>
#include <string>
#include <unistd.h>

#include "maskcal/tensor.hpp"

namespace testutil {

// Scratch directory removed on scope exit.
class TempDir {
public:
    TempDir() {
        static std::atomic<unsigned> counter{0};
        path_ = std::filesystem::temp_directory_path() /
                ("maskcal_test_" + std::to_string(::getpid()) + "_" +
                 std::to_string(counter.fetch_add(1)));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

inline maskcal::Tensor random_tensor(std::mt19937_64& gen, std::vector<std::size_t> dims,
                                     double lo = 0.0, double hi = 1.0) {
    maskcal::Tensor t(std::move(dims));
    std::uniform_real_distribution<double> dist(lo, hi);
    for (auto& v : t.values()) v = dist(gen);
    return t;
}

}  // namespace testutil
