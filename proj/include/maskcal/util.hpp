#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <random>
#include <string>
#include <vector>

namespace maskcal {

// Deterministic random source shared by the synthetic generator and training.
// All distributions are implemented on top of the raw 64-bit stream so the
// output is identical across standard library implementations.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    // Uniform in [0, 1).
    double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

    // Uniform in [lo, hi).
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Standard normal via Box-Muller (no cached spare, call order stable).
    double normal();

    // Zero-mean Laplace with scale b via inverse CDF.
    double laplace(double b);

    // Uniform integer in [0, n).
    std::size_t index(std::size_t n);

    std::uint64_t raw() { return gen_(); }

private:
    std::mt19937_64 gen_;
};

// Per-record seed derivation: base seed XOR record index, passed through a
// splitmix64 finalizer. The raw XOR alone would make nearby seeds produce
// permutations of the same record set.
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index) {
    std::uint64_t z = base ^ (index * 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

// Runs fn(i) for i in [0, count) on up to `threads` workers. Results must be
// written to preallocated per-index slots so the outcome does not depend on
// the thread count.
void parallel_for(std::size_t count, std::size_t threads,
                  const std::function<void(std::size_t)>& fn);

// Writes bytes to a sibling temp file and renames it into place.
void write_file_atomic(const std::filesystem::path& path, const std::string& bytes);

std::string read_file(const std::filesystem::path& path);

}  // namespace maskcal
