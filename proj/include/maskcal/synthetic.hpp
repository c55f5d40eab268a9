#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "maskcal/dataset.hpp"
#include "maskcal/distortion.hpp"
#include "maskcal/tensor.hpp"

namespace maskcal {

// Synthetic triplets with an analytically known conditional error law:
//   y_hat: smooth random field in [0.25, 0.75]
//   s:     smooth positive per-pixel noise scale, jittered per record
//   y:     clamp(y_hat + noise(s))
//   x:     channel stack of (y_hat, s), so the true uncertainty is learnable
struct SyntheticSpec {
    std::size_t height = 16;
    std::size_t width = 16;

    enum class Noise { gaussian, laplace };
    Noise noise = Noise::gaussian;
    double scale_min = 0.01;
    double scale_max = 0.05;
    // Per-record multiplier on the scale field, uniform in this range.
    double level_min = 0.6;
    double level_max = 1.4;

    int field_smoothness = 2;  // box-blur radius for the random fields
    std::uint64_t seed = 0;

    std::size_t train_count = 0;
    std::size_t calibration_count = 0;
    std::size_t test_count = 0;

    void save(const std::filesystem::path& path) const;
    static SyntheticSpec load(const std::filesystem::path& path);
};

std::string to_string(SyntheticSpec::Noise n);
SyntheticSpec::Noise parse_noise(const std::string& s);

struct SyntheticRecord {
    std::string id;
    Split split = Split::train;
    Image x;      // (h, w, 2)
    Image y_hat;  // (h, w)
    Image y;      // (h, w)
    Tensor scale;  // (h, w), the true per-pixel noise scale
};

// Record `index` of the dataset described by spec; fully determined by
// (spec.seed XOR index).
SyntheticRecord generate_record(const SyntheticSpec& spec, std::size_t index);

// Writes all records as MSKT tensors plus a JSONL manifest and one sidecar
// JSON per record pointing at its true scale field. Returns the dataset.
TripletDataset generate_dataset(const SyntheticSpec& spec,
                                const std::filesystem::path& out_dir);

// E|X|^p for X ~ noise(scale), the pre-clamp law.
double expected_abs_moment(SyntheticSpec::Noise noise, double scale, double p);

struct McEstimate {
    double mean = 0.0;
    double std_error = 0.0;
};

// Monte-Carlo estimate of E[d_m(y, y_hat)] over y = y_hat + noise(scale).
// Draws follow the pre-clamp law unless clamp_draws is set.
McEstimate mc_expected_masked_distortion(const Mask& m, const Image& y_hat,
                                         SyntheticSpec::Noise noise, const Tensor& scale,
                                         const DistortionSpec& d, std::size_t draws,
                                         std::uint64_t seed, bool clamp_draws = false);

}  // namespace maskcal
