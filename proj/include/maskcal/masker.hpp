#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <vector>

#include "maskcal/dataset.hpp"
#include "maskcal/distortion.hpp"
#include "maskcal/tensor.hpp"

namespace maskcal {

// Per-pixel features on the channel-averaged planes of (x, y_hat):
//   x value, y_hat value, 3x3 local mean of y_hat, 3x3 local std of y_hat,
//   central-difference gradient magnitude of y_hat, |x - y_hat|, bias 1.
// Neighborhoods use reflect padding at the borders.
inline constexpr std::size_t kFeatureDim = 7;
inline constexpr int kFeatureVersion = 1;

struct FeatureGrid {
    std::size_t height = 0;
    std::size_t width = 0;
    std::vector<double> values;  // pixels() rows of kFeatureDim

    std::size_t pixels() const { return height * width; }
    std::span<const double> row(std::size_t i) const {
        return {values.data() + i * kFeatureDim, kFeatureDim};
    }
};

// x must already be on y_hat's spatial grid (use resample_nearest otherwise).
FeatureGrid extract_features(const Image& x, const Image& y_hat);

// Shallow per-pixel regressor: linear in the features or a one-hidden-layer
// tanh MLP. The mask path squashes the raw output into [0,1] by clamping.
struct MaskerModel {
    enum class Kind { linear, mlp };

    Kind kind = Kind::linear;
    std::size_t input_dim = kFeatureDim;
    std::size_t hidden = 0;  // mlp only
    std::vector<double> weights;
    int feature_version = kFeatureVersion;

    static MaskerModel linear(std::size_t input_dim = kFeatureDim);
    static MaskerModel mlp(std::size_t hidden, std::uint64_t seed,
                           std::size_t input_dim = kFeatureDim);

    double raw(std::span<const double> f) const;
    // Accumulates upstream * d(raw)/d(weights) into grad.
    void accumulate_grad(std::span<const double> f, double upstream,
                         std::span<double> grad) const;

    void save(const std::filesystem::path& path) const;
    static MaskerModel load(const std::filesystem::path& path);
};

struct TrainConfig {
    double mu = 2.0;
    double learning_rate = 0.0;  // 0 -> 1e-2 for linear, 1e-3 for mlp
    std::size_t batch_size = 25;
    std::size_t epochs = 60;
    std::uint64_t seed = 0;
    DistortionSpec distortion = DistortionSpec::l2();  // p-norm only
    MaskerModel::Kind kind = MaskerModel::Kind::linear;
    std::size_t hidden = 8;
};

class TrainingDiverged : public Error {
public:
    TrainingDiverged(std::string msg, std::vector<double> loss_trace);
    std::vector<double> trace;
};

struct TrainResult {
    MaskerModel model;
    std::vector<double> epoch_loss;
};

// Minimizes sum over records of ||m_theta - 1||_2^2 + mu * d_{m_theta}(y, y_hat)
// by mini-batch SGD. Gradients pass through the output clamp with the
// convention that they are zeroed where the raw value is outside [0, 1].
TrainResult train_masker(const TripletDataset& data, const TrainConfig& cfg,
                         Split split = Split::train);

Mask predict_mask(const MaskerModel& model, const Image& x, const Image& y_hat);

// --- shared SGD driver (also used by the quantile baseline) ----------------

// One training sample: a feature grid plus whatever per-pixel payload the
// loss needs (errors for the masker, targets for quantile heads).
struct PixelSample {
    FeatureGrid features;
    std::vector<double> payload;  // one value per plane pixel
    std::size_t channels = 1;     // channel multiplicity of the original image
};

// loss(raw, payload, channels, d_loss_d_raw) -> per-pixel loss value.
using PixelLoss =
    std::function<double(double raw, double payload, std::size_t channels, double& d_raw)>;

// Generic per-pixel SGD: per-record gradients are normalized by the entry
// count so the learning rate is insensitive to image size.
std::vector<double> sgd_train(MaskerModel& model, const std::vector<PixelSample>& samples,
                              const PixelLoss& loss, double learning_rate,
                              std::size_t batch_size, std::size_t epochs,
                              std::uint64_t seed);

}  // namespace maskcal
