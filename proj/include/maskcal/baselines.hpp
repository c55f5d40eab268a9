#pragma once

#include <filesystem>
#include <span>
#include <utility>

#include "maskcal/dataset.hpp"
#include "maskcal/distortion.hpp"
#include "maskcal/masker.hpp"

namespace maskcal {

// Largest uniform scalar mu in [0, 1] such that at least a beta fraction of
// the calibration set satisfies d(mu*y, mu*y_hat) <= alpha. Uses the p-norm
// scaling identity d(mu*y, mu*y_hat) = mu^p d(y, y_hat) and the conservative
// order statistic at index ceil(beta * (K + 1)).
double uni_scalar_from_distortions(std::vector<double> distortions, double p,
                                   double alpha, double beta);
double uni_scalar(const TripletDataset& data, const DistortionSpec& d, double alpha,
                  double beta, Split split = Split::calibration);

// Pinball loss rho_tau(u) = u * (tau - 1[u < 0]).
double pinball_loss(double u, double tau);

// Two per-pixel regressors for the lower (0.05) and upper (0.95) conditional
// quantiles of y given (x, y_hat), trained with the pinball loss.
struct QuantileModel {
    MaskerModel lower;
    MaskerModel upper;
    double lower_level = 0.05;
    double upper_level = 0.95;

    void save(const std::filesystem::path& path) const;
    static QuantileModel load(const std::filesystem::path& path);
};

struct QuantileTrainResult {
    QuantileModel model;
    std::vector<double> lower_epoch_loss;
    std::vector<double> upper_epoch_loss;
};

QuantileTrainResult train_quantile(const TripletDataset& data, const TrainConfig& cfg,
                                   Split split = Split::train);

// Raw per-pixel (lower, upper) planes; swapped per pixel so upper >= lower.
std::pair<Tensor, Tensor> predict_quantile_planes(const QuantileModel& model,
                                                  const Image& x, const Image& y_hat);

// Interval widths turned into a heuristic mask: m_i = 1 - w_i / max(max w, 1e-12),
// so the widest interval is the most masked pixel.
Mask quantile_heuristic_mask(const QuantileModel& model, const Image& x,
                             const Image& y_hat);

}  // namespace maskcal
