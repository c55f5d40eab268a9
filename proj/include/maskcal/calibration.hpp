#pragma once

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "maskcal/dataset.hpp"
#include "maskcal/distortion.hpp"
#include "maskcal/tensor.hpp"

namespace maskcal {

// How a global lambda turns a heuristic mask into a calibrated mask.
//   ratio:   m_i = clamp(lambda / (eps + 1 - m_theta_i))
//   uniform: m_i = clamp(lambda * m_theta_i)   (the all-ones heuristic reduces
//            to a single uniform scalar, matching the UNI baseline)
enum class MaskForm { ratio, uniform_scale };

std::string to_string(MaskForm f);
MaskForm parse_mask_form(const std::string& s);

Mask calibrated_mask(const Mask& m_theta, double lambda, double eps = 1e-6);
Mask scaled_mask(const Mask& m_theta, double lambda);
Mask apply_mask_form(MaskForm form, const Mask& m_theta, double lambda, double eps);

struct LambdaResult {
    double lambda = 0.0;
    // False only when the predicate fails even at the lower bound lambda=eps.
    bool feasible = true;
};

// Largest lambda in [eps, 1/eps] whose calibrated-mask distortion stays
// <= alpha, found by bisection over the midpoint until the bracket width
// drops below eps. Requires a mask-monotone distortion; SSIM callers must
// use scan_lambda instead.
LambdaResult find_lambda(const Mask& m_theta, const Image& y, const Image& y_hat,
                         const DistortionSpec& d, double alpha, double eps = 1e-3,
                         double eps_denominator = 1e-6, MaskForm form = MaskForm::ratio);

// Conservative fallback for non-monotone distortions: evaluates the predicate
// on a geometric grid over [eps, 1/eps] and returns the largest grid point
// such that it and every smaller grid point pass.
LambdaResult scan_lambda(const Mask& m_theta, const Image& y, const Image& y_hat,
                         const DistortionSpec& d, double alpha, double eps = 1e-3,
                         double eps_denominator = 1e-6, MaskForm form = MaskForm::ratio,
                         std::size_t grid_points = 1024);

struct ConformalLambda {
    double lambda = 0.0;
    std::size_t index = 0;  // 1-based order-statistic index
};

// Conservative lower order statistic of the per-sample lambdas at 1-based
// index floor((1 - beta) * (K + 1)), clamped into [1, K].
ConformalLambda conformal_lambda(std::vector<double> lambdas, double beta);

struct CalibrationResult {
    double lambda = 0.0;
    std::vector<double> lambdas_per_sample;  // ascending record-id order
    double alpha = 0.0;
    double beta = 0.0;
    std::string distortion_id;
    double epsilon_denominator = 1e-6;
    double bisection_eps = 1e-3;
    std::size_t sample_count = 0;
    std::size_t quantile_index = 0;  // 1-based
    std::string heuristic;
    MaskForm form = MaskForm::ratio;
    std::size_t infeasible_count = 0;

    void save(const std::filesystem::path& path) const;
    static CalibrationResult load(const std::filesystem::path& path);
};

struct CalibrateOptions {
    double alpha = 0.0;
    double beta = 0.9;
    DistortionSpec distortion = DistortionSpec::l1();
    double bisection_eps = 1e-3;
    double epsilon_denominator = 1e-6;
    MaskForm form = MaskForm::ratio;
    std::string heuristic_id;
    std::size_t threads = 1;
};

using HeuristicFn = std::function<Mask(const LoadedTriplet&)>;

// Full calibration pass: per-record maximal lambda_k in ascending id order
// (bisection when the distortion is mask-monotone, grid scan otherwise),
// then the conformal order statistic. Infeasible records contribute
// lambda_k = eps and are counted.
CalibrationResult calibrate(const TripletDataset& data, Split split,
                            const HeuristicFn& heuristic, const CalibrateOptions& opts);

Mask apply_calibration(const Mask& m_theta, const CalibrationResult& result);

}  // namespace maskcal
