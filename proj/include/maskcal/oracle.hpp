#pragma once

#include <cstddef>

#include "maskcal/distortion.hpp"
#include "maskcal/tensor.hpp"

namespace maskcal {

struct OracleConfig {
    double mu = 2.0;
    double step_size = 0.01;
    std::size_t max_iters = 10000;
    double target_alpha = 0.0;
    double moment_decay_1 = 0.9;
    double moment_decay_2 = 0.999;
    double epsilon_adam = 1e-8;
};

struct OracleResult {
    Mask mask;
    std::size_t iterations = 0;
    double final_distortion = 0.0;
    bool converged = true;
};

// Thrown when the iteration budget runs out before the target distortion is
// attained; carries the best (lowest-distortion) iterate seen.
class OracleStalled : public Error {
public:
    explicit OracleStalled(OracleResult best_result);
    OracleResult best;
};

// First-order minimization of ||m - 1||_2^2 + mu * d_m(y, y_hat) with
// adaptive moments, starting from the all-ones mask, projecting into [0,1]^n
// after every step, and stopping at the first iterate whose masked distortion
// is <= target_alpha.
OracleResult optimize_mask(const Image& y, const Image& y_hat, const DistortionSpec& d,
                           const OracleConfig& cfg);

}  // namespace maskcal
