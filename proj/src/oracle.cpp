#include "maskcal/oracle.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>

namespace maskcal {

OracleStalled::OracleStalled(OracleResult best_result)
    : Error("oracle: target distortion not attained within max_iters (best " +
            std::to_string(best_result.final_distortion) + ")"),
      best(std::move(best_result)) {}

OracleResult optimize_mask(const Image& y, const Image& y_hat, const DistortionSpec& d,
                           const OracleConfig& cfg) {
    if (!y.same_dims(y_hat)) throw ShapeError("optimize_mask: dims mismatch");
    if (!(cfg.step_size > 0.0)) throw DomainError("optimize_mask: step_size must be > 0");
    if (!(cfg.mu > 0.0)) throw DomainError("optimize_mask: mu must be > 0");
    if (!(cfg.moment_decay_1 > 0.0 && cfg.moment_decay_1 < 1.0) ||
        !(cfg.moment_decay_2 > 0.0 && cfg.moment_decay_2 < 1.0)) {
        throw DomainError("optimize_mask: moment decays must lie in (0, 1)");
    }

    Mask m = Tensor::ones_like(y);
    double dist = masked_distortion(d, m, y, y_hat);
    if (dist <= cfg.target_alpha) {
        return {std::move(m), 0, dist, true};
    }

    OracleResult best{m, 0, dist, false};
    const std::size_t n = m.size();
    std::vector<double> m1(n, 0.0), m2(n, 0.0);
    double b1t = 1.0, b2t = 1.0;

    for (std::size_t t = 1; t <= cfg.max_iters; ++t) {
        Tensor grad = masked_distortion_grad(d, m, y, y_hat);
        for (std::size_t i = 0; i < n; ++i) {
            grad[i] = 2.0 * (m[i] - 1.0) + cfg.mu * grad[i];
        }
        b1t *= cfg.moment_decay_1;
        b2t *= cfg.moment_decay_2;
        for (std::size_t i = 0; i < n; ++i) {
            m1[i] = cfg.moment_decay_1 * m1[i] + (1.0 - cfg.moment_decay_1) * grad[i];
            m2[i] = cfg.moment_decay_2 * m2[i] + (1.0 - cfg.moment_decay_2) * grad[i] * grad[i];
            const double m1_hat = m1[i] / (1.0 - b1t);
            const double m2_hat = m2[i] / (1.0 - b2t);
            m[i] -= cfg.step_size * m1_hat / (std::sqrt(m2_hat) + cfg.epsilon_adam);
            m[i] = std::clamp(m[i], 0.0, 1.0);
            assert(m[i] >= 0.0 && m[i] <= 1.0);
        }
        dist = masked_distortion(d, m, y, y_hat);
        if (dist < best.final_distortion) {
            best = {m, t, dist, false};
        }
        if (dist <= cfg.target_alpha) {
            return {std::move(m), t, dist, true};
        }
    }
    throw OracleStalled(std::move(best));
}

}  // namespace maskcal
