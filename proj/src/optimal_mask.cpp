#include "maskcal/optimal_mask.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace maskcal {

namespace {

void validate_profile(const ErrorProfile& profile, bool need_p_above_1) {
    if (profile.d.empty()) throw DomainError("empty error profile");
    for (double v : profile.d) {
        if (!(v >= 0.0)) throw DomainError("error profile entries must be >= 0");
    }
    if (need_p_above_1 && !(profile.p > 1.0)) {
        throw DomainError("closed_form_mask requires p > 1");
    }
}

}  // namespace

MaskSolution closed_form_mask(const ErrorProfile& profile) {
    validate_profile(profile, true);
    if (!(profile.alpha > 0.0)) throw DomainError("closed_form_mask requires alpha > 0");

    const std::size_t n = profile.d.size();
    const double p = profile.p;
    const double total = std::accumulate(profile.d.begin(), profile.d.end(), 0.0);
    if (profile.alpha >= total) {
        return {std::vector<double>(n, 1.0), true};
    }

    MaskSolution out;
    out.mask.assign(n, 1.0);

    // Free coordinates still being solved; zero-error pixels stay at 1.
    std::vector<std::size_t> free;
    free.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        if (profile.d[i] > 0.0) free.push_back(i);
    }
    double budget = profile.alpha;

    std::vector<double> q(n, 0.0);
    for (std::size_t i : free) q[i] = std::pow(profile.d[i], -1.0 / (p - 1.0));

    while (!free.empty()) {
        double q_sum = 0.0;
        for (std::size_t i : free) q_sum += q[i];
        const double scale = std::pow(budget, 1.0 / p) / std::pow(q_sum, 1.0 / p);

        std::vector<std::size_t> clamped;
        for (std::size_t i : free) {
            const double v = scale * q[i];
            if (v > 1.0) {
                clamped.push_back(i);
            } else {
                out.mask[i] = v;
            }
        }
        if (clamped.empty()) break;

        // Clamp violators to 1 and rerun on the rest with the budget reduced
        // by their exact constraint contribution.
        for (std::size_t i : clamped) {
            out.mask[i] = 1.0;
            budget -= profile.d[i];
        }
        std::vector<std::size_t> next;
        next.reserve(free.size() - clamped.size());
        std::size_t k = 0;
        for (std::size_t i : free) {
            if (k < clamped.size() && clamped[k] == i) {
                ++k;
            } else {
                next.push_back(i);
            }
        }
        free = std::move(next);
    }
    return out;
}

std::vector<double> binary_mask(const ErrorProfile& profile) {
    validate_profile(profile, false);
    if (profile.p != 1.0) throw DomainError("binary_mask requires p = 1");
    const std::size_t n = profile.d.size();
    std::vector<double> mask(n, 0.0);
    if (!(profile.alpha > 0.0)) return mask;

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return profile.d[a] < profile.d[b];
    });

    // Tiny relative slack so exact-arithmetic boundary cases (cumulative sum
    // equal to alpha) are not lost to floating-point rounding.
    const double limit = profile.alpha * (1.0 + 1e-12);
    double cumulative = 0.0;
    for (std::size_t i : order) {
        if (cumulative + profile.d[i] > limit) break;
        cumulative += profile.d[i];
        mask[i] = 1.0;
    }
    return mask;
}

double uncertainty_from_mask(std::span<const double> m, double p) {
    if (!(p > 1.0)) throw DomainError("uncertainty_from_mask requires p > 1");
    if (m.empty()) throw DomainError("empty mask");
    double acc = 0.0;
    for (double v : m) {
        if (!(v > 0.0)) throw DomainError("uncertainty_from_mask requires m_i > 0");
        acc += std::pow(v, -(p - 1.0));
    }
    return acc;
}

}  // namespace maskcal
