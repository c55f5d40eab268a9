#pragma once

#include <span>
#include <vector>

#include "maskcal/error.hpp"

namespace maskcal {

// Per-pixel expected errors d_i = E[|y_i - y_hat_i|^p] plus the constraint
// level alpha for the constrained mask problem.
struct ErrorProfile {
    std::vector<double> d;
    double p = 2.0;
    double alpha = 0.0;
};

struct MaskSolution {
    std::vector<double> mask;
    // Set when alpha already exceeds the unmasked constraint value sum(d);
    // the mask is all-ones and nothing was solved.
    bool no_masking_needed = false;
};

// Closed-form solution of the p > 1 problem:
//   m_i = alpha^(1/p) * q_i / (sum_j q_j)^(1/p),  q_j = d_j^(-1/(p-1)).
// Coordinates that exceed 1 are clamped and the remainder re-solved with the
// budget reduced by their exact contribution, iterated to a fixpoint.
// Zero-error pixels are pre-assigned m = 1 and removed from the solve.
MaskSolution closed_form_mask(const ErrorProfile& profile);

// p = 1 solution: include pixels by ascending d_i (ties by index) while the
// cumulative included error stays <= alpha; everything else is masked.
// alpha <= 0 yields the all-zeros mask.
std::vector<double> binary_mask(const ErrorProfile& profile);

// sum_i m_i^-(p-1); requires p > 1 and every m_i > 0.
double uncertainty_from_mask(std::span<const double> m, double p);

}  // namespace maskcal
