#pragma once

#include <string>
#include <string_view>

#include "maskcal/tensor.hpp"

namespace maskcal {

// Pluggable distortion measure. The p-norm family is sum_i |a_i - b_i|^p
// (raw sum, no per-pixel normalization); "ssim" is 1 - MSSIM.
struct DistortionSpec {
    enum class Kind { pnorm, ssim };

    Kind kind = Kind::pnorm;
    double p = 1.0;

    // True iff d(m*y, m*y_hat) is coordinate-wise nondecreasing in m.
    // Holds for p-norms; not claimed for SSIM.
    bool monotone_in_mask() const { return kind == Kind::pnorm; }

    std::string id() const;
    static DistortionSpec parse(std::string_view id);

    static DistortionSpec l1() { return {Kind::pnorm, 1.0}; }
    static DistortionSpec l2() { return {Kind::pnorm, 2.0}; }
    static DistortionSpec pnorm(double p);
    static DistortionSpec ssim() { return {Kind::ssim, 0.0}; }
};

double pnorm_distortion(const Image& a, const Image& b, double p);

// 1 - MSSIM with an 11x11 Gaussian window (sigma 1.5), K1=0.01, K2=0.03,
// dynamic range 1, valid-region averaging. Channels are scored independently
// and averaged.
double ssim_distortion(const Image& a, const Image& b);

double distortion(const DistortionSpec& d, const Image& a, const Image& b);

// d applied to the element-wise masked pair.
double masked_distortion(const DistortionSpec& d, const Mask& m, const Image& y,
                         const Image& y_hat);

// Gradient of the masked distortion with respect to the mask. Analytic for
// p-norms (p=1 uses the sign(0)=0 subgradient); central finite differences
// with step 1e-5 for SSIM.
Tensor masked_distortion_grad(const DistortionSpec& d, const Mask& m, const Image& y,
                              const Image& y_hat);

}  // namespace maskcal
