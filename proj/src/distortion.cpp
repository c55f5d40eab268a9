#include "maskcal/distortion.hpp"

#include <cmath>
#include <cstdio>
#include <vector>

namespace maskcal {

DistortionSpec DistortionSpec::pnorm(double p) {
    if (!(p >= 1.0)) throw DomainError("pnorm requires p >= 1");
    return {Kind::pnorm, p};
}

std::string DistortionSpec::id() const {
    if (kind == Kind::ssim) return "ssim";
    if (p == 1.0) return "l1";
    if (p == 2.0) return "l2";
    char buf[32];
    std::snprintf(buf, sizeof(buf), "pnorm:%g", p);
    return buf;
}

DistortionSpec DistortionSpec::parse(std::string_view id) {
    if (id == "l1") return l1();
    if (id == "l2") return l2();
    if (id == "ssim") return ssim();
    if (id.rfind("pnorm:", 0) == 0) {
        const std::string num(id.substr(6));
        char* end = nullptr;
        const double p = std::strtod(num.c_str(), &end);
        if (end == num.c_str() || *end != '\0') {
            throw DomainError("bad distortion id '" + std::string(id) + "'");
        }
        return pnorm(p);
    }
    throw DomainError("unknown distortion id '" + std::string(id) + "'");
}

double pnorm_distortion(const Image& a, const Image& b, double p) {
    if (!a.same_dims(b)) throw ShapeError("pnorm_distortion: dims mismatch");
    if (!(p >= 1.0)) throw DomainError("pnorm_distortion requires p >= 1");
    double acc = 0.0;
    if (p == 1.0) {
        for (std::size_t i = 0; i < a.size(); ++i) acc += std::abs(a[i] - b[i]);
    } else if (p == 2.0) {
        for (std::size_t i = 0; i < a.size(); ++i) {
            const double e = a[i] - b[i];
            acc += e * e;
        }
    } else {
        for (std::size_t i = 0; i < a.size(); ++i) {
            acc += std::pow(std::abs(a[i] - b[i]), p);
        }
    }
    return acc;
}

// --------------------------------------------------------------------------
// SSIM
// --------------------------------------------------------------------------

namespace {

constexpr int kWindow = 11;
constexpr double kSigma = 1.5;
constexpr double kC1 = 0.01 * 0.01;  // (K1 * L)^2, L = 1
constexpr double kC2 = 0.03 * 0.03;

const std::vector<double>& gaussian_kernel() {
    static const std::vector<double> kernel = [] {
        std::vector<double> k(kWindow);
        double sum = 0.0;
        for (int i = 0; i < kWindow; ++i) {
            const double d = i - (kWindow - 1) / 2.0;
            k[i] = std::exp(-d * d / (2.0 * kSigma * kSigma));
            sum += k[i];
        }
        for (double& v : k) v /= sum;
        return k;
    }();
    return kernel;
}

// Separable valid-region Gaussian filter of one channel plane.
// in: h x w values; out: (h-10) x (w-10).
std::vector<double> gaussian_valid(const std::vector<double>& in, std::size_t h,
                                   std::size_t w) {
    const auto& k = gaussian_kernel();
    const std::size_t ow = w - kWindow + 1;
    const std::size_t oh = h - kWindow + 1;
    std::vector<double> mid(h * ow);
    for (std::size_t r = 0; r < h; ++r) {
        for (std::size_t c = 0; c < ow; ++c) {
            double acc = 0.0;
            for (int i = 0; i < kWindow; ++i) acc += k[i] * in[r * w + c + i];
            mid[r * ow + c] = acc;
        }
    }
    std::vector<double> out(oh * ow);
    for (std::size_t r = 0; r < oh; ++r) {
        for (std::size_t c = 0; c < ow; ++c) {
            double acc = 0.0;
            for (int i = 0; i < kWindow; ++i) acc += k[i] * mid[(r + i) * ow + c];
            out[r * ow + c] = acc;
        }
    }
    return out;
}

double mssim_plane(const std::vector<double>& a, const std::vector<double>& b,
                   std::size_t h, std::size_t w) {
    std::vector<double> aa(a.size()), bb(b.size()), ab(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        aa[i] = a[i] * a[i];
        bb[i] = b[i] * b[i];
        ab[i] = a[i] * b[i];
    }
    const auto mu1 = gaussian_valid(a, h, w);
    const auto mu2 = gaussian_valid(b, h, w);
    const auto e_aa = gaussian_valid(aa, h, w);
    const auto e_bb = gaussian_valid(bb, h, w);
    const auto e_ab = gaussian_valid(ab, h, w);
    double acc = 0.0;
    for (std::size_t i = 0; i < mu1.size(); ++i) {
        const double m1 = mu1[i], m2 = mu2[i];
        const double s1 = e_aa[i] - m1 * m1;
        const double s2 = e_bb[i] - m2 * m2;
        const double s12 = e_ab[i] - m1 * m2;
        acc += ((2.0 * m1 * m2 + kC1) * (2.0 * s12 + kC2)) /
               ((m1 * m1 + m2 * m2 + kC1) * (s1 + s2 + kC2));
    }
    return acc / static_cast<double>(mu1.size());
}

}  // namespace

double ssim_distortion(const Image& a, const Image& b) {
    if (!a.same_dims(b)) throw ShapeError("ssim_distortion: dims mismatch");
    const std::size_t h = a.height(), w = a.width(), c = a.channels();
    if (h < kWindow || w < kWindow) {
        throw ShapeError("ssim_distortion: image smaller than 11x11 window");
    }
    double mssim = 0.0;
    std::vector<double> pa(h * w), pb(h * w);
    for (std::size_t ch = 0; ch < c; ++ch) {
        for (std::size_t r = 0; r < h; ++r) {
            for (std::size_t col = 0; col < w; ++col) {
                pa[r * w + col] = a.at(r, col, ch);
                pb[r * w + col] = b.at(r, col, ch);
            }
        }
        mssim += mssim_plane(pa, pb, h, w);
    }
    return 1.0 - mssim / static_cast<double>(c);
}

double distortion(const DistortionSpec& d, const Image& a, const Image& b) {
    if (d.kind == DistortionSpec::Kind::ssim) return ssim_distortion(a, b);
    return pnorm_distortion(a, b, d.p);
}

double masked_distortion(const DistortionSpec& d, const Mask& m, const Image& y,
                         const Image& y_hat) {
    return distortion(d, hadamard(m, y), hadamard(m, y_hat));
}

Tensor masked_distortion_grad(const DistortionSpec& d, const Mask& m, const Image& y,
                              const Image& y_hat) {
    if (!m.same_dims(y) || !y.same_dims(y_hat)) {
        throw ShapeError("masked_distortion_grad: dims mismatch");
    }
    Tensor grad = Tensor::zeros_like(m);
    if (d.kind == DistortionSpec::Kind::pnorm) {
        const double p = d.p;
        if (!(p >= 1.0)) throw DomainError("masked_distortion_grad requires p >= 1");
        for (std::size_t i = 0; i < m.size(); ++i) {
            const double e = std::abs(y[i] - y_hat[i]);
            if (p == 1.0) {
                // subgradient convention sign(0) = 0
                const double sgn = m[i] > 0.0 ? 1.0 : (m[i] < 0.0 ? -1.0 : 0.0);
                grad[i] = sgn * e;
            } else if (p == 2.0) {
                grad[i] = 2.0 * m[i] * e * e;
            } else {
                const double am = std::abs(m[i]);
                const double sgn = m[i] > 0.0 ? 1.0 : (m[i] < 0.0 ? -1.0 : 0.0);
                grad[i] = p * sgn * std::pow(am, p - 1.0) * std::pow(e, p);
            }
        }
        return grad;
    }
    // SSIM: central finite differences over each mask entry.
    const double step = 1e-5;
    Tensor probe = m;
    for (std::size_t i = 0; i < m.size(); ++i) {
        const double orig = probe[i];
        probe[i] = orig + step;
        const double hi = masked_distortion(d, probe, y, y_hat);
        probe[i] = orig - step;
        const double lo = masked_distortion(d, probe, y, y_hat);
        probe[i] = orig;
        grad[i] = (hi - lo) / (2.0 * step);
    }
    return grad;
}

}  // namespace maskcal
