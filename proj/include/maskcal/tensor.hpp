#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "maskcal/error.hpp"

namespace maskcal {

// Dense row-major tensor of 64-bit floats. Images are (height, width) or
// (height, width, channels); flat profiles are 1-D. The dims vector is kept
// verbatim so file round-trips preserve the exact rank.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(std::vector<std::size_t> dims, double fill = 0.0);
    Tensor(std::vector<std::size_t> dims, std::vector<double> values);

    static Tensor image(std::size_t height, std::size_t width,
                        std::size_t channels = 1, double fill = 0.0);
    static Tensor ones_like(const Tensor& t) { return Tensor(t.dims_, 1.0); }
    static Tensor zeros_like(const Tensor& t) { return Tensor(t.dims_, 0.0); }

    const std::vector<std::size_t>& dims() const { return dims_; }
    std::size_t ndim() const { return dims_.size(); }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    // Image-style views of the dims (1-D -> 1 x n x 1, 2-D -> h x w x 1).
    std::size_t height() const;
    std::size_t width() const;
    std::size_t channels() const;

    double operator[](std::size_t i) const { return data_[i]; }
    double& operator[](std::size_t i) { return data_[i]; }
    double at(std::size_t h, std::size_t w, std::size_t c = 0) const;
    double& at(std::size_t h, std::size_t w, std::size_t c = 0);

    std::span<const double> values() const { return data_; }
    std::span<double> values() { return data_; }

    bool same_dims(const Tensor& other) const { return dims_ == other.dims_; }

private:
    std::vector<std::size_t> dims_;
    std::vector<double> data_;
};

using Image = Tensor;
using Mask = Tensor;

// Element-wise product; throws ShapeError on mismatched dims.
Tensor hadamard(const Tensor& a, const Tensor& b);

// Average removed mass: sum(1 - m) / n. All-ones -> 0, all-zeros -> 1.
double mask_size(const Mask& m);

// Clamps every entry into [0, 1] in place; returns how many were out of range.
std::size_t clamp_unit(Tensor& t);

// Nearest-neighbor spatial resampling; channels are preserved.
Image resample_nearest(const Image& src, std::size_t height, std::size_t width);

// Collapses channels to their mean, yielding an (h, w, 1) plane.
Image channel_mean(const Image& img);

// Repeats an (h, w) or (h, w, 1) plane across `channels`.
Tensor broadcast_plane(const Tensor& plane, std::size_t channels);

// ---------------------------------------------------------------------------
// MSKT tensor file format (little-endian):
//   magic "MSKT" | u32 version=1 | u8 dtype (0=f64, 1=f32) | u8 ndim |
//   u32 dims[ndim] | payload, row-major
// ---------------------------------------------------------------------------

enum class Dtype : std::uint8_t { f64 = 0, f32 = 1 };

void write_tensor(const std::filesystem::path& path, const Tensor& t,
                  Dtype dtype = Dtype::f64);
Tensor read_tensor(const std::filesystem::path& path);

// PNM import/export (P5 grayscale, P6 RGB; maxval 255 or 65535). Reading
// scales into [0, 1]; writing quantizes with round-half-to-even.
Image read_pnm(const std::filesystem::path& path);
void write_pnm(const std::filesystem::path& path, const Image& img, int maxval = 255);

}  // namespace maskcal
