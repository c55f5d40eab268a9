#include "maskcal/tensor.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <numeric>

#include "maskcal/util.hpp"

static_assert(std::endian::native == std::endian::little,
              "MSKT I/O assumes a little-endian host");

namespace maskcal {

namespace {

std::size_t dims_product(const std::vector<std::size_t>& dims) {
    std::size_t n = 1;
    for (std::size_t d : dims) n *= d;
    return n;
}

void check_dims(const std::vector<std::size_t>& dims) {
    if (dims.empty()) throw ShapeError("tensor needs at least one dimension");
    for (std::size_t d : dims) {
        if (d == 0) throw ShapeError("zero-length dimension");
    }
}

}  // namespace

Tensor::Tensor(std::vector<std::size_t> dims, double fill) : dims_(std::move(dims)) {
    check_dims(dims_);
    data_.assign(dims_product(dims_), fill);
}

Tensor::Tensor(std::vector<std::size_t> dims, std::vector<double> values)
    : dims_(std::move(dims)), data_(std::move(values)) {
    check_dims(dims_);
    if (dims_product(dims_) != data_.size()) {
        throw ShapeError("dims product does not match value count");
    }
}

Tensor Tensor::image(std::size_t height, std::size_t width, std::size_t channels,
                     double fill) {
    if (channels == 1) return Tensor({height, width}, fill);
    return Tensor({height, width, channels}, fill);
}

std::size_t Tensor::height() const {
    if (ndim() == 1) return 1;
    if (ndim() <= 3) return dims_[0];
    throw ShapeError("not an image tensor");
}

std::size_t Tensor::width() const {
    if (ndim() == 1) return dims_[0];
    if (ndim() <= 3) return dims_[1];
    throw ShapeError("not an image tensor");
}

std::size_t Tensor::channels() const {
    if (ndim() <= 2) return 1;
    if (ndim() == 3) return dims_[2];
    throw ShapeError("not an image tensor");
}

double Tensor::at(std::size_t h, std::size_t w, std::size_t c) const {
    return data_[(h * width() + w) * channels() + c];
}

double& Tensor::at(std::size_t h, std::size_t w, std::size_t c) {
    return data_[(h * width() + w) * channels() + c];
}

Tensor hadamard(const Tensor& a, const Tensor& b) {
    if (!a.same_dims(b)) throw ShapeError("hadamard: dims mismatch");
    Tensor out = a;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] *= b[i];
    return out;
}

double mask_size(const Mask& m) {
    if (m.empty()) throw ShapeError("mask_size of empty mask");
    double acc = 0.0;
    for (double v : m.values()) acc += std::abs(1.0 - v);
    return acc / static_cast<double>(m.size());
}

std::size_t clamp_unit(Tensor& t) {
    std::size_t clamped = 0;
    for (double& v : t.values()) {
        if (v < 0.0) {
            v = 0.0;
            ++clamped;
        } else if (v > 1.0) {
            v = 1.0;
            ++clamped;
        }
    }
    return clamped;
}

Image resample_nearest(const Image& src, std::size_t height, std::size_t width) {
    const std::size_t sh = src.height(), sw = src.width(), c = src.channels();
    if (sh == height && sw == width) return src;
    Image out = Tensor::image(height, width, c);
    for (std::size_t r = 0; r < height; ++r) {
        const std::size_t sr = std::min(sh - 1, (r * sh + sh / 2) / height);
        for (std::size_t col = 0; col < width; ++col) {
            const std::size_t sc = std::min(sw - 1, (col * sw + sw / 2) / width);
            for (std::size_t ch = 0; ch < c; ++ch) {
                out.at(r, col, ch) = src.at(sr, sc, ch);
            }
        }
    }
    return out;
}

Image channel_mean(const Image& img) {
    const std::size_t c = img.channels();
    if (c == 1 && img.ndim() == 2) return img;
    Image out({img.height(), img.width()});
    for (std::size_t h = 0; h < img.height(); ++h) {
        for (std::size_t w = 0; w < img.width(); ++w) {
            double acc = 0.0;
            for (std::size_t ch = 0; ch < c; ++ch) acc += img.at(h, w, ch);
            out.at(h, w) = acc / static_cast<double>(c);
        }
    }
    return out;
}

Tensor broadcast_plane(const Tensor& plane, std::size_t channels) {
    if (plane.channels() != 1) throw ShapeError("broadcast_plane expects a single plane");
    if (channels == 1 && plane.ndim() == 2) return plane;
    Tensor out = Tensor::image(plane.height(), plane.width(), channels);
    for (std::size_t h = 0; h < plane.height(); ++h) {
        for (std::size_t w = 0; w < plane.width(); ++w) {
            for (std::size_t c = 0; c < channels; ++c) {
                out.at(h, w, c) = plane.at(h, w);
            }
        }
    }
    return out;
}

// --------------------------------------------------------------------------
// MSKT I/O
// --------------------------------------------------------------------------

namespace {

constexpr char kMagic[4] = {'M', 'S', 'K', 'T'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void append_raw(std::string& out, T v) {
    char buf[sizeof(T)];
    std::memcpy(buf, &v, sizeof(T));
    out.append(buf, sizeof(T));
}

template <typename T>
T take_raw(const std::string& in, std::size_t& off) {
    if (off + sizeof(T) > in.size()) throw FormatError("MSKT: truncated file");
    T v;
    std::memcpy(&v, in.data() + off, sizeof(T));
    off += sizeof(T);
    return v;
}

}  // namespace

void write_tensor(const std::filesystem::path& path, const Tensor& t, Dtype dtype) {
    for (double v : t.values()) {
        if (!std::isfinite(v)) throw DomainError("write_tensor: non-finite value");
    }
    std::string bytes;
    bytes.reserve(16 + t.size() * 8);
    bytes.append(kMagic, 4);
    append_raw(bytes, kVersion);
    append_raw(bytes, static_cast<std::uint8_t>(dtype));
    if (t.ndim() > 255) throw ShapeError("write_tensor: too many dims");
    append_raw(bytes, static_cast<std::uint8_t>(t.ndim()));
    for (std::size_t d : t.dims()) {
        if (d > std::numeric_limits<std::uint32_t>::max()) {
            throw ShapeError("write_tensor: dimension too large");
        }
        append_raw(bytes, static_cast<std::uint32_t>(d));
    }
    if (dtype == Dtype::f64) {
        for (double v : t.values()) append_raw(bytes, v);
    } else {
        for (double v : t.values()) append_raw(bytes, static_cast<float>(v));
    }
    write_file_atomic(path, bytes);
}

Tensor read_tensor(const std::filesystem::path& path) {
    const std::string bytes = read_file(path);
    std::size_t off = 0;
    if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic, 4) != 0) {
        throw FormatError("MSKT: bad magic in " + path.string());
    }
    off = 4;
    const auto version = take_raw<std::uint32_t>(bytes, off);
    if (version != kVersion) {
        throw FormatError("MSKT: unsupported version " + std::to_string(version));
    }
    const auto dtype = take_raw<std::uint8_t>(bytes, off);
    if (dtype > 1) throw FormatError("MSKT: unknown dtype");
    const auto ndim = take_raw<std::uint8_t>(bytes, off);
    if (ndim == 0) throw FormatError("MSKT: zero-rank tensor");
    std::vector<std::size_t> dims(ndim);
    std::size_t count = 1;
    for (auto& d : dims) {
        const auto v = take_raw<std::uint32_t>(bytes, off);
        if (v == 0) throw FormatError("MSKT: zero-length dimension");
        d = v;
        count *= v;
    }
    const std::size_t elem = dtype == 0 ? 8 : 4;
    if (bytes.size() - off != count * elem) {
        throw FormatError("MSKT: payload size mismatch in " + path.string());
    }
    std::vector<double> values(count);
    for (auto& v : values) {
        v = dtype == 0 ? take_raw<double>(bytes, off)
                       : static_cast<double>(take_raw<float>(bytes, off));
        if (!std::isfinite(v)) throw FormatError("MSKT: non-finite value");
    }
    return Tensor(std::move(dims), std::move(values));
}

// --------------------------------------------------------------------------
// PNM I/O
// --------------------------------------------------------------------------

namespace {

// Reads the next header token, skipping whitespace and '#' comments.
std::string pnm_token(const std::string& in, std::size_t& off) {
    for (;;) {
        while (off < in.size() && std::isspace(static_cast<unsigned char>(in[off]))) ++off;
        if (off < in.size() && in[off] == '#') {
            while (off < in.size() && in[off] != '\n') ++off;
            continue;
        }
        break;
    }
    std::size_t start = off;
    while (off < in.size() && !std::isspace(static_cast<unsigned char>(in[off]))) ++off;
    if (start == off) throw FormatError("PNM: truncated header");
    return in.substr(start, off - start);
}

}  // namespace

Image read_pnm(const std::filesystem::path& path) {
    const std::string bytes = read_file(path);
    std::size_t off = 0;
    const std::string magic = pnm_token(bytes, off);
    std::size_t channels;
    if (magic == "P5") {
        channels = 1;
    } else if (magic == "P6") {
        channels = 3;
    } else {
        throw FormatError("PNM: unsupported magic '" + magic + "'");
    }
    const std::size_t width = std::stoul(pnm_token(bytes, off));
    const std::size_t height = std::stoul(pnm_token(bytes, off));
    const long maxval = std::stol(pnm_token(bytes, off));
    if (maxval != 255 && maxval != 65535) {
        throw FormatError("PNM: maxval must be 255 or 65535");
    }
    ++off;  // single whitespace byte after maxval
    const std::size_t count = width * height * channels;
    const std::size_t elem = maxval == 255 ? 1 : 2;
    if (bytes.size() - off < count * elem) throw FormatError("PNM: truncated payload");
    Image img = Tensor::image(height, width, channels);
    for (std::size_t i = 0; i < count; ++i) {
        std::uint32_t raw;
        if (elem == 1) {
            raw = static_cast<std::uint8_t>(bytes[off + i]);
        } else {
            // 16-bit samples are big-endian per the netpbm spec.
            raw = (static_cast<std::uint8_t>(bytes[off + 2 * i]) << 8) |
                  static_cast<std::uint8_t>(bytes[off + 2 * i + 1]);
        }
        img[i] = static_cast<double>(raw) / static_cast<double>(maxval);
    }
    return img;
}

void write_pnm(const std::filesystem::path& path, const Image& img, int maxval) {
    if (maxval != 255 && maxval != 65535) {
        throw DomainError("PNM: maxval must be 255 or 65535");
    }
    const std::size_t channels = img.channels();
    if (channels != 1 && channels != 3) {
        throw ShapeError("PNM: image must have 1 or 3 channels");
    }
    std::string bytes = channels == 1 ? "P5" : "P6";
    bytes += "\n" + std::to_string(img.width()) + " " + std::to_string(img.height()) +
             "\n" + std::to_string(maxval) + "\n";
    for (double v : img.values()) {
        const double clamped = std::clamp(v, 0.0, 1.0);
        // nearbyint under the default rounding mode is round-half-to-even.
        const auto q = static_cast<std::uint32_t>(std::nearbyint(clamped * maxval));
        if (maxval == 255) {
            bytes.push_back(static_cast<char>(q & 0xff));
        } else {
            bytes.push_back(static_cast<char>((q >> 8) & 0xff));
            bytes.push_back(static_cast<char>(q & 0xff));
        }
    }
    write_file_atomic(path, bytes);
}

}  // namespace maskcal
