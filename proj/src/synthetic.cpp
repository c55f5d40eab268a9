#include "maskcal/synthetic.hpp"

#include <algorithm>
#include <cmath>

#include <json.hpp>

#include "maskcal/util.hpp"

namespace maskcal {

using nlohmann::json;

std::string to_string(SyntheticSpec::Noise n) {
    return n == SyntheticSpec::Noise::gaussian ? "gaussian" : "laplace";
}

SyntheticSpec::Noise parse_noise(const std::string& s) {
    if (s == "gaussian") return SyntheticSpec::Noise::gaussian;
    if (s == "laplace") return SyntheticSpec::Noise::laplace;
    throw FormatError("unknown noise kind '" + s + "'");
}

void SyntheticSpec::save(const std::filesystem::path& path) const {
    json j;
    j["height"] = height;
    j["width"] = width;
    j["noise"] = to_string(noise);
    j["scale_min"] = scale_min;
    j["scale_max"] = scale_max;
    j["level_min"] = level_min;
    j["level_max"] = level_max;
    j["field_smoothness"] = field_smoothness;
    j["seed"] = seed;
    j["train_count"] = train_count;
    j["calibration_count"] = calibration_count;
    j["test_count"] = test_count;
    write_file_atomic(path, j.dump(2) + "\n");
}

SyntheticSpec SyntheticSpec::load(const std::filesystem::path& path) {
    json j;
    try {
        j = json::parse(read_file(path));
    } catch (const json::exception& e) {
        throw FormatError("synthetic spec " + path.string() + ": " + e.what());
    }
    SyntheticSpec s;
    s.height = j.value("height", s.height);
    s.width = j.value("width", s.width);
    s.noise = parse_noise(j.value("noise", "gaussian"));
    s.scale_min = j.value("scale_min", s.scale_min);
    s.scale_max = j.value("scale_max", s.scale_max);
    s.level_min = j.value("level_min", s.level_min);
    s.level_max = j.value("level_max", s.level_max);
    s.field_smoothness = j.value("field_smoothness", s.field_smoothness);
    s.seed = j.value("seed", s.seed);
    s.train_count = j.value("train_count", s.train_count);
    s.calibration_count = j.value("calibration_count", s.calibration_count);
    s.test_count = j.value("test_count", s.test_count);
    if (s.height == 0 || s.width == 0) throw DomainError("synthetic spec: empty shape");
    if (!(s.scale_min > 0.0) || s.scale_max < s.scale_min) {
        throw DomainError("synthetic spec: scale field must be strictly positive");
    }
    return s;
}

namespace {

// Smooth field in [0, 1]: iid uniforms, box blur (reflect padding), min-max
// normalized.
std::vector<double> smooth_field(Rng& rng, std::size_t h, std::size_t w, int radius) {
    std::vector<double> field(h * w);
    for (double& v : field) v = rng.uniform();
    if (radius > 0) {
        auto reflect = [](long i, std::size_t n) {
            if (i < 0) i = -i;
            if (i >= static_cast<long>(n)) i = 2 * static_cast<long>(n) - 2 - i;
            return static_cast<std::size_t>(std::clamp<long>(i, 0, static_cast<long>(n) - 1));
        };
        std::vector<double> tmp(h * w);
        for (std::size_t r = 0; r < h; ++r) {
            for (std::size_t c = 0; c < w; ++c) {
                double acc = 0.0;
                for (int d = -radius; d <= radius; ++d) {
                    acc += field[r * w + reflect(static_cast<long>(c) + d, w)];
                }
                tmp[r * w + c] = acc / (2.0 * radius + 1.0);
            }
        }
        for (std::size_t r = 0; r < h; ++r) {
            for (std::size_t c = 0; c < w; ++c) {
                double acc = 0.0;
                for (int d = -radius; d <= radius; ++d) {
                    acc += tmp[reflect(static_cast<long>(r) + d, h) * w + c];
                }
                field[r * w + c] = acc / (2.0 * radius + 1.0);
            }
        }
    }
    const auto [lo_it, hi_it] = std::minmax_element(field.begin(), field.end());
    const double lo = *lo_it, span = *hi_it - *lo_it;
    for (double& v : field) v = span > 0.0 ? (v - lo) / span : 0.5;
    return field;
}

}  // namespace

SyntheticRecord generate_record(const SyntheticSpec& spec, std::size_t index) {
    const std::size_t total = spec.train_count + spec.calibration_count + spec.test_count;
    if (index >= total) throw DomainError("generate_record: index out of range");
    Rng rng(derive_seed(spec.seed, index));
    const std::size_t h = spec.height, w = spec.width;

    SyntheticRecord rec;
    char buf[16];
    std::snprintf(buf, sizeof(buf), "r%06zu", index);
    rec.id = buf;
    rec.split = index < spec.train_count ? Split::train
                : index < spec.train_count + spec.calibration_count ? Split::calibration
                                                                    : Split::test;

    const auto base = smooth_field(rng, h, w, spec.field_smoothness);
    rec.y_hat = Tensor({h, w});
    for (std::size_t i = 0; i < h * w; ++i) rec.y_hat[i] = 0.25 + 0.5 * base[i];

    const auto scale_base = smooth_field(rng, h, w, spec.field_smoothness);
    const double level = rng.uniform(spec.level_min, spec.level_max);
    rec.scale = Tensor({h, w});
    for (std::size_t i = 0; i < h * w; ++i) {
        rec.scale[i] = (spec.scale_min + (spec.scale_max - spec.scale_min) * scale_base[i]) *
                       level;
    }

    rec.y = Tensor({h, w});
    for (std::size_t i = 0; i < h * w; ++i) {
        const double noise = spec.noise == SyntheticSpec::Noise::gaussian
                                 ? rec.scale[i] * rng.normal()
                                 : rng.laplace(rec.scale[i]);
        rec.y[i] = std::clamp(rec.y_hat[i] + noise, 0.0, 1.0);
    }

    rec.x = Tensor({h, w, 2});
    for (std::size_t i = 0; i < h * w; ++i) {
        rec.x[2 * i] = rec.y_hat[i];
        rec.x[2 * i + 1] = rec.scale[i];
    }
    return rec;
}

TripletDataset generate_dataset(const SyntheticSpec& spec,
                                const std::filesystem::path& out_dir) {
    namespace fs = std::filesystem;
    const std::size_t total = spec.train_count + spec.calibration_count + spec.test_count;
    if (total == 0) throw DomainError("generate_dataset: no records requested");
    fs::create_directories(out_dir / "tensors");

    TripletDataset ds(out_dir);
    for (std::size_t index = 0; index < total; ++index) {
        const SyntheticRecord rec = generate_record(spec, index);
        const fs::path rel = fs::path("tensors");
        TripletRecord row;
        row.id = rec.id;
        row.split = rec.split;
        row.x = rel / (rec.id + "_x.mskt");
        row.y_hat = rel / (rec.id + "_yhat.mskt");
        row.y = rel / (rec.id + "_y.mskt");
        write_tensor(out_dir / row.x, rec.x);
        write_tensor(out_dir / row.y_hat, rec.y_hat);
        write_tensor(out_dir / row.y, rec.y);
        const fs::path scale_rel = rel / (rec.id + "_scale.mskt");
        write_tensor(out_dir / scale_rel, rec.scale);
        json side;
        side["id"] = rec.id;
        side["noise"] = to_string(spec.noise);
        side["scale"] = scale_rel.generic_string();
        write_file_atomic(out_dir / rel / (rec.id + "_meta.json"), side.dump(2) + "\n");
        ds.records().push_back(std::move(row));
    }
    ds.save(out_dir / "manifest.jsonl");
    return ds;
}

double expected_abs_moment(SyntheticSpec::Noise noise, double scale, double p) {
    if (!(p >= 1.0)) throw DomainError("expected_abs_moment requires p >= 1");
    if (!(scale >= 0.0)) throw DomainError("expected_abs_moment requires scale >= 0");
    if (noise == SyntheticSpec::Noise::gaussian) {
        // E|N(0, s)|^p = s^p * 2^(p/2) * Gamma((p+1)/2) / sqrt(pi)
        return std::pow(scale, p) * std::pow(2.0, p / 2.0) *
               std::tgamma((p + 1.0) / 2.0) / std::sqrt(M_PI);
    }
    // E|Laplace(0, b)|^p = b^p * Gamma(p + 1)
    return std::pow(scale, p) * std::tgamma(p + 1.0);
}

McEstimate mc_expected_masked_distortion(const Mask& m, const Image& y_hat,
                                         SyntheticSpec::Noise noise, const Tensor& scale,
                                         const DistortionSpec& d, std::size_t draws,
                                         std::uint64_t seed, bool clamp_draws) {
    if (draws < 2) throw DomainError("mc_expected_masked_distortion requires draws >= 2");
    if (!m.same_dims(y_hat) || scale.size() != y_hat.size()) {
        throw ShapeError("mc_expected_masked_distortion: dims mismatch");
    }
    Rng rng(seed);
    Image y = y_hat;
    double sum = 0.0, sum_sq = 0.0;
    for (std::size_t k = 0; k < draws; ++k) {
        for (std::size_t i = 0; i < y.size(); ++i) {
            const double noise_v = noise == SyntheticSpec::Noise::gaussian
                                       ? scale[i] * rng.normal()
                                       : rng.laplace(scale[i]);
            y[i] = y_hat[i] + noise_v;
            if (clamp_draws) y[i] = std::clamp(y[i], 0.0, 1.0);
        }
        const double v = masked_distortion(d, m, y, y_hat);
        sum += v;
        sum_sq += v * v;
    }
    const double n = static_cast<double>(draws);
    const double mean = sum / n;
    const double var = std::max(0.0, (sum_sq - n * mean * mean) / (n - 1.0));
    return {mean, std::sqrt(var / n)};
}

}  // namespace maskcal
