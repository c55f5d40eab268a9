#include "maskcal/masker.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <json.hpp>

#include "maskcal/util.hpp"

namespace maskcal {

using nlohmann::json;

namespace {

// Reflect index into [0, n): -1 -> 1, n -> n - 2.
std::size_t reflect(long i, std::size_t n) {
    if (i < 0) i = -i;
    if (i >= static_cast<long>(n)) i = 2 * static_cast<long>(n) - 2 - i;
    return static_cast<std::size_t>(std::clamp<long>(i, 0, static_cast<long>(n) - 1));
}

}  // namespace

FeatureGrid extract_features(const Image& x, const Image& y_hat) {
    if (x.height() != y_hat.height() || x.width() != y_hat.width()) {
        throw ShapeError("extract_features: x is not on y_hat's grid");
    }
    const Image xp = channel_mean(x);
    const Image yp = channel_mean(y_hat);
    const std::size_t h = yp.height(), w = yp.width();

    FeatureGrid grid;
    grid.height = h;
    grid.width = w;
    grid.values.resize(h * w * kFeatureDim);

    for (std::size_t r = 0; r < h; ++r) {
        for (std::size_t c = 0; c < w; ++c) {
            double sum = 0.0, sq = 0.0;
            for (int dr = -1; dr <= 1; ++dr) {
                for (int dc = -1; dc <= 1; ++dc) {
                    const double v = yp.at(reflect(static_cast<long>(r) + dr, h),
                                           reflect(static_cast<long>(c) + dc, w));
                    sum += v;
                    sq += v * v;
                }
            }
            const double mean = sum / 9.0;
            const double var = std::max(0.0, sq / 9.0 - mean * mean);
            const double gx = 0.5 * (yp.at(r, reflect(static_cast<long>(c) + 1, w)) -
                                     yp.at(r, reflect(static_cast<long>(c) - 1, w)));
            const double gy = 0.5 * (yp.at(reflect(static_cast<long>(r) + 1, h), c) -
                                     yp.at(reflect(static_cast<long>(r) - 1, h), c));
            double* f = grid.values.data() + (r * w + c) * kFeatureDim;
            f[0] = xp.at(r, c);
            f[1] = yp.at(r, c);
            f[2] = mean;
            f[3] = std::sqrt(var);
            f[4] = std::hypot(gx, gy);
            f[5] = std::abs(xp.at(r, c) - yp.at(r, c));
            f[6] = 1.0;
        }
    }
    return grid;
}

// --------------------------------------------------------------------------
// Model
// --------------------------------------------------------------------------

MaskerModel MaskerModel::linear(std::size_t input_dim) {
    MaskerModel m;
    m.kind = Kind::linear;
    m.input_dim = input_dim;
    m.weights.assign(input_dim, 0.0);
    return m;
}

MaskerModel MaskerModel::mlp(std::size_t hidden, std::uint64_t seed, std::size_t input_dim) {
    if (hidden == 0) throw DomainError("mlp needs at least one hidden unit");
    MaskerModel m;
    m.kind = Kind::mlp;
    m.input_dim = input_dim;
    m.hidden = hidden;
    m.weights.assign(hidden * input_dim + hidden + 1, 0.0);
    Rng rng(seed);
    const double scale = 1.0 / std::sqrt(static_cast<double>(input_dim));
    for (std::size_t i = 0; i < hidden * input_dim; ++i) {
        m.weights[i] = rng.uniform(-scale, scale);
    }
    for (std::size_t i = 0; i < hidden; ++i) {
        m.weights[hidden * input_dim + i] = rng.uniform(-0.5, 0.5);
    }
    return m;
}

double MaskerModel::raw(std::span<const double> f) const {
    if (kind == Kind::linear) {
        double z = 0.0;
        for (std::size_t i = 0; i < input_dim; ++i) z += weights[i] * f[i];
        return z;
    }
    const double* w1 = weights.data();
    const double* w2 = weights.data() + hidden * input_dim;
    const double b2 = weights[hidden * input_dim + hidden];
    double z = b2;
    for (std::size_t hh = 0; hh < hidden; ++hh) {
        double a = 0.0;
        for (std::size_t i = 0; i < input_dim; ++i) a += w1[hh * input_dim + i] * f[i];
        z += w2[hh] * std::tanh(a);
    }
    return z;
}

void MaskerModel::accumulate_grad(std::span<const double> f, double upstream,
                                  std::span<double> grad) const {
    if (kind == Kind::linear) {
        for (std::size_t i = 0; i < input_dim; ++i) grad[i] += upstream * f[i];
        return;
    }
    const double* w1 = weights.data();
    const double* w2 = weights.data() + hidden * input_dim;
    for (std::size_t hh = 0; hh < hidden; ++hh) {
        double a = 0.0;
        for (std::size_t i = 0; i < input_dim; ++i) a += w1[hh * input_dim + i] * f[i];
        const double t = std::tanh(a);
        grad[hidden * input_dim + hh] += upstream * t;
        const double back = upstream * w2[hh] * (1.0 - t * t);
        for (std::size_t i = 0; i < input_dim; ++i) {
            grad[hh * input_dim + i] += back * f[i];
        }
    }
    grad[hidden * input_dim + hidden] += upstream;
}

void MaskerModel::save(const std::filesystem::path& path) const {
    json j;
    j["kind"] = kind == Kind::linear ? "linear" : "mlp";
    j["feature_version"] = feature_version;
    j["input_dim"] = input_dim;
    if (kind == Kind::mlp) j["hidden"] = hidden;
    j["weights"] = weights;
    write_file_atomic(path, j.dump(2) + "\n");
}

MaskerModel MaskerModel::load(const std::filesystem::path& path) {
    json j;
    try {
        j = json::parse(read_file(path));
    } catch (const json::exception& e) {
        throw FormatError("model file " + path.string() + ": " + e.what());
    }
    MaskerModel m;
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "linear") {
        m.kind = Kind::linear;
    } else if (kind == "mlp") {
        m.kind = Kind::mlp;
        m.hidden = j.at("hidden").get<std::size_t>();
    } else {
        throw FormatError("model file: unknown kind '" + kind + "'");
    }
    m.feature_version = j.at("feature_version").get<int>();
    m.input_dim = j.at("input_dim").get<std::size_t>();
    m.weights = j.at("weights").get<std::vector<double>>();
    const std::size_t expected = m.kind == MaskerModel::Kind::linear
                                     ? m.input_dim
                                     : m.hidden * m.input_dim + m.hidden + 1;
    if (m.weights.size() != expected) throw FormatError("model file: weight count mismatch");
    return m;
}

// --------------------------------------------------------------------------
// SGD driver
// --------------------------------------------------------------------------

TrainingDiverged::TrainingDiverged(std::string msg, std::vector<double> loss_trace)
    : Error(std::move(msg)), trace(std::move(loss_trace)) {}

std::vector<double> sgd_train(MaskerModel& model, const std::vector<PixelSample>& samples,
                              const PixelLoss& loss, double learning_rate,
                              std::size_t batch_size, std::size_t epochs,
                              std::uint64_t seed) {
    if (samples.empty()) throw DomainError("sgd_train: empty sample set");
    if (batch_size == 0) throw DomainError("sgd_train: batch_size must be > 0");

    Rng rng(seed);
    std::vector<std::size_t> order(samples.size());
    std::iota(order.begin(), order.end(), 0);
    std::vector<double> grad(model.weights.size());
    std::vector<double> trace;
    trace.reserve(epochs);

    for (std::size_t epoch = 0; epoch < epochs; ++epoch) {
        // Fisher-Yates with the deterministic Rng.
        for (std::size_t i = order.size(); i > 1; --i) {
            std::swap(order[i - 1], order[rng.index(i)]);
        }
        double epoch_loss = 0.0;
        std::size_t epoch_records = 0;
        for (std::size_t start = 0; start < order.size(); start += batch_size) {
            const std::size_t end = std::min(order.size(), start + batch_size);
            std::fill(grad.begin(), grad.end(), 0.0);
            for (std::size_t k = start; k < end; ++k) {
                const PixelSample& s = samples[order[k]];
                const double norm =
                    1.0 / (static_cast<double>(s.features.pixels()) *
                           static_cast<double>(s.channels) * static_cast<double>(end - start));
                double record_loss = 0.0;
                for (std::size_t px = 0; px < s.features.pixels(); ++px) {
                    const auto f = s.features.row(px);
                    const double z = model.raw(f);
                    double d_raw = 0.0;
                    record_loss += loss(z, s.payload[px], s.channels, d_raw);
                    if (d_raw != 0.0) {
                        model.accumulate_grad(f, d_raw * norm, grad);
                    }
                }
                epoch_loss += record_loss /
                              (static_cast<double>(s.features.pixels()) *
                               static_cast<double>(s.channels));
                ++epoch_records;
            }
            for (std::size_t i = 0; i < model.weights.size(); ++i) {
                model.weights[i] -= learning_rate * grad[i];
            }
        }
        const double mean_loss = epoch_loss / static_cast<double>(epoch_records);
        trace.push_back(mean_loss);
        if (!std::isfinite(mean_loss)) {
            throw TrainingDiverged("training diverged at epoch " + std::to_string(epoch),
                                   trace);
        }
    }
    return trace;
}

// --------------------------------------------------------------------------
// Masker training
// --------------------------------------------------------------------------

TrainResult train_masker(const TripletDataset& data, const TrainConfig& cfg, Split split) {
    if (cfg.distortion.kind != DistortionSpec::Kind::pnorm) {
        throw DomainError("train_masker supports p-norm distortions only");
    }
    if (!(cfg.mu >= 0.0)) throw DomainError("train_masker: mu must be >= 0");
    const auto records = data.split_records(split);
    if (records.empty()) throw DomainError("train_masker: empty split");

    const double p = cfg.distortion.p;
    std::vector<PixelSample> samples;
    samples.reserve(records.size());
    for (const auto& rec : records) {
        const LoadedTriplet t = data.load_triplet(rec);
        PixelSample s;
        s.features = extract_features(resample_nearest(t.x, t.y_hat.height(), t.y_hat.width()),
                                      t.y_hat);
        s.channels = t.y_hat.channels();
        // Per plane pixel: sum over channels of |y - y_hat|^p.
        s.payload.assign(s.features.pixels(), 0.0);
        for (std::size_t r = 0; r < t.y_hat.height(); ++r) {
            for (std::size_t c = 0; c < t.y_hat.width(); ++c) {
                double acc = 0.0;
                for (std::size_t ch = 0; ch < s.channels; ++ch) {
                    acc += std::pow(std::abs(t.y.at(r, c, ch) - t.y_hat.at(r, c, ch)), p);
                }
                s.payload[r * t.y_hat.width() + c] = acc;
            }
        }
        samples.push_back(std::move(s));
    }

    MaskerModel model = cfg.kind == MaskerModel::Kind::linear
                            ? MaskerModel::linear()
                            : MaskerModel::mlp(cfg.hidden, cfg.seed);
    const double lr = cfg.learning_rate > 0.0
                          ? cfg.learning_rate
                          : (cfg.kind == MaskerModel::Kind::linear ? 1e-2 : 1e-3);
    const double mu = cfg.mu;

    // (m - 1)^2 per channel entry plus mu * m^p * sum_ch |e|^p, with the
    // clamp's straight-through gate zeroing gradients outside [0, 1].
    PixelLoss loss = [p, mu](double z, double err_p, std::size_t channels,
                             double& d_raw) -> double {
        const double m = std::clamp(z, 0.0, 1.0);
        const double gate = (z >= 0.0 && z <= 1.0) ? 1.0 : 0.0;
        const double ch = static_cast<double>(channels);
        double value = ch * (m - 1.0) * (m - 1.0);
        double d_mask = 2.0 * ch * (m - 1.0);
        if (p == 1.0) {
            value += mu * m * err_p;
            d_mask += m > 0.0 ? mu * err_p : 0.0;
        } else if (p == 2.0) {
            value += mu * m * m * err_p;
            d_mask += 2.0 * mu * m * err_p;
        } else {
            value += mu * std::pow(m, p) * err_p;
            d_mask += m > 0.0 ? mu * p * std::pow(m, p - 1.0) * err_p : 0.0;
        }
        d_raw = d_mask * gate;
        return value;
    };

    TrainResult out{std::move(model), {}};
    out.epoch_loss = sgd_train(out.model, samples, loss, lr, cfg.batch_size, cfg.epochs,
                               cfg.seed);
    return out;
}

Mask predict_mask(const MaskerModel& model, const Image& x, const Image& y_hat) {
    const FeatureGrid grid =
        extract_features(resample_nearest(x, y_hat.height(), y_hat.width()), y_hat);
    Tensor plane({y_hat.height(), y_hat.width()});
    for (std::size_t px = 0; px < grid.pixels(); ++px) {
        plane[px] = std::clamp(model.raw(grid.row(px)), 0.0, 1.0);
    }
    if (y_hat.ndim() == 3) {
        Tensor out = broadcast_plane(plane, y_hat.channels());
        return Tensor(y_hat.dims(), std::vector<double>(out.values().begin(),
                                                        out.values().end()));
    }
    return plane;
}

}  // namespace maskcal
