#include "maskcal/baselines.hpp"

#include <algorithm>
#include <cmath>

#include <json.hpp>

#include "maskcal/util.hpp"

namespace maskcal {

using nlohmann::json;

double uni_scalar_from_distortions(std::vector<double> distortions, double p,
                                   double alpha, double beta) {
    if (distortions.empty()) throw DomainError("uni_scalar: empty calibration set");
    if (!(p >= 1.0)) throw DomainError("uni_scalar requires p >= 1");
    if (!(alpha > 0.0)) throw DomainError("uni_scalar requires alpha > 0");
    if (!(beta >= 0.0 && beta <= 1.0)) throw DomainError("uni_scalar: beta in [0, 1]");
    std::sort(distortions.begin(), distortions.end());
    const std::size_t k = distortions.size();
    const auto index = static_cast<std::size_t>(std::clamp<double>(
        std::ceil(beta * static_cast<double>(k + 1)), 1.0, static_cast<double>(k)));
    const double d_q = distortions[index - 1];
    if (d_q <= alpha) return 1.0;
    return std::min(1.0, std::pow(alpha / d_q, 1.0 / p));
}

double uni_scalar(const TripletDataset& data, const DistortionSpec& d, double alpha,
                  double beta, Split split) {
    if (d.kind != DistortionSpec::Kind::pnorm) {
        throw DomainError("uni_scalar requires a p-norm distortion");
    }
    std::vector<double> dists;
    for (const auto& rec : data.split_records(split)) {
        const LoadedTriplet t = data.load_triplet(rec);
        dists.push_back(distortion(d, t.y, t.y_hat));
    }
    return uni_scalar_from_distortions(std::move(dists), d.p, alpha, beta);
}

double pinball_loss(double u, double tau) {
    return u * (tau - (u < 0.0 ? 1.0 : 0.0));
}

// --------------------------------------------------------------------------
// Quantile baseline
// --------------------------------------------------------------------------

void QuantileModel::save(const std::filesystem::path& path) const {
    auto head = [](const MaskerModel& m) {
        json j;
        j["kind"] = m.kind == MaskerModel::Kind::linear ? "linear" : "mlp";
        j["input_dim"] = m.input_dim;
        if (m.kind == MaskerModel::Kind::mlp) j["hidden"] = m.hidden;
        j["weights"] = m.weights;
        return j;
    };
    json j;
    j["kind"] = "quantile";
    j["feature_version"] = lower.feature_version;
    j["levels"] = {lower_level, upper_level};
    j["lower"] = head(lower);
    j["upper"] = head(upper);
    write_file_atomic(path, j.dump(2) + "\n");
}

QuantileModel QuantileModel::load(const std::filesystem::path& path) {
    json j;
    try {
        j = json::parse(read_file(path));
    } catch (const json::exception& e) {
        throw FormatError("quantile model " + path.string() + ": " + e.what());
    }
    if (j.value("kind", "") != "quantile") {
        throw FormatError("quantile model: wrong kind");
    }
    auto head = [&](const json& hj) {
        MaskerModel m;
        const std::string kind = hj.at("kind").get<std::string>();
        if (kind == "linear") {
            m.kind = MaskerModel::Kind::linear;
        } else if (kind == "mlp") {
            m.kind = MaskerModel::Kind::mlp;
            m.hidden = hj.at("hidden").get<std::size_t>();
        } else {
            throw FormatError("quantile model: unknown head kind");
        }
        m.input_dim = hj.at("input_dim").get<std::size_t>();
        m.weights = hj.at("weights").get<std::vector<double>>();
        m.feature_version = j.at("feature_version").get<int>();
        return m;
    };
    QuantileModel q;
    q.lower_level = j.at("levels")[0].get<double>();
    q.upper_level = j.at("levels")[1].get<double>();
    q.lower = head(j.at("lower"));
    q.upper = head(j.at("upper"));
    return q;
}

QuantileTrainResult train_quantile(const TripletDataset& data, const TrainConfig& cfg,
                                   Split split) {
    const auto records = data.split_records(split);
    if (records.empty()) throw DomainError("train_quantile: empty split");

    std::vector<PixelSample> samples;
    samples.reserve(records.size());
    for (const auto& rec : records) {
        const LoadedTriplet t = data.load_triplet(rec);
        PixelSample s;
        s.features = extract_features(
            resample_nearest(t.x, t.y_hat.height(), t.y_hat.width()), t.y_hat);
        s.channels = 1;  // targets live on the channel-averaged plane
        const Image yp = channel_mean(t.y);
        s.payload.assign(yp.values().begin(), yp.values().end());
        samples.push_back(std::move(s));
    }

    const double lr = cfg.learning_rate > 0.0
                          ? cfg.learning_rate
                          : (cfg.kind == MaskerModel::Kind::linear ? 1e-2 : 1e-3);
    auto train_head = [&](double tau, std::uint64_t seed) {
        MaskerModel model = cfg.kind == MaskerModel::Kind::linear
                                ? MaskerModel::linear()
                                : MaskerModel::mlp(cfg.hidden, seed);
        PixelLoss loss = [tau](double z, double target, std::size_t, double& d_raw) {
            const double u = target - z;
            d_raw = u > 0.0 ? -tau : (u < 0.0 ? 1.0 - tau : 0.0);
            return pinball_loss(u, tau);
        };
        auto trace = sgd_train(model, samples, loss, lr, cfg.batch_size, cfg.epochs, seed);
        return std::make_pair(std::move(model), std::move(trace));
    };

    QuantileTrainResult out;
    auto [lower, lower_trace] = train_head(0.05, cfg.seed);
    auto [upper, upper_trace] = train_head(0.95, cfg.seed + 1);
    out.model.lower = std::move(lower);
    out.model.upper = std::move(upper);
    out.lower_epoch_loss = std::move(lower_trace);
    out.upper_epoch_loss = std::move(upper_trace);
    return out;
}

std::pair<Tensor, Tensor> predict_quantile_planes(const QuantileModel& model,
                                                  const Image& x, const Image& y_hat) {
    const FeatureGrid grid =
        extract_features(resample_nearest(x, y_hat.height(), y_hat.width()), y_hat);
    Tensor lo({y_hat.height(), y_hat.width()});
    Tensor hi({y_hat.height(), y_hat.width()});
    for (std::size_t px = 0; px < grid.pixels(); ++px) {
        double a = model.lower.raw(grid.row(px));
        double b = model.upper.raw(grid.row(px));
        if (a > b) std::swap(a, b);
        lo[px] = a;
        hi[px] = b;
    }
    return {std::move(lo), std::move(hi)};
}

Mask quantile_heuristic_mask(const QuantileModel& model, const Image& x,
                             const Image& y_hat) {
    auto [lo, hi] = predict_quantile_planes(model, x, y_hat);
    double w_max = 0.0;
    for (std::size_t i = 0; i < lo.size(); ++i) w_max = std::max(w_max, hi[i] - lo[i]);
    const double denom = std::max(w_max, 1e-12);
    Tensor plane({y_hat.height(), y_hat.width()});
    for (std::size_t i = 0; i < lo.size(); ++i) {
        plane[i] = 1.0 - (hi[i] - lo[i]) / denom;
    }
    if (y_hat.ndim() == 3) {
        Tensor out = broadcast_plane(plane, y_hat.channels());
        return Tensor(y_hat.dims(),
                      std::vector<double>(out.values().begin(), out.values().end()));
    }
    return plane;
}

}  // namespace maskcal
