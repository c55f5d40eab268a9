#include <doctest.h>

#include <cmath>
#include <random>

#include "helpers.hpp"
#include "maskcal/baselines.hpp"
#include "maskcal/util.hpp"

using namespace maskcal;

TEST_CASE("uni scalar order statistics") {
    // all unmasked distortions already below alpha
    CHECK(uni_scalar_from_distortions({0.1, 0.2, 0.3}, 1.0, 0.5, 0.9) == 1.0);

    // K=10, distortions 0.1..1.0, beta=0.9: index ceil(0.9*11)=10 -> D_q=1.0
    std::vector<double> dists;
    for (int i = 1; i <= 10; ++i) dists.push_back(i / 10.0);
    CHECK(uni_scalar_from_distortions(dists, 1.0, 0.45, 0.9) == doctest::Approx(0.45));

    // p=2 single sample: mu^2 * 4 = 1 -> mu = 0.5
    CHECK(uni_scalar_from_distortions({4.0}, 2.0, 1.0, 0.9) == doctest::Approx(0.5));

    CHECK_THROWS_AS(uni_scalar_from_distortions({}, 1.0, 0.5, 0.9), DomainError);
}

TEST_CASE("uni scalar guarantee property") {
    std::mt19937_64 gen(61);
    std::uniform_real_distribution<double> dist(0.05, 3.0);
    for (int trial = 0; trial < 50; ++trial) {
        const double p = trial % 2 == 0 ? 1.0 : 2.0;
        const double beta = 0.8 + 0.1 * (trial % 3);
        std::vector<double> d(25);
        for (auto& v : d) v = dist(gen);
        const double alpha = dist(gen);
        const double mu = uni_scalar_from_distortions(d, p, alpha, beta);
        std::size_t satisfied = 0;
        for (double v : d) {
            if (std::pow(mu, p) * v <= alpha + 1e-12) ++satisfied;
        }
        CHECK(static_cast<double>(satisfied) >= beta * static_cast<double>(d.size()) - 1e-9);
    }
}

TEST_CASE("pinball loss") {
    CHECK(pinball_loss(0.0, 0.3) == 0.0);
    CHECK(pinball_loss(1.0, 0.3) == doctest::Approx(0.3));
    CHECK(pinball_loss(-1.0, 0.3) == doctest::Approx(0.7));
}

namespace {

TripletDataset quantile_dataset(const testutil::TempDir& dir, std::size_t count,
                                std::function<double(std::size_t, Rng&)> target) {
    std::filesystem::create_directories(dir.path() / "t");
    TripletDataset ds(dir.path());
    Rng rng(5);
    for (std::size_t i = 0; i < count; ++i) {
        char buf[16];
        std::snprintf(buf, sizeof(buf), "q%05zu", i);
        TripletRecord rec;
        rec.id = buf;
        rec.split = Split::train;
        rec.x = std::string("t/") + buf + "_x.mskt";
        rec.y_hat = std::string("t/") + buf + "_p.mskt";
        rec.y = std::string("t/") + buf + "_y.mskt";
        write_tensor(dir.path() / rec.x, Tensor({1, 1}, 0.4));
        write_tensor(dir.path() / rec.y_hat, Tensor({1, 1}, 0.4));
        write_tensor(dir.path() / rec.y, Tensor({1, 1}, target(i, rng)));
        ds.records().push_back(rec);
    }
    ds.save(dir / "manifest.jsonl");
    return ds;
}

}  // namespace

TEST_CASE("quantile heads collapse on a constant target") {
    testutil::TempDir dir;
    const TripletDataset ds =
        quantile_dataset(dir, 60, [](std::size_t, Rng&) { return 0.7; });
    TrainConfig cfg;
    cfg.epochs = 1200;  // the tau = 0.05 head ascends at rate lr * tau
    const QuantileTrainResult res = train_quantile(ds, cfg);
    const Image probe = Tensor::image(1, 1, 1, 0.4);
    const auto [lo, hi] = predict_quantile_planes(res.model, probe, probe);
    CHECK(lo[0] == doctest::Approx(0.7).epsilon(0.025));
    CHECK(hi[0] == doctest::Approx(0.7).epsilon(0.025));
    // a near-perfect predictor on noiseless data has near-zero pinball loss
    CHECK(res.lower_epoch_loss.back() <= 2e-3);
}

TEST_CASE("quantile heads learn the uniform quantiles") {
    testutil::TempDir dir;
    const TripletDataset ds =
        quantile_dataset(dir, 2000, [](std::size_t, Rng& rng) { return rng.uniform(); });
    TrainConfig cfg;
    cfg.epochs = 60;
    cfg.seed = 11;
    const QuantileTrainResult res = train_quantile(ds, cfg);
    const Image probe = Tensor::image(1, 1, 1, 0.4);
    const auto [lo, hi] = predict_quantile_planes(res.model, probe, probe);
    CHECK(std::abs(lo[0] - 0.05) <= 0.02);
    CHECK(std::abs(hi[0] - 0.95) <= 0.02);
}

TEST_CASE("quantile model round-trip and swap invariant") {
    testutil::TempDir dir;
    QuantileModel q;
    q.lower = MaskerModel::linear();
    q.upper = MaskerModel::linear();
    q.lower.weights[6] = 0.9;  // lower head predicts above the upper head
    q.upper.weights[6] = 0.2;
    q.save(dir / "q.json");
    const QuantileModel back = QuantileModel::load(dir / "q.json");
    CHECK(back.lower.weights == q.lower.weights);
    CHECK(back.lower_level == 0.05);

    const Image probe = Tensor::image(2, 2, 1, 0.5);
    const auto [lo, hi] = predict_quantile_planes(back, probe, probe);
    for (std::size_t i = 0; i < lo.size(); ++i) CHECK(hi[i] >= lo[i]);
}

TEST_CASE("quantile heuristic mask normalization") {
    // widths are controlled through the two bias weights
    auto with_bias = [](double lower_bias, double upper_bias) {
        QuantileModel q;
        q.lower = MaskerModel::linear();
        q.upper = MaskerModel::linear();
        q.lower.weights[6] = lower_bias;
        q.upper.weights[6] = upper_bias;
        return q;
    };
    const Image probe = Tensor::image(1, 2, 1, 0.5);

    // zero widths everywhere -> all-ones mask
    const Mask ones = quantile_heuristic_mask(with_bias(0.3, 0.3), probe, probe);
    for (double v : ones.values()) CHECK(v == 1.0);

    // uniform positive widths -> all-zeros mask
    const Mask zeros = quantile_heuristic_mask(with_bias(0.2, 0.6), probe, probe);
    for (double v : zeros.values()) CHECK(v == 0.0);
}

TEST_CASE("quantile heuristic mask on varying widths") {
    // per-pixel width via a weight on the y_hat feature: widths [0.2, 0.4]
    QuantileModel q;
    q.lower = MaskerModel::linear();
    q.upper = MaskerModel::linear();
    q.upper.weights[1] = 1.0;   // upper = y_hat value
    q.lower.weights[1] = -1.0;  // lower = -y_hat value, width = 2 * y_hat
    Image probe = Tensor::image(1, 2, 1);
    probe.at(0, 0) = 0.1;
    probe.at(0, 1) = 0.2;
    const Mask m = quantile_heuristic_mask(q, probe, probe);
    CHECK(m[0] == doctest::Approx(0.5));
    CHECK(m[1] == doctest::Approx(0.0));

    // rescaling all widths leaves the mask unchanged
    QuantileModel q2 = q;
    q2.upper.weights[1] = 3.0;
    q2.lower.weights[1] = -3.0;
    const Mask m2 = quantile_heuristic_mask(q2, probe, probe);
    CHECK(m2[0] == doctest::Approx(m[0]));
    CHECK(m2[1] == doctest::Approx(m[1]));
}
