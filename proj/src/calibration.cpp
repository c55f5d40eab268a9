#include "maskcal/calibration.hpp"

#include <algorithm>
#include <cmath>

#include <json.hpp>

#include "maskcal/util.hpp"

namespace maskcal {

using nlohmann::json;

std::string to_string(MaskForm f) {
    return f == MaskForm::ratio ? "ratio" : "uniform_scale";
}

MaskForm parse_mask_form(const std::string& s) {
    if (s == "ratio") return MaskForm::ratio;
    if (s == "uniform_scale") return MaskForm::uniform_scale;
    throw FormatError("unknown mask form '" + s + "'");
}

Mask calibrated_mask(const Mask& m_theta, double lambda, double eps) {
    if (!(lambda > 0.0)) throw DomainError("calibrated_mask requires lambda > 0");
    if (!(eps >= 0.0)) throw DomainError("calibrated_mask requires eps >= 0");
    Mask out = m_theta;
    for (double& v : out.values()) {
        v = std::clamp(lambda / (eps + 1.0 - v), 0.0, 1.0);
    }
    return out;
}

Mask scaled_mask(const Mask& m_theta, double lambda) {
    if (!(lambda > 0.0)) throw DomainError("scaled_mask requires lambda > 0");
    Mask out = m_theta;
    for (double& v : out.values()) {
        v = std::clamp(lambda * v, 0.0, 1.0);
    }
    return out;
}

Mask apply_mask_form(MaskForm form, const Mask& m_theta, double lambda, double eps) {
    return form == MaskForm::ratio ? calibrated_mask(m_theta, lambda, eps)
                                   : scaled_mask(m_theta, lambda);
}

namespace {

LambdaResult bisect_lambda(const std::function<bool(double)>& feasible, double eps) {
    double lo = eps;
    double hi = 1.0 / eps;
    if (feasible(hi)) return {hi, true};
    if (!feasible(lo)) return {lo, false};
    while (hi - lo > eps) {
        const double mid = (hi + lo) / 2.0;
        if (feasible(mid)) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    return {lo, true};
}

}  // namespace

LambdaResult find_lambda(const Mask& m_theta, const Image& y, const Image& y_hat,
                         const DistortionSpec& d, double alpha, double eps,
                         double eps_denominator, MaskForm form) {
    if (!(eps > 0.0)) throw DomainError("find_lambda requires eps > 0");
    if (!d.monotone_in_mask()) {
        throw DomainError("find_lambda requires a mask-monotone distortion; "
                          "use scan_lambda for '" + d.id() + "'");
    }
    auto feasible = [&](double lambda) {
        const Mask m = apply_mask_form(form, m_theta, lambda, eps_denominator);
        return masked_distortion(d, m, y, y_hat) <= alpha;
    };
    return bisect_lambda(feasible, eps);
}

LambdaResult scan_lambda(const Mask& m_theta, const Image& y, const Image& y_hat,
                         const DistortionSpec& d, double alpha, double eps,
                         double eps_denominator, MaskForm form, std::size_t grid_points) {
    if (!(eps > 0.0)) throw DomainError("scan_lambda requires eps > 0");
    if (grid_points < 2) throw DomainError("scan_lambda requires grid_points >= 2");
    auto feasible = [&](double lambda) {
        const Mask m = apply_mask_form(form, m_theta, lambda, eps_denominator);
        return masked_distortion(d, m, y, y_hat) <= alpha;
    };
    const double lo = std::log(eps);
    const double hi = std::log(1.0 / eps);
    double last_ok = eps;
    for (std::size_t i = 0; i < grid_points; ++i) {
        const double t = static_cast<double>(i) / static_cast<double>(grid_points - 1);
        const double lambda = std::exp(lo + (hi - lo) * t);
        if (!feasible(lambda)) {
            if (i == 0) return {eps, false};
            return {last_ok, true};
        }
        last_ok = lambda;
    }
    return {last_ok, true};
}

ConformalLambda conformal_lambda(std::vector<double> lambdas, double beta) {
    if (lambdas.empty()) throw DomainError("conformal_lambda: empty lambda set");
    if (!(beta >= 0.0 && beta <= 1.0)) throw DomainError("conformal_lambda: beta in [0, 1]");
    std::sort(lambdas.begin(), lambdas.end());
    const std::size_t k = lambdas.size();
    const double raw = std::floor((1.0 - beta) * static_cast<double>(k + 1));
    const auto index = static_cast<std::size_t>(
        std::clamp<double>(raw, 1.0, static_cast<double>(k)));
    return {lambdas[index - 1], index};
}

// --------------------------------------------------------------------------
// CalibrationResult serialization
// --------------------------------------------------------------------------

void CalibrationResult::save(const std::filesystem::path& path) const {
    json j;
    j["lambda"] = lambda;
    j["lambdas_per_sample"] = lambdas_per_sample;
    j["alpha"] = alpha;
    j["beta"] = beta;
    j["distortion_id"] = distortion_id;
    j["epsilon_denominator"] = epsilon_denominator;
    j["bisection_eps"] = bisection_eps;
    j["sample_count"] = sample_count;
    j["quantile_index"] = quantile_index;
    j["heuristic"] = heuristic;
    j["mask_form"] = to_string(form);
    j["infeasible_count"] = infeasible_count;
    write_file_atomic(path, j.dump(2) + "\n");
}

CalibrationResult CalibrationResult::load(const std::filesystem::path& path) {
    json j;
    try {
        j = json::parse(read_file(path));
    } catch (const json::exception& e) {
        throw FormatError("calibration result " + path.string() + ": " + e.what());
    }
    CalibrationResult r;
    r.lambda = j.at("lambda").get<double>();
    r.lambdas_per_sample = j.at("lambdas_per_sample").get<std::vector<double>>();
    r.alpha = j.at("alpha").get<double>();
    r.beta = j.at("beta").get<double>();
    r.distortion_id = j.at("distortion_id").get<std::string>();
    r.epsilon_denominator = j.at("epsilon_denominator").get<double>();
    r.bisection_eps = j.at("bisection_eps").get<double>();
    r.sample_count = j.at("sample_count").get<std::size_t>();
    r.quantile_index = j.at("quantile_index").get<std::size_t>();
    r.heuristic = j.value("heuristic", "");
    r.form = parse_mask_form(j.value("mask_form", "ratio"));
    r.infeasible_count = j.value("infeasible_count", std::size_t{0});
    return r;
}

// --------------------------------------------------------------------------
// Full calibration pass
// --------------------------------------------------------------------------

CalibrationResult calibrate(const TripletDataset& data, Split split,
                            const HeuristicFn& heuristic, const CalibrateOptions& opts) {
    const auto records = data.split_records(split);
    if (records.empty()) throw DomainError("calibrate: empty calibration split");
    if (!(opts.alpha > 0.0)) throw DomainError("calibrate requires alpha > 0");

    std::vector<LambdaResult> per_record(records.size());
    parallel_for(records.size(), opts.threads, [&](std::size_t i) {
        const LoadedTriplet t = data.load_triplet(records[i]);
        const Mask m_theta = heuristic(t);
        if (!m_theta.same_dims(t.y)) {
            throw ShapeError("record " + t.id + ": heuristic mask dims differ from y");
        }
        per_record[i] = opts.distortion.monotone_in_mask()
                            ? find_lambda(m_theta, t.y, t.y_hat, opts.distortion,
                                          opts.alpha, opts.bisection_eps,
                                          opts.epsilon_denominator, opts.form)
                            : scan_lambda(m_theta, t.y, t.y_hat, opts.distortion,
                                          opts.alpha, opts.bisection_eps,
                                          opts.epsilon_denominator, opts.form);
    });

    CalibrationResult result;
    result.alpha = opts.alpha;
    result.beta = opts.beta;
    result.distortion_id = opts.distortion.id();
    result.epsilon_denominator = opts.epsilon_denominator;
    result.bisection_eps = opts.bisection_eps;
    result.heuristic = opts.heuristic_id;
    result.form = opts.form;
    result.sample_count = records.size();
    result.lambdas_per_sample.reserve(records.size());
    for (const auto& lr : per_record) {
        result.lambdas_per_sample.push_back(lr.lambda);
        if (!lr.feasible) ++result.infeasible_count;
    }
    const ConformalLambda agg = conformal_lambda(result.lambdas_per_sample, opts.beta);
    result.lambda = agg.lambda;
    result.quantile_index = agg.index;
    return result;
}

Mask apply_calibration(const Mask& m_theta, const CalibrationResult& result) {
    return apply_mask_form(result.form, m_theta, result.lambda,
                           result.epsilon_denominator);
}

}  // namespace maskcal
