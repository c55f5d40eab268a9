// maskcal: mask-based uncertainty calibration toolkit.
//
// Subcommands cover the full pipeline: synthetic data generation, masker and
// quantile-baseline training, mask prediction, the UNI scalar, the Opt
// oracle, closed-form masks, conformal calibration, calibrated-mask
// application, and evaluation reports.
//
// Exit codes: 0 success, 1 domain/runtime errors, 2 usage errors.

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "maskcal/baselines.hpp"
#include "maskcal/calibration.hpp"
#include "maskcal/dataset.hpp"
#include "maskcal/distortion.hpp"
#include "maskcal/evaluation.hpp"
#include "maskcal/masker.hpp"
#include "maskcal/optimal_mask.hpp"
#include "maskcal/oracle.hpp"
#include "maskcal/synthetic.hpp"
#include "maskcal/tensor.hpp"
#include "maskcal/util.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace maskcal;

namespace {

// JSON config files: top-level keys are global options, objects named after a
// subcommand hold its options. Flags given on the command line win.
class JsonConfig : public CLI::Config {
public:
    std::string to_config(const CLI::App*, bool, bool, std::string) const override {
        return "{}\n";
    }

    std::vector<CLI::ConfigItem> from_config(std::istream& input) const override {
        json j;
        try {
            j = json::parse(input);
        } catch (const json::exception& e) {
            throw CLI::ConfigError(std::string("config is not valid JSON: ") + e.what());
        }
        std::vector<CLI::ConfigItem> items;
        auto add = [&](std::vector<std::string> parents, const std::string& key,
                       const json& value) {
            CLI::ConfigItem item;
            item.parents = std::move(parents);
            item.name = key;
            if (value.is_array()) {
                for (const auto& v : value) {
                    item.inputs.push_back(v.is_string() ? v.get<std::string>() : v.dump());
                }
            } else {
                item.inputs.push_back(value.is_string() ? value.get<std::string>()
                                                        : value.dump());
            }
            items.push_back(std::move(item));
        };
        for (const auto& [key, value] : j.items()) {
            if (value.is_object()) {
                for (const auto& [sub_key, sub_value] : value.items()) {
                    add({key}, sub_key, sub_value);
                }
            } else {
                add({}, key, value);
            }
        }
        return items;
    }
};

int g_verbosity = 0;

void log_info(const std::string& msg) {
    if (g_verbosity > 0) std::fprintf(stderr, "maskcal: %s\n", msg.c_str());
}

// ---------------------------------------------------------------------------
// shared option bundles
// ---------------------------------------------------------------------------

struct AlphaOpts {
    double alpha = -1.0;
    double alpha_quantile = -1.0;
    std::string alpha_split = "calibration";

    void attach(CLI::App* cmd) {
        cmd->add_option("--alpha", alpha, "distortion threshold (raw sum units)");
        cmd->add_option("--alpha-quantile", alpha_quantile,
                        "derive alpha as this quantile of unmasked distortions");
        cmd->add_option("--alpha-split", alpha_split, "split used with --alpha-quantile")
            ->check(CLI::IsMember({"train", "calibration", "test"}));
    }

    double resolve(const TripletDataset& data, const DistortionSpec& d) const {
        if (alpha > 0.0) return alpha;
        if (alpha_quantile >= 0.0) {
            std::vector<double> dists;
            for (const auto& rec : data.split_records(parse_split(alpha_split))) {
                const LoadedTriplet t = data.load_triplet(rec);
                dists.push_back(distortion(d, t.y, t.y_hat));
            }
            const double a = threshold_from_quantile(std::move(dists), alpha_quantile);
            log_info("alpha = " + std::to_string(a) + " (quantile " +
                     std::to_string(alpha_quantile) + " of " + alpha_split + ")");
            return a;
        }
        throw DomainError("either --alpha or --alpha-quantile is required");
    }
};

struct TrainOpts {
    std::string manifest;
    std::string split = "train";
    std::string out;
    std::string kind = "linear";
    std::size_t hidden = 8;
    double learning_rate = 0.0;
    std::size_t batch_size = 25;
    std::size_t epochs = 60;
    std::uint64_t seed = 0;

    void attach(CLI::App* cmd) {
        cmd->add_option("--manifest", manifest, "dataset manifest (JSONL)")->required();
        cmd->add_option("--split", split, "training split")
            ->check(CLI::IsMember({"train", "calibration", "test"}));
        cmd->add_option("--out", out, "output model JSON")->required();
        cmd->add_option("--kind", kind, "model kind")->check(CLI::IsMember({"linear", "mlp"}));
        cmd->add_option("--hidden", hidden, "hidden units (mlp)");
        cmd->add_option("--learning-rate", learning_rate, "0 picks the per-kind default");
        cmd->add_option("--batch-size", batch_size, "mini-batch size");
        cmd->add_option("--epochs", epochs, "training epochs");
        cmd->add_option("--seed", seed, "training seed");
    }

    TrainConfig to_config() const {
        TrainConfig cfg;
        cfg.learning_rate = learning_rate;
        cfg.batch_size = batch_size;
        cfg.epochs = epochs;
        cfg.seed = seed;
        cfg.kind = kind == "mlp" ? MaskerModel::Kind::mlp : MaskerModel::Kind::linear;
        cfg.hidden = hidden;
        return cfg;
    }
};

// Heuristic mask providers shared by calibrate/apply/evaluate. The all-ones
// heuristics (ones, uni) calibrate through the uniform-scaling mask form.
struct Heuristic {
    std::string kind;  // masker | quantile | ones | uni
    std::optional<MaskerModel> masker;
    std::optional<QuantileModel> quantile;

    static Heuristic make(const std::string& kind, const std::string& model_path) {
        Heuristic h;
        h.kind = kind;
        if (kind == "masker") {
            if (model_path.empty()) throw DomainError("heuristic 'masker' needs --model");
            h.masker = MaskerModel::load(model_path);
        } else if (kind == "quantile") {
            if (model_path.empty()) throw DomainError("heuristic 'quantile' needs --model");
            h.quantile = QuantileModel::load(model_path);
        } else if (kind != "ones" && kind != "uni") {
            throw DomainError("unknown heuristic '" + kind + "'");
        }
        return h;
    }

    MaskForm form() const {
        return (kind == "ones" || kind == "uni") ? MaskForm::uniform_scale : MaskForm::ratio;
    }

    Mask operator()(const LoadedTriplet& t) const {
        if (masker) return predict_mask(*masker, t.x, t.y_hat);
        if (quantile) return quantile_heuristic_mask(*quantile, t.x, t.y_hat);
        return Tensor::ones_like(t.y);
    }
};

std::vector<TripletRecord> records_for(const TripletDataset& data, const std::string& split) {
    if (split == "all") {
        auto recs = data.records();
        std::sort(recs.begin(), recs.end(),
                  [](const TripletRecord& a, const TripletRecord& b) { return a.id < b.id; });
        return recs;
    }
    return data.split_records(parse_split(split));
}

// ---------------------------------------------------------------------------
// subcommand bodies
// ---------------------------------------------------------------------------

struct SynthGenOpts {
    std::string spec;
    std::string out;
};

void run_synth_gen(const SynthGenOpts& o) {
    const SyntheticSpec spec = SyntheticSpec::load(o.spec);
    const TripletDataset ds = generate_dataset(spec, o.out);
    log_info("wrote " + std::to_string(ds.records().size()) + " records to " + o.out);
}

struct TrainMaskerOpts {
    TrainOpts train;
    double mu = 2.0;
    std::string distortion = "l2";
};

void run_train_masker(const TrainMaskerOpts& o) {
    const TripletDataset ds = TripletDataset::load(o.train.manifest);
    TrainConfig cfg = o.train.to_config();
    cfg.mu = o.mu;
    cfg.distortion = DistortionSpec::parse(o.distortion);
    const TrainResult res = train_masker(ds, cfg, parse_split(o.train.split));
    res.model.save(o.train.out);
    log_info("final epoch loss " + std::to_string(res.epoch_loss.back()));
}

void run_train_quantile(const TrainOpts& o) {
    const TripletDataset ds = TripletDataset::load(o.manifest);
    const QuantileTrainResult res = train_quantile(ds, o.to_config(), parse_split(o.split));
    res.model.save(o.out);
    log_info("final pinball losses " + std::to_string(res.lower_epoch_loss.back()) + " / " +
             std::to_string(res.upper_epoch_loss.back()));
}

struct PredictOpts {
    std::string manifest;
    std::string model;
    std::string split = "all";
    std::string out_dir;
    std::string manifest_out;
};

void run_predict(const PredictOpts& o, bool quantile) {
    TripletDataset ds = TripletDataset::load(o.manifest);
    const Heuristic h = Heuristic::make(quantile ? "quantile" : "masker", o.model);
    fs::create_directories(o.out_dir);
    const auto records = records_for(ds, o.split);
    for (const auto& rec : records) {
        const LoadedTriplet t = ds.load_triplet(rec);
        const fs::path out = fs::path(o.out_dir) / (rec.id + "_mask.mskt");
        write_tensor(out, h(t));
        if (!o.manifest_out.empty()) {
            for (auto& row : ds.records()) {
                if (row.id == rec.id) {
                    row.mask = fs::relative(out, fs::absolute(o.manifest_out).parent_path());
                }
            }
        }
    }
    if (!o.manifest_out.empty()) ds.save(o.manifest_out);
    log_info("wrote " + std::to_string(records.size()) + " masks");
}

struct UniOpts {
    std::string manifest;
    std::string split = "calibration";
    std::string distortion = "l1";
    AlphaOpts alpha;
    double beta = 0.9;
    std::string out;
};

void run_uni(const UniOpts& o) {
    const TripletDataset ds = TripletDataset::load(o.manifest);
    const DistortionSpec d = DistortionSpec::parse(o.distortion);
    const double alpha = o.alpha.resolve(ds, d);
    const double mu = uni_scalar(ds, d, alpha, o.beta, parse_split(o.split));
    json j;
    j["mu_uni"] = mu;
    j["alpha"] = alpha;
    j["beta"] = o.beta;
    j["distortion_id"] = d.id();
    j["sample_count"] = ds.split_records(parse_split(o.split)).size();
    write_file_atomic(o.out, j.dump(2) + "\n");
    log_info("mu_uni = " + std::to_string(mu));
}

struct OracleOpts {
    std::string manifest;
    std::string split = "test";
    std::string distortion = "l2";
    AlphaOpts alpha;
    double mu = 2.0;
    double step_size = 0.01;
    std::size_t max_iters = 10000;
    std::string out_dir;
    std::string csv;
    std::size_t threads = 1;
};

void run_oracle(const OracleOpts& o) {
    const TripletDataset ds = TripletDataset::load(o.manifest);
    const DistortionSpec d = DistortionSpec::parse(o.distortion);
    const double alpha = o.alpha.resolve(ds, d);
    fs::create_directories(o.out_dir);
    const auto records = records_for(ds, o.split);

    struct Row {
        std::string id;
        double size = 0.0;
        std::size_t iterations = 0;
        double final_distortion = 0.0;
        bool converged = false;
    };
    std::vector<Row> rows(records.size());

    parallel_for(records.size(), o.threads, [&](std::size_t i) {
        const LoadedTriplet t = ds.load_triplet(records[i]);
        OracleConfig cfg;
        cfg.mu = o.mu;
        cfg.step_size = o.step_size;
        cfg.max_iters = o.max_iters;
        cfg.target_alpha = alpha;
        OracleResult res;
        try {
            res = optimize_mask(t.y, t.y_hat, d, cfg);
        } catch (const OracleStalled& e) {
            res = e.best;
        }
        write_tensor(fs::path(o.out_dir) / (records[i].id + "_mask.mskt"), res.mask);
        rows[i] = {records[i].id, mask_size(res.mask), res.iterations, res.final_distortion,
                   res.converged};
    });

    std::ostringstream csv;
    csv << "id,mask_size,iterations,final_distortion,converged\n";
    std::size_t stalled = 0;
    for (const auto& r : rows) {
        csv << r.id << ',' << json(r.size).dump() << ',' << r.iterations << ','
            << json(r.final_distortion).dump() << ',' << (r.converged ? 1 : 0) << '\n';
        if (!r.converged) ++stalled;
    }
    write_file_atomic(o.csv, csv.str());
    if (stalled > 0) {
        log_info(std::to_string(stalled) + " records did not reach the target distortion");
    }
}

struct ClosedFormOpts {
    std::string profile;
    double p = 2.0;
    double alpha = 0.0;
    std::string out;
};

void run_closed_form(const ClosedFormOpts& o) {
    const Tensor profile = read_tensor(o.profile);
    ErrorProfile prof;
    prof.d.assign(profile.values().begin(), profile.values().end());
    prof.p = o.p;
    prof.alpha = o.alpha;
    std::vector<double> mask;
    if (o.p == 1.0) {
        mask = binary_mask(prof);
    } else {
        MaskSolution sol = closed_form_mask(prof);
        if (sol.no_masking_needed) log_info("alpha exceeds sum(d); no masking needed");
        mask = std::move(sol.mask);
    }
    write_tensor(o.out, Tensor(profile.dims(), std::move(mask)));
}

struct CalibrateCmdOpts {
    std::string manifest;
    std::string split = "calibration";
    std::string heuristic = "masker";
    std::string model;
    std::string distortion = "l1";
    AlphaOpts alpha;
    double beta = 0.9;
    double eps = 1e-3;
    double eps_denominator = 1e-6;
    std::string out;
    std::size_t threads = 1;
};

void run_calibrate(const CalibrateCmdOpts& o) {
    const TripletDataset ds = TripletDataset::load(o.manifest);
    const DistortionSpec d = DistortionSpec::parse(o.distortion);
    const Heuristic h = Heuristic::make(o.heuristic, o.model);

    CalibrateOptions opts;
    opts.alpha = o.alpha.resolve(ds, d);
    opts.beta = o.beta;
    opts.distortion = d;
    opts.bisection_eps = o.eps;
    opts.epsilon_denominator = o.eps_denominator;
    opts.form = h.form();
    opts.heuristic_id = o.heuristic;
    opts.threads = o.threads;

    const CalibrationResult result =
        calibrate(ds, parse_split(o.split), [&](const LoadedTriplet& t) { return h(t); }, opts);
    result.save(o.out);
    log_info("lambda = " + std::to_string(result.lambda) + " at index " +
             std::to_string(result.quantile_index) + "/" + std::to_string(result.sample_count));
    if (result.infeasible_count > 0) {
        log_info(std::to_string(result.infeasible_count) +
                 " records were infeasible at the minimum lambda");
    }
}

struct ApplyOpts {
    std::string result;
    std::string manifest;
    std::string split = "test";
    std::string model;
    std::string out_dir;
    std::string manifest_out;
};

void run_apply(const ApplyOpts& o) {
    const CalibrationResult result = CalibrationResult::load(o.result);
    TripletDataset ds = TripletDataset::load(o.manifest);
    const Heuristic h =
        Heuristic::make(result.heuristic.empty() ? "ones" : result.heuristic, o.model);
    fs::create_directories(o.out_dir);
    const auto records = records_for(ds, o.split);
    for (const auto& rec : records) {
        const LoadedTriplet t = ds.load_triplet(rec);
        const fs::path out = fs::path(o.out_dir) / (rec.id + "_mask.mskt");
        write_tensor(out, apply_calibration(h(t), result));
        if (!o.manifest_out.empty()) {
            for (auto& row : ds.records()) {
                if (row.id == rec.id) {
                    row.mask = fs::relative(out, fs::absolute(o.manifest_out).parent_path());
                }
            }
        }
    }
    if (!o.manifest_out.empty()) ds.save(o.manifest_out);
    log_info("applied lambda " + std::to_string(result.lambda) + " to " +
             std::to_string(records.size()) + " records");
}

struct EvaluateOpts {
    std::string manifest;
    std::string split = "test";
    std::string distortion;
    double alpha = -1.0;
    double beta = -1.0;
    std::string masker_model, masker_result;
    std::string quantile_model, quantile_result;
    std::string ones_result;
    double uni_mu = -1.0;
    std::string uni_json;
    std::string opt_masks;
    std::string out;
    std::string csv;
    std::string svg;
};

void run_evaluate(const EvaluateOpts& o) {
    const TripletDataset ds = TripletDataset::load(o.manifest);

    struct Method {
        std::string name;
        std::optional<Heuristic> heuristic;
        std::optional<CalibrationResult> result;
        double uni_mu = -1.0;
        bool from_files = false;
        fs::path mask_dir;
    };
    std::vector<Method> methods;

    if (!o.masker_result.empty()) {
        Method m;
        m.name = "ours";
        m.heuristic = Heuristic::make("masker", o.masker_model);
        m.result = CalibrationResult::load(o.masker_result);
        methods.push_back(std::move(m));
    }
    if (!o.quantile_result.empty()) {
        Method m;
        m.name = "quantile";
        m.heuristic = Heuristic::make("quantile", o.quantile_model);
        m.result = CalibrationResult::load(o.quantile_result);
        methods.push_back(std::move(m));
    }
    if (!o.ones_result.empty()) {
        Method m;
        m.name = "ones";
        m.heuristic = Heuristic::make("ones", "");
        m.result = CalibrationResult::load(o.ones_result);
        methods.push_back(std::move(m));
    }
    double uni_mu = o.uni_mu;
    if (!o.uni_json.empty()) {
        uni_mu = json::parse(read_file(o.uni_json)).at("mu_uni").get<double>();
    }
    if (uni_mu >= 0.0) {
        Method m;
        m.name = "uni";
        m.uni_mu = uni_mu;
        methods.push_back(std::move(m));
    }
    if (!o.opt_masks.empty()) {
        Method m;
        m.name = "opt";
        m.from_files = true;
        m.mask_dir = o.opt_masks;
        methods.push_back(std::move(m));
    }
    if (methods.empty()) throw DomainError("evaluate: no methods given");

    // alpha / beta / distortion come from flags or the first calibration result
    double alpha = o.alpha;
    double beta = o.beta;
    std::string distortion_id = o.distortion;
    for (const auto& m : methods) {
        if (!m.result) continue;
        if (alpha <= 0.0) alpha = m.result->alpha;
        if (beta < 0.0) beta = m.result->beta;
        if (distortion_id.empty()) distortion_id = m.result->distortion_id;
        if (std::abs(m.result->alpha - alpha) > 1e-9 * std::max(1.0, alpha) ||
            m.result->distortion_id != distortion_id) {
            log_info("warning: calibration results disagree on alpha/distortion; "
                     "using the first");
        }
    }
    if (alpha <= 0.0) throw DomainError("evaluate: alpha unavailable (flag or result)");
    if (beta < 0.0) beta = 0.9;
    if (distortion_id.empty()) throw DomainError("evaluate: distortion unavailable");
    const DistortionSpec d = DistortionSpec::parse(distortion_id);

    const auto records = records_for(ds, o.split);
    if (records.empty()) throw DomainError("evaluate: empty split");

    std::vector<double> unmasked;
    unmasked.reserve(records.size());
    std::vector<MethodSeries> series(methods.size());
    for (std::size_t mi = 0; mi < methods.size(); ++mi) series[mi].method = methods[mi].name;

    for (const auto& rec : records) {
        const LoadedTriplet t = ds.load_triplet(rec);
        unmasked.push_back(distortion(d, t.y, t.y_hat));
        for (std::size_t mi = 0; mi < methods.size(); ++mi) {
            const Method& m = methods[mi];
            Mask mask = m.from_files ? read_tensor(m.mask_dir / (rec.id + "_mask.mskt"))
                        : m.uni_mu >= 0.0
                            ? Mask(t.y.dims(), std::min(1.0, m.uni_mu))
                            : apply_calibration((*m.heuristic)(t), *m.result);
            series[mi].mask_sizes.push_back(mask_size(mask));
            series[mi].masked_distortions.push_back(masked_distortion(d, mask, t.y, t.y_hat));
        }
    }
    std::optional<std::vector<double>> opt_sizes;
    for (std::size_t mi = 0; mi < methods.size(); ++mi) {
        if (methods[mi].from_files) opt_sizes = series[mi].mask_sizes;
    }

    const EvalReport report = evaluate(series, unmasked, opt_sizes, alpha, beta, distortion_id);
    write_file_atomic(o.out, report.to_json_text());
    if (!o.csv.empty()) write_file_atomic(o.csv, report.to_csv_text());
    if (!o.svg.empty()) {
        fs::create_directories(o.svg);
        write_size_histogram_svg(fs::path(o.svg) / "size_hist.svg", series);
        if (opt_sizes) {
            for (const auto& s : series) {
                if (s.method == "opt") continue;
                write_size_scatter_svg(
                    fs::path(o.svg) / ("size_scatter_" + s.method + "_vs_opt.svg"),
                    *opt_sizes, s);
            }
        }
    }
    for (const auto& m : report.methods) {
        std::ostringstream line;
        line << m.method << ": size " << m.mean_mask_size << ", coverage " << m.coverage;
        log_info(line.str());
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"mask-based uncertainty calibration for image-to-image predictors"};
    app.require_subcommand(1);
    app.config_formatter(std::make_shared<JsonConfig>());
    app.set_config("--config", "", "JSON config file (flags take precedence)");
    app.add_flag("-v,--verbose", g_verbosity, "log progress to stderr");
    std::size_t threads = 1;
    app.add_option("--threads", threads, "worker threads for per-record loops")
        ->capture_default_str();

    SynthGenOpts synth;
    auto* synth_cmd = app.add_subcommand("synth-gen", "generate a synthetic triplet dataset");
    synth_cmd->add_option("--spec", synth.spec, "synthetic spec JSON")->required();
    synth_cmd->add_option("--out", synth.out, "output directory")->required();

    TrainMaskerOpts tm;
    auto* tm_cmd = app.add_subcommand("train-masker", "train the masking model");
    tm.train.attach(tm_cmd);
    tm_cmd->add_option("--mu", tm.mu, "distortion weight in the training loss")
        ->capture_default_str();
    tm_cmd->add_option("--distortion", tm.distortion, "p-norm distortion id")
        ->capture_default_str();

    TrainOpts tq;
    auto* tq_cmd =
        app.add_subcommand("train-quantile", "train the interval baseline (pinball loss)");
    tq.attach(tq_cmd);

    PredictOpts pm;
    auto* pm_cmd = app.add_subcommand("predict-mask", "write heuristic masks for a split");
    pm_cmd->add_option("--manifest", pm.manifest, "dataset manifest")->required();
    pm_cmd->add_option("--model", pm.model, "masker model JSON")->required();
    pm_cmd->add_option("--split", pm.split, "split or 'all'");
    pm_cmd->add_option("--out-dir", pm.out_dir, "mask output directory")->required();
    pm_cmd->add_option("--manifest-out", pm.manifest_out,
                       "write a manifest copy with mask paths");

    PredictOpts pq;
    auto* pq_cmd =
        app.add_subcommand("predict-quantile-mask", "write interval-width heuristic masks");
    pq_cmd->add_option("--manifest", pq.manifest, "dataset manifest")->required();
    pq_cmd->add_option("--model", pq.model, "quantile model JSON")->required();
    pq_cmd->add_option("--split", pq.split, "split or 'all'");
    pq_cmd->add_option("--out-dir", pq.out_dir, "mask output directory")->required();
    pq_cmd->add_option("--manifest-out", pq.manifest_out,
                       "write a manifest copy with mask paths");

    UniOpts uni;
    auto* uni_cmd = app.add_subcommand("uni", "compute the uniform scaling baseline");
    uni_cmd->add_option("--manifest", uni.manifest, "dataset manifest")->required();
    uni_cmd->add_option("--split", uni.split, "calibration split");
    uni_cmd->add_option("--distortion", uni.distortion, "p-norm distortion id")
        ->capture_default_str();
    uni.alpha.attach(uni_cmd);
    uni_cmd->add_option("--beta", uni.beta, "coverage level")->capture_default_str();
    uni_cmd->add_option("--out", uni.out, "output JSON")->required();

    OracleOpts oracle;
    auto* oracle_cmd = app.add_subcommand("oracle", "per-record optimal masks (requires y)");
    oracle_cmd->add_option("--manifest", oracle.manifest, "dataset manifest")->required();
    oracle_cmd->add_option("--split", oracle.split, "split or 'all'");
    oracle_cmd->add_option("--distortion", oracle.distortion, "distortion id")
        ->capture_default_str();
    oracle.alpha.attach(oracle_cmd);
    oracle_cmd->add_option("--mu", oracle.mu, "distortion weight")->capture_default_str();
    oracle_cmd->add_option("--step-size", oracle.step_size, "optimizer step size")
        ->capture_default_str();
    oracle_cmd->add_option("--max-iters", oracle.max_iters, "iteration cap")
        ->capture_default_str();
    oracle_cmd->add_option("--out-dir", oracle.out_dir, "mask output directory")->required();
    oracle_cmd->add_option("--csv", oracle.csv, "per-record CSV output")->required();

    ClosedFormOpts cf;
    auto* cf_cmd =
        app.add_subcommand("closed-form", "optimal mask from a per-pixel error profile");
    cf_cmd->add_option("--profile", cf.profile, "error profile MSKT tensor")->required();
    cf_cmd->add_option("--p", cf.p, "norm exponent (p = 1 gives the binary mask)")->required();
    cf_cmd->add_option("--alpha", cf.alpha, "distortion budget")->required();
    cf_cmd->add_option("--out", cf.out, "mask output MSKT")->required();

    CalibrateCmdOpts cal;
    auto* cal_cmd = app.add_subcommand("calibrate", "conformal lambda calibration");
    cal_cmd->add_option("--manifest", cal.manifest, "dataset manifest")->required();
    cal_cmd->add_option("--split", cal.split, "calibration split");
    cal_cmd->add_option("--heuristic", cal.heuristic, "mask heuristic")
        ->check(CLI::IsMember({"masker", "quantile", "uni", "ones"}))
        ->capture_default_str();
    cal_cmd->add_option("--model", cal.model, "model JSON for masker/quantile heuristics");
    cal_cmd->add_option("--distortion", cal.distortion, "distortion id")
        ->capture_default_str();
    cal.alpha.attach(cal_cmd);
    cal_cmd->add_option("--beta", cal.beta, "coverage level")->capture_default_str();
    cal_cmd->add_option("--eps", cal.eps, "bisection tolerance")->capture_default_str();
    cal_cmd->add_option("--eps-denominator", cal.eps_denominator,
                        "epsilon in the calibrated-mask denominator")
        ->capture_default_str();
    cal_cmd->add_option("--out", cal.out, "calibration result JSON")->required();

    ApplyOpts ap;
    auto* ap_cmd = app.add_subcommand("apply", "apply a calibration result to a split");
    ap_cmd->add_option("--result", ap.result, "calibration result JSON")->required();
    ap_cmd->add_option("--manifest", ap.manifest, "dataset manifest")->required();
    ap_cmd->add_option("--split", ap.split, "split or 'all'");
    ap_cmd->add_option("--model", ap.model, "model JSON when the heuristic needs one");
    ap_cmd->add_option("--out-dir", ap.out_dir, "mask output directory")->required();
    ap_cmd->add_option("--manifest-out", ap.manifest_out,
                       "write a manifest copy with mask paths");

    EvaluateOpts ev;
    auto* ev_cmd = app.add_subcommand("evaluate", "mask quality and coverage report");
    ev_cmd->add_option("--manifest", ev.manifest, "dataset manifest")->required();
    ev_cmd->add_option("--split", ev.split, "evaluation split");
    ev_cmd->add_option("--distortion", ev.distortion, "distortion id (default: from results)");
    ev_cmd->add_option("--alpha", ev.alpha, "threshold (default: from results)");
    ev_cmd->add_option("--beta", ev.beta, "coverage level (default: from results)");
    ev_cmd->add_option("--masker-model", ev.masker_model, "masker model JSON");
    ev_cmd->add_option("--masker-result", ev.masker_result, "masker calibration result");
    ev_cmd->add_option("--quantile-model", ev.quantile_model, "quantile model JSON");
    ev_cmd->add_option("--quantile-result", ev.quantile_result, "quantile calibration result");
    ev_cmd->add_option("--ones-result", ev.ones_result, "all-ones calibration result");
    ev_cmd->add_option("--uni-mu", ev.uni_mu, "uniform scaling baseline value");
    ev_cmd->add_option("--uni-json", ev.uni_json, "output of the uni subcommand");
    ev_cmd->add_option("--opt-masks", ev.opt_masks, "directory of oracle masks");
    ev_cmd->add_option("--out", ev.out, "report JSON")->required();
    ev_cmd->add_option("--csv", ev.csv, "report CSV");
    ev_cmd->add_option("--svg", ev.svg, "directory for SVG plots");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (*synth_cmd) run_synth_gen(synth);
        if (*tm_cmd) run_train_masker(tm);
        if (*tq_cmd) run_train_quantile(tq);
        if (*pm_cmd) run_predict(pm, false);
        if (*pq_cmd) run_predict(pq, true);
        if (*uni_cmd) run_uni(uni);
        if (*oracle_cmd) {
            oracle.threads = threads;
            run_oracle(oracle);
        }
        if (*cf_cmd) run_closed_form(cf);
        if (*cal_cmd) {
            cal.threads = threads;
            run_calibrate(cal);
        }
        if (*ap_cmd) run_apply(ap);
        if (*ev_cmd) run_evaluate(ev);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "maskcal: error: %s\n", e.what());
        return 1;
    }
    return 0;
}
