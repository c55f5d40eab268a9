#include "maskcal/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <json.hpp>

#include "maskcal/util.hpp"

namespace maskcal {

using nlohmann::json;

std::optional<double> pearson(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw ShapeError("pearson: length mismatch");
    if (a.size() < 2) throw DomainError("pearson: need at least 2 points");
    const double n = static_cast<double>(a.size());
    double ma = 0.0, mb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        ma += a[i];
        mb += b[i];
    }
    ma /= n;
    mb /= n;
    double cov = 0.0, va = 0.0, vb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double da = a[i] - ma, db = b[i] - mb;
        cov += da * db;
        va += da * da;
        vb += db * db;
    }
    if (va <= 0.0 || vb <= 0.0) return std::nullopt;
    return cov / std::sqrt(va * vb);
}

double threshold_from_quantile(std::vector<double> values, double q) {
    if (values.empty()) throw DomainError("threshold_from_quantile: empty input");
    if (!(q >= 0.0 && q <= 1.0)) throw DomainError("threshold_from_quantile: q in [0, 1]");
    std::sort(values.begin(), values.end());
    if (values.size() == 1) return values[0];
    const double h = q * static_cast<double>(values.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(h));
    if (lo + 1 >= values.size()) return values.back();
    return values[lo] + (h - static_cast<double>(lo)) * (values[lo + 1] - values[lo]);
}

double coverage(std::span<const double> masked_distortions, double alpha) {
    if (masked_distortions.empty()) throw DomainError("coverage: empty input");
    std::size_t ok = 0;
    for (double v : masked_distortions) {
        if (v <= alpha) ++ok;
    }
    return static_cast<double>(ok) / static_cast<double>(masked_distortions.size());
}

// --------------------------------------------------------------------------
// Report
// --------------------------------------------------------------------------

namespace {

json method_to_json(const MethodReport& m) {
    json j;
    j["method"] = m.method;
    j["mean_mask_size"] = m.mean_mask_size;
    j["mask_size_ci"] = {m.mask_size_ci_low, m.mask_size_ci_high};
    j["corr_distortion"] = m.corr_distortion ? json(*m.corr_distortion) : json(nullptr);
    j["corr_opt"] = m.corr_opt ? json(*m.corr_opt) : json(nullptr);
    j["coverage"] = m.coverage;
    j["sample_count"] = m.sample_count;
    if (!m.note.empty()) j["note"] = m.note;
    return j;
}

MethodReport method_from_json(const json& j) {
    MethodReport m;
    m.method = j.at("method").get<std::string>();
    m.mean_mask_size = j.at("mean_mask_size").get<double>();
    m.mask_size_ci_low = j.at("mask_size_ci")[0].get<double>();
    m.mask_size_ci_high = j.at("mask_size_ci")[1].get<double>();
    if (!j.at("corr_distortion").is_null()) m.corr_distortion = j["corr_distortion"].get<double>();
    if (!j.at("corr_opt").is_null()) m.corr_opt = j["corr_opt"].get<double>();
    m.coverage = j.at("coverage").get<double>();
    m.sample_count = j.at("sample_count").get<std::size_t>();
    m.note = j.value("note", "");
    return m;
}

std::string csv_cell(const std::optional<double>& v) {
    if (!v) return "";
    json j = *v;
    return j.dump();
}

}  // namespace

std::string EvalReport::to_json_text() const {
    json j;
    j["alpha"] = alpha;
    j["beta"] = beta;
    j["distortion_id"] = distortion_id;
    j["sample_count"] = sample_count;
    j["methods"] = json::array();
    for (const auto& m : methods) j["methods"].push_back(method_to_json(m));
    return j.dump(2) + "\n";
}

EvalReport EvalReport::from_json_text(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw FormatError(std::string("eval report: ") + e.what());
    }
    EvalReport r;
    r.alpha = j.at("alpha").get<double>();
    r.beta = j.at("beta").get<double>();
    r.distortion_id = j.at("distortion_id").get<std::string>();
    r.sample_count = j.at("sample_count").get<std::size_t>();
    for (const auto& mj : j.at("methods")) r.methods.push_back(method_from_json(mj));
    return r;
}

std::string EvalReport::to_csv_text() const {
    std::ostringstream out;
    out << "method,mean_mask_size,mask_size_ci_low,mask_size_ci_high,"
           "corr_distortion,corr_opt,coverage,sample_count\n";
    for (const auto& m : methods) {
        out << m.method << ',' << json(m.mean_mask_size).dump() << ','
            << json(m.mask_size_ci_low).dump() << ',' << json(m.mask_size_ci_high).dump()
            << ',' << csv_cell(m.corr_distortion) << ',' << csv_cell(m.corr_opt) << ','
            << json(m.coverage).dump() << ',' << m.sample_count << '\n';
    }
    return out.str();
}

EvalReport evaluate(const std::vector<MethodSeries>& methods,
                    std::span<const double> unmasked_distortions,
                    const std::optional<std::vector<double>>& opt_mask_sizes,
                    double alpha, double beta, const std::string& distortion_id) {
    if (methods.empty()) throw DomainError("evaluate: no methods");
    EvalReport report;
    report.alpha = alpha;
    report.beta = beta;
    report.distortion_id = distortion_id;
    report.sample_count = unmasked_distortions.size();

    for (const auto& series : methods) {
        if (series.mask_sizes.size() != unmasked_distortions.size() ||
            series.masked_distortions.size() != unmasked_distortions.size()) {
            throw ShapeError("evaluate: series length mismatch for " + series.method);
        }
        MethodReport m;
        m.method = series.method;
        m.sample_count = series.mask_sizes.size();
        const double n = static_cast<double>(m.sample_count);
        double mean = 0.0;
        for (double v : series.mask_sizes) mean += v;
        mean /= n;
        double var = 0.0;
        for (double v : series.mask_sizes) var += (v - mean) * (v - mean);
        var = m.sample_count > 1 ? var / (n - 1.0) : 0.0;
        const double half = 1.96 * std::sqrt(var / n);
        m.mean_mask_size = mean;
        m.mask_size_ci_low = mean - half;
        m.mask_size_ci_high = mean + half;
        m.corr_distortion = pearson(series.mask_sizes, unmasked_distortions);
        if (opt_mask_sizes) {
            m.corr_opt = pearson(series.mask_sizes, *opt_mask_sizes);
        } else {
            m.note = "no oracle masks; corr_opt unavailable";
        }
        m.coverage = coverage(series.masked_distortions, alpha);
        report.methods.push_back(std::move(m));
    }
    return report;
}

// --------------------------------------------------------------------------
// SVG output
// --------------------------------------------------------------------------

namespace {

constexpr int kPlotW = 480;
constexpr int kPlotH = 320;
constexpr int kMargin = 40;

const char* method_color(std::size_t i) {
    static const char* colors[] = {"#3465a4", "#cc0000", "#4e9a06", "#f57900", "#75507b"};
    return colors[i % 5];
}

void svg_header(std::ostringstream& out, const std::string& title) {
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kPlotW << "\" height=\""
        << kPlotH << "\" viewBox=\"0 0 " << kPlotW << " " << kPlotH << "\">\n"
        << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
        << "<text x=\"" << kPlotW / 2 << "\" y=\"16\" text-anchor=\"middle\" "
        << "font-family=\"sans-serif\" font-size=\"13\">" << title << "</text>\n";
}

}  // namespace

void write_size_histogram_svg(const std::filesystem::path& path,
                              const std::vector<MethodSeries>& methods) {
    constexpr int kBins = 24;
    double lo = 0.0, hi = 0.0;
    for (const auto& m : methods) {
        for (double v : m.mask_sizes) hi = std::max(hi, v);
    }
    if (hi <= lo) hi = lo + 1.0;

    std::vector<std::vector<double>> hists;
    double peak = 0.0;
    for (const auto& m : methods) {
        std::vector<double> h(kBins, 0.0);
        for (double v : m.mask_sizes) {
            auto b = static_cast<std::size_t>((v - lo) / (hi - lo) * kBins);
            h[std::min<std::size_t>(b, kBins - 1)] += 1.0;
        }
        for (double v : h) peak = std::max(peak, v);
        hists.push_back(std::move(h));
    }

    std::ostringstream out;
    svg_header(out, "mask size histogram");
    const double plot_w = kPlotW - 2.0 * kMargin;
    const double plot_h = kPlotH - 2.0 * kMargin;
    for (std::size_t mi = 0; mi < methods.size(); ++mi) {
        const double bw = plot_w / kBins / static_cast<double>(methods.size());
        for (int b = 0; b < kBins; ++b) {
            const double count = hists[mi][b];
            if (count == 0.0) continue;
            const double bh = count / peak * plot_h;
            const double x = kMargin + b * plot_w / kBins + mi * bw;
            out << "<rect x=\"" << x << "\" y=\"" << kPlotH - kMargin - bh << "\" width=\""
                << bw << "\" height=\"" << bh << "\" fill=\"" << method_color(mi)
                << "\" fill-opacity=\"0.7\"/>\n";
        }
        out << "<text x=\"" << kMargin + 4 << "\" y=\"" << 32 + 14 * mi
            << "\" font-family=\"sans-serif\" font-size=\"11\" fill=\"" << method_color(mi)
            << "\">" << methods[mi].method << "</text>\n";
    }
    out << "<line x1=\"" << kMargin << "\" y1=\"" << kPlotH - kMargin << "\" x2=\""
        << kPlotW - kMargin << "\" y2=\"" << kPlotH - kMargin
        << "\" stroke=\"black\"/>\n</svg>\n";
    write_file_atomic(path, out.str());
}

void write_size_scatter_svg(const std::filesystem::path& path,
                            std::span<const double> opt_sizes, const MethodSeries& method) {
    if (opt_sizes.size() != method.mask_sizes.size()) {
        throw ShapeError("write_size_scatter_svg: length mismatch");
    }
    double hi = 1e-9;
    for (double v : opt_sizes) hi = std::max(hi, v);
    for (double v : method.mask_sizes) hi = std::max(hi, v);

    std::ostringstream out;
    svg_header(out, method.method + " vs opt mask size");
    const double plot_w = kPlotW - 2.0 * kMargin;
    const double plot_h = kPlotH - 2.0 * kMargin;
    out << "<line x1=\"" << kMargin << "\" y1=\"" << kPlotH - kMargin << "\" x2=\""
        << kPlotW - kMargin << "\" y2=\"" << kMargin << "\" stroke=\"#bbbbbb\"/>\n";
    for (std::size_t i = 0; i < opt_sizes.size(); ++i) {
        const double x = kMargin + opt_sizes[i] / hi * plot_w;
        const double y = kPlotH - kMargin - method.mask_sizes[i] / hi * plot_h;
        out << "<circle cx=\"" << x << "\" cy=\"" << y
            << "\" r=\"2\" fill=\"#3465a4\" fill-opacity=\"0.5\"/>\n";
    }
    out << "<line x1=\"" << kMargin << "\" y1=\"" << kPlotH - kMargin << "\" x2=\""
        << kPlotW - kMargin << "\" y2=\"" << kPlotH - kMargin << "\" stroke=\"black\"/>\n"
        << "<line x1=\"" << kMargin << "\" y1=\"" << kMargin << "\" x2=\"" << kMargin
        << "\" y2=\"" << kPlotH - kMargin << "\" stroke=\"black\"/>\n</svg>\n";
    write_file_atomic(path, out.str());
}

}  // namespace maskcal
