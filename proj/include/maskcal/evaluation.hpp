#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "maskcal/error.hpp"

namespace maskcal {

// Sample Pearson correlation; nullopt when either side has zero variance.
std::optional<double> pearson(std::span<const double> a, std::span<const double> b);

// Lower empirical q-quantile with linear interpolation between order
// statistics (q = 0 gives the minimum).
double threshold_from_quantile(std::vector<double> values, double q);

// Fraction of entries <= alpha.
double coverage(std::span<const double> masked_distortions, double alpha);

// Per-record series for one method on the test split, ascending id order.
struct MethodSeries {
    std::string method;
    std::vector<double> mask_sizes;
    std::vector<double> masked_distortions;
};

struct MethodReport {
    std::string method;
    double mean_mask_size = 0.0;
    double mask_size_ci_low = 0.0;
    double mask_size_ci_high = 0.0;
    std::optional<double> corr_distortion;  // C(M, D)
    std::optional<double> corr_opt;         // C(M, M_opt)
    double coverage = 0.0;
    std::size_t sample_count = 0;
    std::string note;
};

struct EvalReport {
    double alpha = 0.0;
    double beta = 0.0;
    std::string distortion_id;
    std::size_t sample_count = 0;
    std::vector<MethodReport> methods;

    std::string to_json_text() const;
    static EvalReport from_json_text(const std::string& text);
    std::string to_csv_text() const;
};

// Aggregates per-method series against the shared unmasked distortions and
// (when available) the oracle mask sizes.
EvalReport evaluate(const std::vector<MethodSeries>& methods,
                    std::span<const double> unmasked_distortions,
                    const std::optional<std::vector<double>>& opt_mask_sizes,
                    double alpha, double beta, const std::string& distortion_id);

// Standalone SVG exports mirroring the usual mask-size figures.
void write_size_histogram_svg(const std::filesystem::path& path,
                              const std::vector<MethodSeries>& methods);
void write_size_scatter_svg(const std::filesystem::path& path,
                            std::span<const double> opt_sizes,
                            const MethodSeries& method);

}  // namespace maskcal
