#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "valign/metrics.hpp"
#include "valign/survey.hpp"

namespace valign {

enum class MetricKind { msd, msd_mean, kld, corr_distance };

std::string_view to_string(MetricKind kind);
MetricKind parse_metric_kind(std::string_view text);

struct MetricSelector {
    MetricKind kind = MetricKind::msd;
    AlignmentOptions options;
};

/// One metric of `model` against `human`. corr_distance is NaN when either
/// side has fewer than two rows. `human_corr` may carry a precomputed
/// correlation matrix of `human`.
double evaluate_metric(const MetricSelector& selector, const ResponseMatrix& model,
                       const ResponseMatrix& human, const CorrelationMatrix* human_corr = nullptr);

enum class CurveMode { prefix, bootstrap };

std::string_view to_string(CurveMode mode);
CurveMode parse_curve_mode(std::string_view text);

struct CurveOptions {
    CurveMode mode = CurveMode::prefix;
    std::size_t bootstrap_samples = 100;
    std::uint64_t seed = 0;
};

struct ConvergenceCurve {
    std::string metric;
    CurveMode mode = CurveMode::prefix;
    std::vector<std::size_t> grid;
    std::vector<double> estimates;  // prefix value, or bootstrap mean
    std::vector<double> sd;         // bootstrap only; empty in prefix mode
    double final = 0.0;             // full-pool value
};

/// {1, 2, 5, 10, 20, 50, 100, 200, 500} clipped to the pool, plus the pool size.
std::vector<std::size_t> default_grid(std::size_t pool_size);

/// Metric estimate for every grid size k. Prefix mode uses the first k rows
/// of the pool (session-id order); bootstrap mode reports mean and sd over
/// resamples of k rows with replacement. The pool size is appended to the
/// grid if absent. Throws DataError if the grid is not strictly increasing
/// or exceeds the pool.
ConvergenceCurve convergence_curve(const ResponseMatrix& pool, const ResponseMatrix& human,
                                   const MetricSelector& selector, std::vector<std::size_t> grid,
                                   const CurveOptions& options = {});

/// Smallest grid k from which every estimate lies within epsilon of the
/// final value; nullopt when only the last grid point qualifies.
std::optional<std::size_t> stability_point(const ConvergenceCurve& curve, double epsilon);

struct MetricCorrelationTable {
    std::vector<std::string> metrics;
    /// values[i][j]: Pearson for i < j, Spearman for i > j, NaN on the diagonal.
    std::vector<std::vector<double>> values;
};

/// Correlations between msd, kld and corr_distance across reports. Throws
/// DataError with fewer than three reports, a missing corr_distance, or a
/// constant metric column (naming it).
MetricCorrelationTable metric_correlation_table(const std::vector<AlignmentReport>& reports);

/// Point-biserial correlation of each metric with a match indicator (1 =
/// the report's language matches its country). Negative values mean that
/// matched reports score lower.
std::vector<std::pair<std::string, double>> matching_correlation(
    const std::vector<AlignmentReport>& reports, const std::vector<int>& match);

struct CountryTable {
    std::string metric;
    std::string direction;  // how rows and columns enter the metric
    std::vector<std::string> countries;
    std::vector<std::vector<double>> values;
};

using CountryPopulations = std::vector<std::pair<std::string, ResponseMatrix>>;

/// Pairwise metric between countries. Asymmetric metrics treat the row
/// country as the "model" side and the column country as the reference.
CountryTable country_baseline_matrix(const CountryPopulations& populations,
                                     const MetricSelector& selector);

/// Correlation norm of every country's own matrix.
std::vector<std::pair<std::string, double>> country_corr_norms(const CountryPopulations& populations,
                                                               const AlignmentOptions& options);

}  // namespace valign
