#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "valign/analysis.hpp"
#include "valign/metrics.hpp"

namespace valign {

/// Ordered "# key: value" lines written at the top of every table and
/// heatmap so outputs are self-describing.
using Metadata = std::vector<std::pair<std::string, std::string>>;

Metadata base_metadata(const std::string& kind, const AlignmentOptions& options);

std::string format_number(double value);  // shortest round-trip; NA for NaN
std::string format_optional(const std::optional<double>& value);

void write_metadata(std::ostream& out, const Metadata& metadata);

void write_report_csv(std::ostream& out, const std::vector<AlignmentReport>& reports,
                      const Metadata& metadata);
/// Reads every data row of a report CSV (comment lines skipped).
std::vector<AlignmentReport> read_report_csv(const std::filesystem::path& path);

void write_curve_csv(std::ostream& out, const ConvergenceCurve& curve, const Metadata& metadata);
void write_stability_csv(std::ostream& out,
                         const std::vector<std::pair<const ConvergenceCurve*, std::optional<std::size_t>>>& rows,
                         double epsilon, const Metadata& metadata);
void write_country_table_csv(std::ostream& out, const CountryTable& table, const Metadata& metadata);
void write_metric_correlation_csv(std::ostream& out, const MetricCorrelationTable& table,
                                  const Metadata& metadata);

/// Writes a file, creating parent directories. Throws DataError on failure.
void write_text_file(const std::filesystem::path& path, const std::string& content);

/// A manifest listing every produced artifact with its SHA-256 digest.
class Manifest {
public:
    Manifest(std::string command, nlohmann::json config);
    void add_input(const std::filesystem::path& path);
    void add_output(const std::filesystem::path& path, const std::filesystem::path& relative_to);
    /// Writes manifest.json into `dir`.
    std::filesystem::path write(const std::filesystem::path& dir) const;

private:
    nlohmann::json doc_;
};

}  // namespace valign
