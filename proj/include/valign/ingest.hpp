#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "valign/survey.hpp"

namespace valign {

enum class OutOfRangeAction { treat_as_missing, reject_row, fail };

OutOfRangeAction parse_out_of_range_action(std::string_view text);

/// Which raw integers count as "missing" and what to do with values that
/// are neither missing codes nor on the scale.
struct MissingCodePolicy {
    std::set<long long> codes;
    bool all_negative = true;  // WVS convention: every negative code is missing
    OutOfRangeAction out_of_range_action = OutOfRangeAction::treat_as_missing;

    bool is_missing_code(long long raw) const {
        return (all_negative && raw < 0) || codes.contains(raw);
    }

    /// Throws UsageError if a missing code falls inside any scale.
    void check_disjoint(const Survey& survey) const;
};

/// Outcome of recoding one raw cell; `reject_row` is only produced under
/// OutOfRangeAction::reject_row.
struct Recoded {
    Cell value;
    bool reject_row = false;
};

/// Missing code -> missing; in-scale -> value; otherwise per policy.
/// Throws RecodeError under OutOfRangeAction::fail.
Recoded recode_cell(long long raw, const Question& question, const MissingCodePolicy& policy);

struct LoadStats {
    std::size_t rows_read = 0;      // all data rows in the file
    std::size_t rows_matched = 0;   // rows whose country matched
    std::size_t rows_rejected = 0;  // matched rows dropped under reject_row
    std::set<std::string> countries_seen;
};

/// Reads a human survey export. The header must name respondent_id, country
/// and every survey question; extra columns are ignored. Empty cells are
/// missing. Throws EmptyPopulationError (listing the countries present) when
/// no row matches.
ResponseMatrix load_responses(const std::filesystem::path& path, const Survey& survey,
                              const std::string& country, const MissingCodePolicy& policy,
                              LoadStats* stats = nullptr);
ResponseMatrix load_responses(std::istream& in, const Survey& survey, const std::string& country,
                              const MissingCodePolicy& policy, LoadStats* stats = nullptr);

/// Distinct values of the country column, in sorted order.
std::set<std::string> list_countries(const std::filesystem::path& path);

struct QuestionSummary {
    std::string question_id;
    std::size_t n_valid = 0;
    std::size_t n_missing = 0;
    std::optional<double> unit_mean;  // empty when no valid answers
    bool zero_variance = false;       // fewer than two distinct valid values
};

std::vector<QuestionSummary> population_summary(const ResponseMatrix& matrix);
void write_summary_csv(std::ostream& out, const std::vector<QuestionSummary>& summary);

/// Writes a matrix in the ingestion schema (respondent_id, country, q...).
/// Missing cells are written empty.
void write_responses_csv(std::ostream& out, const ResponseMatrix& matrix, const std::string& country,
                         const std::string& id_prefix = "r");

}  // namespace valign
