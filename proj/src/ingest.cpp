#include "valign/ingest.hpp"

#include <charconv>
#include <fstream>
#include <unordered_map>

#include <fmt/format.h>

#include "valign/csv.hpp"
#include "valign/error.hpp"
#include "valign/log.hpp"

namespace valign {

OutOfRangeAction parse_out_of_range_action(std::string_view text) {
    if (text == "treat_as_missing") return OutOfRangeAction::treat_as_missing;
    if (text == "reject_row") return OutOfRangeAction::reject_row;
    if (text == "fail") return OutOfRangeAction::fail;
    throw UsageError(fmt::format("unknown out-of-range action '{}'", text));
}

void MissingCodePolicy::check_disjoint(const Survey& survey) const {
    for (const auto& q : survey.questions()) {
        if (all_negative && q.scale.min < 0)
            throw UsageError(fmt::format("missing-code policy treats negatives as missing but "
                                         "question '{}' has scale {}..{}",
                                         q.id, q.scale.min, q.scale.max));
        for (long long code : codes)
            if (q.scale.contains(code))
                throw UsageError(fmt::format("missing code {} lies inside the scale of question '{}'",
                                             code, q.id));
    }
}

Recoded recode_cell(long long raw, const Question& question, const MissingCodePolicy& policy) {
    if (policy.is_missing_code(raw)) return {std::nullopt, false};
    if (question.scale.contains(raw)) return {static_cast<int>(raw), false};
    switch (policy.out_of_range_action) {
        case OutOfRangeAction::treat_as_missing:
            return {std::nullopt, false};
        case OutOfRangeAction::reject_row:
            return {std::nullopt, true};
        case OutOfRangeAction::fail:
            break;
    }
    throw RecodeError(raw, question.id,
                      fmt::format("question '{}': raw value {} is neither a missing code nor on "
                                  "the scale {}..{}",
                                  question.id, raw, question.scale.min, question.scale.max));
}

namespace {

std::optional<long long> parse_integer(std::string_view text) {
    long long value = 0;
    if (!text.empty() && text.front() == '+') text.remove_prefix(1);
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc() || ptr != text.data() + text.size()) return std::nullopt;
    return value;
}

struct Header {
    std::size_t id_col = 0;
    std::size_t country_col = 0;
    std::vector<std::size_t> question_cols;  // aligned to survey order
    std::size_t width = 0;
};

Header read_header(csv::Reader& reader, const Survey* survey) {
    auto rec = reader.next();
    if (!rec) throw DataError("responses csv: file is empty (no header row)");
    std::unordered_map<std::string, std::size_t> index;
    for (std::size_t i = 0; i < rec->size(); ++i) {
        std::string name = csv::trim((*rec)[i]);
        // Tolerate a UTF-8 byte-order mark on the first column.
        if (i == 0 && name.starts_with("\xEF\xBB\xBF")) name.erase(0, 3);
        index.emplace(std::move(name), i);
    }
    auto require = [&](const std::string& name) {
        auto it = index.find(name);
        if (it == index.end())
            throw DataError(fmt::format("responses csv: missing required column '{}'", name));
        return it->second;
    };
    Header h;
    h.width = rec->size();
    h.id_col = require("respondent_id");
    h.country_col = require("country");
    if (survey)
        for (const auto& q : survey->questions()) h.question_cols.push_back(require(q.id));
    return h;
}

}  // namespace

ResponseMatrix load_responses(std::istream& in, const Survey& survey, const std::string& country,
                              const MissingCodePolicy& policy, LoadStats* stats) {
    policy.check_disjoint(survey);
    csv::Reader reader(in);
    Header header = read_header(reader, &survey);
    const std::string wanted = csv::trim(country);

    LoadStats local;
    std::vector<std::vector<Cell>> rows;
    while (auto rec = reader.next()) {
        if (rec->size() == 1 && csv::trim((*rec)[0]).empty()) continue;  // blank line
        ++local.rows_read;
        if (rec->size() != header.width)
            throw DataError(fmt::format("responses csv line {}: {} fields, header has {}",
                                        reader.line(), rec->size(), header.width));
        std::string row_country = csv::trim((*rec)[header.country_col]);
        local.countries_seen.insert(row_country);
        if (row_country != wanted) continue;
        ++local.rows_matched;

        std::vector<Cell> row(survey.size());
        bool rejected = false;
        for (std::size_t q = 0; q < survey.size(); ++q) {
            const Question& question = survey.question(q);
            std::string text = csv::trim((*rec)[header.question_cols[q]]);
            if (text.empty()) continue;
            auto raw = parse_integer(text);
            if (!raw) {
                if (policy.out_of_range_action == OutOfRangeAction::fail)
                    throw DataError(fmt::format("responses csv line {} (respondent '{}'), column "
                                                "'{}': cannot parse '{}' as an integer",
                                                reader.line(), (*rec)[header.id_col], question.id,
                                                text));
                if (policy.out_of_range_action == OutOfRangeAction::reject_row) rejected = true;
                continue;
            }
            try {
                Recoded r = recode_cell(*raw, question, policy);
                row[q] = r.value;
                rejected = rejected || r.reject_row;
            } catch (const RecodeError& e) {
                throw RecodeError(e.raw(), e.question_id(),
                                  fmt::format("responses csv line {} (respondent '{}'), column "
                                              "'{}': {}",
                                              reader.line(), (*rec)[header.id_col], question.id,
                                              e.what()));
            }
        }
        if (rejected) {
            ++local.rows_rejected;
            continue;
        }
        rows.push_back(std::move(row));
    }

    if (stats) *stats = local;
    if (rows.empty()) {
        std::string available;
        for (const auto& c : local.countries_seen) available += (available.empty() ? "" : ", ") + c;
        throw EmptyPopulationError(fmt::format("no usable rows for country '{}' (available: {})",
                                               wanted, available.empty() ? "none" : available));
    }
    log::info("loaded {} rows for country '{}' ({} read, {} rejected)", rows.size(), wanted,
              local.rows_read, local.rows_rejected);
    return ResponseMatrix(HumanPopulation{wanted}, survey.question_ids(), survey.scales(),
                          std::move(rows));
}

ResponseMatrix load_responses(const std::filesystem::path& path, const Survey& survey,
                              const std::string& country, const MissingCodePolicy& policy,
                              LoadStats* stats) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError(fmt::format("cannot open responses file '{}'", path.string()));
    return load_responses(in, survey, country, policy, stats);
}

std::set<std::string> list_countries(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError(fmt::format("cannot open responses file '{}'", path.string()));
    csv::Reader reader(in);
    Header header = read_header(reader, nullptr);
    std::set<std::string> out;
    while (auto rec = reader.next())
        if (header.country_col < rec->size()) {
            std::string c = csv::trim((*rec)[header.country_col]);
            if (!c.empty()) out.insert(std::move(c));
        }
    return out;
}

std::vector<QuestionSummary> population_summary(const ResponseMatrix& matrix) {
    std::vector<QuestionSummary> out;
    out.reserve(matrix.cols());
    for (std::size_t c = 0; c < matrix.cols(); ++c) {
        QuestionSummary s;
        s.question_id = matrix.question_ids()[c];
        double sum = 0.0;
        std::optional<int> first;
        bool varies = false;
        for (std::size_t r = 0; r < matrix.rows(); ++r) {
            const Cell& cell = matrix.at(r, c);
            if (!cell) {
                ++s.n_missing;
                continue;
            }
            ++s.n_valid;
            sum += scale_to_unit(*cell, matrix.scales()[c]);
            if (!first) first = *cell;
            else if (*first != *cell) varies = true;
        }
        if (s.n_valid > 0) s.unit_mean = sum / static_cast<double>(s.n_valid);
        s.zero_variance = !varies;
        out.push_back(std::move(s));
    }
    return out;
}

void write_summary_csv(std::ostream& out, const std::vector<QuestionSummary>& summary) {
    csv::write_record(out, {"question_id", "n_valid", "n_missing", "unit_mean", "zero_variance"});
    for (const auto& s : summary) {
        csv::write_record(out, {s.question_id, std::to_string(s.n_valid), std::to_string(s.n_missing),
                                s.unit_mean ? fmt::format("{}", *s.unit_mean) : std::string("NA"),
                                s.zero_variance ? "1" : "0"});
    }
}

void write_responses_csv(std::ostream& out, const ResponseMatrix& matrix, const std::string& country,
                         const std::string& id_prefix) {
    csv::Record header{"respondent_id", "country"};
    header.insert(header.end(), matrix.question_ids().begin(), matrix.question_ids().end());
    csv::write_record(out, header);
    for (std::size_t r = 0; r < matrix.rows(); ++r) {
        csv::Record rec;
        rec.reserve(matrix.cols() + 2);
        rec.push_back(fmt::format("{}{}", id_prefix, r));
        rec.push_back(country);
        for (const Cell& cell : matrix.row(r)) rec.push_back(cell ? std::to_string(*cell) : "");
        csv::write_record(out, rec);
    }
}

}  // namespace valign
