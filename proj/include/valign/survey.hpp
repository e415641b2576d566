#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <json.hpp>

namespace valign {

enum class PromptStyle { direct, cot };

std::string_view to_string(PromptStyle style);
PromptStyle parse_prompt_style(std::string_view text);

/// Inclusive integer answer scale. Always non-degenerate (max > min).
struct Scale {
    int min = 1;
    int max = 2;

    int size() const noexcept { return max - min + 1; }
    bool contains(long long value) const noexcept { return value >= min && value <= max; }
    friend bool operator==(const Scale&, const Scale&) = default;
};

struct PromptPair {
    std::string direct;
    std::string cot;

    const std::string& get(PromptStyle style) const {
        return style == PromptStyle::direct ? direct : cot;
    }
    friend bool operator==(const PromptPair&, const PromptPair&) = default;
};

struct Question {
    std::string id;
    Scale scale;
    std::map<std::string, PromptPair> prompts;  // keyed by language code

    friend bool operator==(const Question&, const Question&) = default;
};

/// Ordered question set; question order is the administration order.
class Survey {
public:
    Survey() = default;

    const std::string& survey_id() const noexcept { return survey_id_; }
    const std::vector<Question>& questions() const noexcept { return questions_; }
    const std::set<std::string>& languages() const noexcept { return languages_; }
    std::size_t size() const noexcept { return questions_.size(); }

    const Question& question(std::size_t index) const { return questions_.at(index); }
    std::optional<std::size_t> index_of(std::string_view question_id) const;
    std::vector<std::string> question_ids() const;
    std::vector<Scale> scales() const;

    friend bool operator==(const Survey&, const Survey&) = default;

private:
    friend Survey validate_survey(const nlohmann::json& document);

    std::string survey_id_;
    std::vector<Question> questions_;
    std::set<std::string> languages_;
};

/// Parses and validates a survey document. Throws SurveyError naming the
/// offending question on duplicate ids, degenerate scales or missing prompts.
Survey validate_survey(const nlohmann::json& document);
Survey load_survey(const std::filesystem::path& path);
nlohmann::json survey_to_json(const Survey& survey);

/// Affine map of an in-scale answer onto [0, 1]. Throws DataError when the
/// answer lies outside the scale.
double scale_to_unit(long long answer, const Scale& scale);
double scale_to_unit(long long answer, const Question& question);

/// A single answer; std::nullopt is the missing state.
using Cell = std::optional<int>;

struct HumanPopulation {
    std::string country;
    friend bool operator==(const HumanPopulation&, const HumanPopulation&) = default;
};

struct ModelRuns {
    std::string label;
    friend bool operator==(const ModelRuns&, const ModelRuns&) = default;
};

using MatrixSource = std::variant<HumanPopulation, ModelRuns>;

std::string describe(const MatrixSource& source);

/// Respondents (or sessions) x questions grid of integer-or-missing answers.
/// Row-major storage. Immutable after construction.
class ResponseMatrix {
public:
    /// Throws DataError if any non-missing cell lies outside its question's
    /// scale, if row widths differ from the question count, or if there are
    /// no rows.
    ResponseMatrix(MatrixSource source, std::vector<std::string> question_ids,
                   std::vector<Scale> scales, std::vector<std::vector<Cell>> rows);

    const MatrixSource& source() const noexcept { return source_; }
    const std::vector<std::string>& question_ids() const noexcept { return question_ids_; }
    const std::vector<Scale>& scales() const noexcept { return scales_; }

    std::size_t rows() const noexcept { return n_rows_; }
    std::size_t cols() const noexcept { return question_ids_.size(); }

    const Cell& at(std::size_t row, std::size_t col) const { return cells_[row * cols() + col]; }
    std::span<const Cell> row(std::size_t r) const {
        return {cells_.data() + r * cols(), cols()};
    }

    std::optional<std::size_t> column_of(std::string_view question_id) const;

    /// First k rows, in order.
    ResponseMatrix prefix(std::size_t k) const;
    /// Rows picked by index; indices may repeat (bootstrap resampling).
    ResponseMatrix select_rows(std::span<const std::size_t> indices) const;

private:
    ResponseMatrix() = default;

    MatrixSource source_;
    std::vector<std::string> question_ids_;
    std::vector<Scale> scales_;
    std::vector<Cell> cells_;
    std::size_t n_rows_ = 0;
};

}  // namespace valign
