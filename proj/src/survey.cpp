#include "valign/survey.hpp"

#include <algorithm>
#include <fstream>
#include <unordered_set>

#include <fmt/format.h>

#include "valign/error.hpp"

namespace valign {

using nlohmann::json;

std::string_view to_string(PromptStyle style) {
    return style == PromptStyle::direct ? "direct" : "cot";
}

PromptStyle parse_prompt_style(std::string_view text) {
    if (text == "direct") return PromptStyle::direct;
    if (text == "cot") return PromptStyle::cot;
    throw UsageError(fmt::format("unknown prompt style '{}' (expected direct or cot)", text));
}

std::optional<std::size_t> Survey::index_of(std::string_view question_id) const {
    for (std::size_t i = 0; i < questions_.size(); ++i)
        if (questions_[i].id == question_id) return i;
    return std::nullopt;
}

std::vector<std::string> Survey::question_ids() const {
    std::vector<std::string> ids;
    ids.reserve(questions_.size());
    for (const auto& q : questions_) ids.push_back(q.id);
    return ids;
}

std::vector<Scale> Survey::scales() const {
    std::vector<Scale> out;
    out.reserve(questions_.size());
    for (const auto& q : questions_) out.push_back(q.scale);
    return out;
}

namespace {

std::string read_prompt(const json& prompts, const std::string& qid, const std::string& lang,
                        const char* variant) {
    auto lang_it = prompts.find(lang);
    if (lang_it == prompts.end() || !lang_it->is_object())
        throw SurveyError(qid, fmt::format("question '{}': missing prompts for language '{}' "
                                           "(need {}/{}/{})",
                                           qid, lang, qid, lang, variant));
    auto it = lang_it->find(variant);
    if (it == lang_it->end() || !it->is_string() || it->get_ref<const std::string&>().empty())
        throw SurveyError(qid, fmt::format("question '{}': missing {} prompt for language '{}' "
                                           "({}/{}/{})",
                                           qid, variant, lang, qid, lang, variant));
    return it->get<std::string>();
}

}  // namespace

Survey validate_survey(const json& document) {
    if (!document.is_object()) throw SurveyError("", "survey document must be a JSON object");
    Survey survey;
    try {
        survey.survey_id_ = document.at("survey_id").get<std::string>();
        const json& questions = document.at("questions");
        if (!questions.is_array() || questions.empty())
            throw SurveyError("", "survey must contain a non-empty 'questions' array");

        std::optional<std::set<std::string>> declared;
        if (auto it = document.find("languages"); it != document.end())
            declared = it->get<std::set<std::string>>();

        std::unordered_set<std::string> seen;
        for (const json& raw : questions) {
            Question q;
            q.id = raw.at("id").get<std::string>();
            if (q.id.empty()) throw SurveyError("", "question with empty id");
            if (!seen.insert(q.id).second)
                throw SurveyError(q.id, fmt::format("duplicate question id '{}'", q.id));
            q.scale.min = raw.at("scale_min").get<int>();
            q.scale.max = raw.at("scale_max").get<int>();
            if (q.scale.max <= q.scale.min)
                throw SurveyError(q.id, fmt::format("question '{}': degenerate scale {}..{}", q.id,
                                                    q.scale.min, q.scale.max));
            const json& prompts = raw.at("prompts");
            if (!prompts.is_object())
                throw SurveyError(q.id, fmt::format("question '{}': prompts must be an object", q.id));

            std::set<std::string> langs;
            if (declared) {
                langs = *declared;
            } else {
                for (const auto& [lang, _] : prompts.items()) langs.insert(lang);
            }
            for (const auto& lang : langs) {
                PromptPair pair;
                pair.direct = read_prompt(prompts, q.id, lang, "direct");
                pair.cot = read_prompt(prompts, q.id, lang, "cot");
                q.prompts.emplace(lang, std::move(pair));
            }
            survey.questions_.push_back(std::move(q));
        }

        if (declared) {
            survey.languages_ = *declared;
        } else {
            // Intersection of per-question languages; prompt maps are trimmed to it.
            survey.languages_.clear();
            bool first = true;
            for (const auto& q : survey.questions_) {
                std::set<std::string> langs;
                for (const auto& [lang, _] : q.prompts) langs.insert(lang);
                if (first) {
                    survey.languages_ = std::move(langs);
                    first = false;
                } else {
                    std::set<std::string> both;
                    std::set_intersection(survey.languages_.begin(), survey.languages_.end(),
                                          langs.begin(), langs.end(),
                                          std::inserter(both, both.begin()));
                    survey.languages_ = std::move(both);
                }
            }
            for (auto& q : survey.questions_)
                std::erase_if(q.prompts,
                              [&](const auto& kv) { return !survey.languages_.contains(kv.first); });
        }
        if (survey.languages_.empty())
            throw SurveyError("", "survey declares no language shared by every question");
    } catch (const json::exception& e) {
        throw SurveyError("", fmt::format("malformed survey document: {}", e.what()));
    }
    return survey;
}

Survey load_survey(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError(fmt::format("cannot open survey file '{}'", path.string()));
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::parse_error& e) {
        throw SurveyError("", fmt::format("survey file '{}' is not valid JSON: {}", path.string(),
                                          e.what()));
    }
    return validate_survey(doc);
}

json survey_to_json(const Survey& survey) {
    json questions = json::array();
    for (const auto& q : survey.questions()) {
        json prompts = json::object();
        for (const auto& [lang, pair] : q.prompts)
            prompts[lang] = {{"direct", pair.direct}, {"cot", pair.cot}};
        questions.push_back({{"id", q.id},
                             {"scale_min", q.scale.min},
                             {"scale_max", q.scale.max},
                             {"prompts", std::move(prompts)}});
    }
    return {{"survey_id", survey.survey_id()},
            {"languages", survey.languages()},
            {"questions", std::move(questions)}};
}

double scale_to_unit(long long answer, const Scale& scale) {
    if (!scale.contains(answer))
        throw DataError(fmt::format("answer {} outside scale {}..{}", answer, scale.min, scale.max));
    return static_cast<double>(answer - scale.min) / static_cast<double>(scale.max - scale.min);
}

double scale_to_unit(long long answer, const Question& question) {
    if (!question.scale.contains(answer))
        throw DataError(fmt::format("question '{}': answer {} outside scale {}..{}", question.id,
                                    answer, question.scale.min, question.scale.max));
    return scale_to_unit(answer, question.scale);
}

std::string describe(const MatrixSource& source) {
    if (const auto* h = std::get_if<HumanPopulation>(&source)) return "human:" + h->country;
    return "model:" + std::get<ModelRuns>(source).label;
}

ResponseMatrix::ResponseMatrix(MatrixSource source, std::vector<std::string> question_ids,
                               std::vector<Scale> scales, std::vector<std::vector<Cell>> rows)
    : source_(std::move(source)),
      question_ids_(std::move(question_ids)),
      scales_(std::move(scales)),
      n_rows_(rows.size()) {
    if (question_ids_.size() != scales_.size())
        throw DataError("response matrix: question id and scale lists differ in length");
    if (rows.empty()) throw EmptyPopulationError(fmt::format("{}: no rows", describe(source_)));
    cells_.reserve(rows.size() * cols());
    for (std::size_t r = 0; r < rows.size(); ++r) {
        if (rows[r].size() != cols())
            throw DataError(fmt::format("response matrix row {} has {} cells, expected {}", r,
                                        rows[r].size(), cols()));
        for (std::size_t c = 0; c < cols(); ++c) {
            const Cell& cell = rows[r][c];
            if (cell && !scales_[c].contains(*cell))
                throw DataError(fmt::format("response matrix row {} question '{}': value {} "
                                            "outside scale {}..{}",
                                            r, question_ids_[c], *cell, scales_[c].min,
                                            scales_[c].max));
            cells_.push_back(cell);
        }
    }
}

std::optional<std::size_t> ResponseMatrix::column_of(std::string_view question_id) const {
    for (std::size_t i = 0; i < question_ids_.size(); ++i)
        if (question_ids_[i] == question_id) return i;
    return std::nullopt;
}

ResponseMatrix ResponseMatrix::prefix(std::size_t k) const {
    if (k == 0 || k > n_rows_)
        throw DataError(fmt::format("prefix of {} rows requested from a {}-row matrix", k, n_rows_));
    ResponseMatrix out;
    out.source_ = source_;
    out.question_ids_ = question_ids_;
    out.scales_ = scales_;
    out.n_rows_ = k;
    out.cells_.assign(cells_.begin(), cells_.begin() + static_cast<std::ptrdiff_t>(k * cols()));
    return out;
}

ResponseMatrix ResponseMatrix::select_rows(std::span<const std::size_t> indices) const {
    if (indices.empty()) throw EmptyPopulationError("row selection is empty");
    ResponseMatrix out;
    out.source_ = source_;
    out.question_ids_ = question_ids_;
    out.scales_ = scales_;
    out.n_rows_ = indices.size();
    out.cells_.reserve(indices.size() * cols());
    for (std::size_t idx : indices) {
        if (idx >= n_rows_) throw DataError(fmt::format("row index {} out of range", idx));
        auto r = row(idx);
        out.cells_.insert(out.cells_.end(), r.begin(), r.end());
    }
    return out;
}

}  // namespace valign
