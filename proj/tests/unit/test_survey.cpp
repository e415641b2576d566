#include <doctest.h>

#include "support.hpp"
#include "valign/error.hpp"
#include "valign/survey.hpp"

using namespace valign;
using nlohmann::json;

namespace {

json question(const std::string& id, int lo, int hi, std::vector<std::string> langs) {
    json prompts = json::object();
    for (const auto& l : langs)
        prompts[l] = {{"direct", id + " " + l + " direct"}, {"cot", id + " " + l + " cot"}};
    return {{"id", id}, {"scale_min", lo}, {"scale_max", hi}, {"prompts", prompts}};
}

std::string survey_error_qid(const json& doc) {
    try {
        validate_survey(doc);
    } catch (const SurveyError& e) {
        return e.question_id();
    }
    return "<none>";
}

}  // namespace

TEST_CASE("survey: well-formed document") {
    json doc = {{"survey_id", "s"},
                {"questions", {question("a", 1, 4, {"en"}), question("b", 1, 10, {"en"})}}};
    Survey s = validate_survey(doc);
    CHECK(s.size() == 2);
    CHECK(s.question(1).id == "b");
    CHECK(s.question(1).scale == Scale{1, 10});
    CHECK(s.index_of("b") == 1);
    CHECK_FALSE(s.index_of("zz").has_value());
    CHECK(s.languages() == std::set<std::string>{"en"});
    CHECK(validate_survey(survey_to_json(s)) == s);
}

TEST_CASE("survey: degenerate scale names the question") {
    json doc = {{"survey_id", "s"},
                {"questions", {question("q1", 1, 4, {"en"}), question("q7", 4, 4, {"en"})}}};
    CHECK(survey_error_qid(doc) == "q7");
    doc["questions"][1]["scale_min"] = 5;
    CHECK(survey_error_qid(doc) == "q7");
}

TEST_CASE("survey: declared language missing a prompt variant") {
    json doc = {{"survey_id", "s"},
                {"languages", {"en", "de"}},
                {"questions", {question("q1", 1, 4, {"en", "de"}), question("q3", 1, 4, {"en", "de"})}}};
    doc["questions"][1]["prompts"]["de"].erase("cot");
    try {
        validate_survey(doc);
        FAIL("expected SurveyError");
    } catch (const SurveyError& e) {
        CHECK(e.question_id() == "q3");
        const std::string msg = e.what();
        CHECK(msg.find("de") != std::string::npos);
        CHECK(msg.find("cot") != std::string::npos);
    }
}

TEST_CASE("survey: duplicate ids and empty prompts") {
    json dup = {{"survey_id", "s"}, {"questions", {question("a", 1, 4, {"en"}), question("a", 1, 4, {"en"})}}};
    CHECK(survey_error_qid(dup) == "a");
    json empty = {{"survey_id", "s"}, {"questions", {question("a", 1, 4, {"en"})}}};
    empty["questions"][0]["prompts"]["en"]["direct"] = "";
    CHECK(survey_error_qid(empty) == "a");
    CHECK_THROWS_AS(validate_survey(json{{"survey_id", "s"}, {"questions", json::array()}}), SurveyError);
}

TEST_CASE("survey: undeclared languages are the intersection") {
    json doc = {{"survey_id", "s"},
                {"questions", {question("a", 1, 4, {"en", "de"}), question("b", 1, 4, {"en", "cs"})}}};
    Survey s = validate_survey(doc);
    CHECK(s.languages() == std::set<std::string>{"en"});
    CHECK(s.question(0).prompts.size() == 1);
}

TEST_CASE("survey: bundled mini survey") {
    Survey s = load_survey(test::data_path("mini_survey.json"));
    CHECK(s.size() == 12);
    CHECK(s.languages() == std::set<std::string>{"cs", "de", "en"});
    CHECK_THROWS_AS(load_survey(test::data_path("does_not_exist.json")), DataError);
}

TEST_CASE("scale_to_unit") {
    CHECK(scale_to_unit(1, Scale{1, 4}) == 0.0);
    CHECK(scale_to_unit(4, Scale{1, 4}) == 1.0);
    CHECK(scale_to_unit(3, Scale{1, 5}) == 0.5);
    CHECK_THROWS_AS(scale_to_unit(0, Scale{1, 4}), DataError);
    CHECK_THROWS_AS(scale_to_unit(5, Scale{1, 4}), DataError);
}

TEST_CASE("response matrix invariants") {
    using test::matrix_of;
    CHECK_THROWS_AS(matrix_of({{1, 5}}, {Scale{1, 4}, Scale{1, 4}}), DataError);
    CHECK_THROWS_AS(matrix_of({{1}}, {Scale{1, 4}, Scale{1, 4}}), DataError);
    CHECK_THROWS_AS(matrix_of({}, {Scale{1, 4}}), DataError);
    auto m = matrix_of({{1, std::nullopt}, {2, 3}, {4, 4}}, {Scale{1, 4}, Scale{1, 4}});
    CHECK(m.rows() == 3);
    CHECK_FALSE(m.at(0, 1).has_value());
    CHECK(m.column_of("q2") == 1);
    CHECK(m.prefix(2).rows() == 2);
    const std::size_t pick[] = {2, 2, 0};
    auto r = m.select_rows(pick);
    CHECK(r.at(0, 0) == 4);
    CHECK(r.at(1, 0) == 4);
    CHECK(r.at(2, 0) == 1);
    CHECK(describe(m.source()).find("T") != std::string::npos);
}
