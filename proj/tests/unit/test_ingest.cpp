#include <doctest.h>

#include <sstream>

#include "support.hpp"
#include "valign/error.hpp"
#include "valign/ingest.hpp"

using namespace valign;
using nlohmann::json;

namespace {

Survey two_question_survey() {
    json p = {{"en", {{"direct", "d"}, {"cot", "c"}}}};
    return validate_survey({{"survey_id", "t"},
                            {"questions",
                             {{{"id", "a"}, {"scale_min", 1}, {"scale_max", 4}, {"prompts", p}},
                              {{"id", "b"}, {"scale_min", 1}, {"scale_max", 3}, {"prompts", p}}}}});
}

MissingCodePolicy codes(std::set<long long> c, OutOfRangeAction action = OutOfRangeAction::treat_as_missing) {
    MissingCodePolicy p;
    p.codes = std::move(c);
    p.all_negative = false;
    p.out_of_range_action = action;
    return p;
}

}  // namespace

TEST_CASE("recode_cell") {
    const Question q{"a", Scale{1, 4}, {}};
    CHECK(recode_cell(3, q, codes({-1})).value == 3);
    CHECK_FALSE(recode_cell(-1, q, codes({-1})).value.has_value());
    CHECK_FALSE(recode_cell(-2, q, codes({-1, -2, -4})).value.has_value());
    CHECK_FALSE(recode_cell(7, q, codes({})).value.has_value());
    CHECK_THROWS_AS(recode_cell(7, q, codes({}, OutOfRangeAction::fail)), RecodeError);
    CHECK(recode_cell(7, q, codes({}, OutOfRangeAction::reject_row)).reject_row);
    MissingCodePolicy neg;
    CHECK_FALSE(recode_cell(-99, q, neg).value.has_value());
}

TEST_CASE("missing codes must not overlap a scale") {
    CHECK_THROWS_AS(codes({2}).check_disjoint(two_question_survey()), UsageError);
    CHECK_NOTHROW(codes({-1, 9}).check_disjoint(two_question_survey()));
}

TEST_CASE("load_responses: country filter and recoding") {
    const Survey s = two_question_survey();
    std::istringstream in(
        "respondent_id,country,a,b,extra\n"
        "1,USA,1,2,x\n2,USA,2,-2,x\n3,GBR,3,3,x\n4,USA,9,1,x\n5,GBR,1,1,x\n"
        "6,USA,4,,x\n7,USA,3,3,x\n8,GBR,2,2,x\n");
    LoadStats stats;
    auto m = load_responses(in, s, "USA", codes({-1, -2, -4}), &stats);
    CHECK(m.rows() == 5);
    CHECK(stats.rows_read == 8);
    CHECK(stats.countries_seen == std::set<std::string>{"GBR", "USA"});
    CHECK(m.at(0, 0) == 1);
    CHECK_FALSE(m.at(1, 1).has_value());  // -2 is a missing code
    CHECK_FALSE(m.at(2, 0).has_value());  // 9 is off-scale
    CHECK_FALSE(m.at(3, 1).has_value());  // empty cell
    CHECK(std::get<HumanPopulation>(m.source()).country == "USA");
}

TEST_CASE("load_responses: fail and reject_row policies") {
    const Survey s = two_question_survey();
    const std::string body = "respondent_id,country,a,b\n1,USA,1,2\n2,USA,9,1\n3,USA,2,2\n";
    {
        std::istringstream in(body);
        try {
            load_responses(in, s, "USA", codes({}, OutOfRangeAction::fail));
            FAIL("expected RecodeError");
        } catch (const RecodeError& e) {
            CHECK(e.question_id() == "a");
            CHECK(std::string(e.what()).find("line 3 (respondent '2')") != std::string::npos);
        }
    }
    {
        std::istringstream in(body);
        LoadStats stats;
        auto m = load_responses(in, s, "USA", codes({}, OutOfRangeAction::reject_row), &stats);
        CHECK(m.rows() == 2);
        CHECK(stats.rows_rejected == 1);
    }
    {
        std::istringstream in("respondent_id,country,a,b\n1,USA,x,2\n");
        CHECK_THROWS_AS(load_responses(in, s, "USA", codes({}, OutOfRangeAction::fail)), DataError);
    }
}

TEST_CASE("load_responses: structural errors") {
    const Survey s = two_question_survey();
    std::istringstream missing_col("respondent_id,country,a\n1,USA,1\n");
    CHECK_THROWS_AS(load_responses(missing_col, s, "USA", codes({})), DataError);
    std::istringstream nobody("respondent_id,country,a,b\n1,GBR,1,1\n");
    try {
        load_responses(nobody, s, "USA", codes({}));
        FAIL("expected EmptyPopulationError");
    } catch (const EmptyPopulationError& e) {
        CHECK(std::string(e.what()).find("GBR") != std::string::npos);
    }
}

TEST_CASE("population_summary") {
    auto m = test::matrix_of({{1, 2, std::nullopt}, {1, 2, std::nullopt}, {3, 2, std::nullopt},
                              {std::nullopt, std::nullopt, std::nullopt}},
                             {Scale{1, 3}, Scale{1, 3}, Scale{1, 3}});
    auto sum = population_summary(m);
    REQUIRE(sum.size() == 3);
    CHECK(sum[0].n_valid == 3);
    CHECK(sum[0].n_missing == 1);
    CHECK(*sum[0].unit_mean == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
    CHECK_FALSE(sum[0].zero_variance);
    CHECK(*sum[1].unit_mean == 0.5);
    CHECK(sum[1].zero_variance);
    CHECK(sum[2].n_valid == 0);
    CHECK_FALSE(sum[2].unit_mean.has_value());
    CHECK(sum[2].zero_variance);
}

TEST_CASE("responses CSV round trip") {
    const Survey s = two_question_survey();
    auto m = test::matrix_of({{1, 3}, {std::nullopt, 2}}, {Scale{1, 4}, Scale{1, 3}});
    // matrix_of names columns q1, q2; rebuild with the survey's ids
    ResponseMatrix named(HumanPopulation{"ZZ"}, {"a", "b"}, m.scales(),
                         {{1, 3}, {std::nullopt, 2}});
    std::ostringstream out;
    write_responses_csv(out, named, "ZZ");
    std::istringstream in(out.str());
    auto back = load_responses(in, s, "ZZ", codes({}));
    CHECK(back.rows() == 2);
    CHECK(back.at(0, 1) == 3);
    CHECK_FALSE(back.at(1, 0).has_value());
}
