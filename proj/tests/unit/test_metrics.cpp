#include <doctest.h>

#include <cmath>
#include <random>

#include "support.hpp"
#include "valign/error.hpp"
#include "valign/metrics.hpp"

using namespace valign;
using test::matrix_of;

namespace {

ResponseMatrix model_of(std::vector<std::vector<Cell>> rows, std::vector<Scale> scales) {
    return matrix_of(std::move(rows), std::move(scales), ModelRuns{"m"});
}

// Fills a column of `rows` respondents so its unit mean is exactly `p` on a 0/1 scale.
std::vector<std::vector<Cell>> binary_rows(std::vector<double> means, std::size_t rows) {
    std::vector<std::vector<Cell>> out(rows, std::vector<Cell>(means.size()));
    for (std::size_t j = 0; j < means.size(); ++j) {
        const auto ones = static_cast<std::size_t>(std::lround(means[j] * static_cast<double>(rows)));
        for (std::size_t i = 0; i < rows; ++i) out[i][j] = i < ones ? 2 : 1;
    }
    return out;
}

CorrelationMatrix dense(std::vector<double> entries, std::size_t n) {
    return CorrelationMatrix::from_entries(test::ids(n), std::move(entries));
}

}  // namespace

TEST_CASE("metrics: msd modes") {
    const std::vector<Scale> s2(2, Scale{1, 2});
    auto m = model_of(binary_rows({0.8, 0.2}, 10), s2);
    auto h = matrix_of(binary_rows({0.5, 0.2}, 10), s2);
    CHECK(msd(m, h, MsdMode::mean_vs_mean) == doctest::Approx(0.045).epsilon(1e-14));
    CHECK(msd(h, h, MsdMode::mean_vs_mean) == 0.0);

    const std::vector<Scale> s1{Scale{1, 2}};
    auto samples = model_of({{1}, {2}}, s1);
    auto half = matrix_of({{1}, {2}}, s1);
    CHECK(msd(samples, half, MsdMode::sample_vs_mean) == 0.25);
    CHECK(msd(samples, half, MsdMode::mean_vs_mean) == 0.0);
}

TEST_CASE("metrics: msd skips questions with no valid answers") {
    const std::vector<Scale> s2(2, Scale{1, 4});
    auto m = model_of({{1, std::nullopt}, {4, std::nullopt}}, s2);
    auto h = matrix_of({{4, 1}, {4, 2}}, s2);
    auto d = msd_detail(m, h, MsdMode::mean_vs_mean);
    CHECK(d.questions_used == 1);
    CHECK(d.questions_excluded == 1);
    CHECK(d.value == doctest::Approx(0.25));
    auto none = model_of({{std::nullopt, std::nullopt}}, s2);
    CHECK_THROWS_AS(msd(none, h, MsdMode::mean_vs_mean), DataError);
}

TEST_CASE("metrics: columns are matched by id and scale") {
    auto m = ResponseMatrix(ModelRuns{"m"}, {"b", "a"}, {Scale{1, 4}, Scale{1, 2}}, {{4, 1}});
    auto h = ResponseMatrix(HumanPopulation{"h"}, {"a", "b"}, {Scale{1, 2}, Scale{1, 4}}, {{1, 4}});
    CHECK(msd(m, h, MsdMode::mean_vs_mean) == 0.0);
    auto clash = ResponseMatrix(HumanPopulation{"h"}, {"a"}, {Scale{1, 3}}, {{1}});
    CHECK_THROWS_AS(msd(m, clash, MsdMode::mean_vs_mean), DataError);
    auto disjoint = ResponseMatrix(HumanPopulation{"h"}, {"z"}, {Scale{1, 3}}, {{1}});
    CHECK_THROWS_AS(msd(m, disjoint, MsdMode::mean_vs_mean), DataError);
}

TEST_CASE("metrics: answer distribution with smoothing") {
    const std::vector<Scale> s{Scale{1, 2}};
    auto m = matrix_of({{1}, {1}, {1}, {2}}, s);
    auto d = answer_distribution(m, 0, 0.0);
    CHECK(d.probabilities == std::vector<double>{0.75, 0.25});
    auto z = matrix_of({{1}, {1}}, s);
    auto sm = answer_distribution(z, 0, 0.5);
    CHECK(sm.probabilities[0] == doctest::Approx(2.5 / 3.0).epsilon(1e-15));
    CHECK(sm.probabilities[1] == doctest::Approx(0.5 / 3.0).epsilon(1e-15));
    auto u = answer_distribution(matrix_of({{1}, {2}, {3}}, {Scale{1, 3}}), 0, 0.0);
    CHECK(u.probabilities[0] == doctest::Approx(1.0 / 3.0));
    CHECK(u.probabilities[2] == doctest::Approx(1.0 / 3.0));
    CHECK_THROWS_AS(answer_distribution(matrix_of({{std::nullopt}}, s), 0, 0.5), DataError);
}

TEST_CASE("metrics: kl divergence") {
    const std::vector<double> p{0.75, 0.25}, q{0.5, 0.5};
    // Brute-force reference: accumulate the two terms explicitly.
    double oracle = 0.0;
    for (std::size_t i = 0; i < 2; ++i) oracle += p[i] * std::log(p[i] / q[i]);
    CHECK(kl_divergence(p, q) == doctest::Approx(oracle).epsilon(1e-15));
    CHECK(kl_divergence(p, q) == doctest::Approx(0.1308).epsilon(1e-3));
    CHECK(kl_divergence(p, p) == 0.0);
    const std::vector<double> zero{1.0, 0.0};
    CHECK(kl_divergence(zero, q) == doctest::Approx(std::log(2.0)));
    try {
        kl_divergence(q, zero);
        FAIL("expected DataError");
    } catch (const DataError& e) {
        CHECK(std::string(e.what()).find("alpha") != std::string::npos);
    }
}

TEST_CASE("metrics: kld over matrices") {
    const std::vector<Scale> s{Scale{1, 2}};
    auto m = model_of({{1}, {1}, {1}, {2}}, s);
    auto h = matrix_of({{1}, {2}}, s);
    CHECK(kld(m, h, 0.0) == doctest::Approx(0.75 * std::log(1.5) + 0.25 * std::log(0.5)));
    CHECK(kld(m, m, 0.5) == 0.0);
    CHECK(kld(m, h, 0.0, KlDirection::human_to_model) ==
          doctest::Approx(0.5 * std::log(0.5 / 0.75) + 0.5 * std::log(0.5 / 0.25)));
    auto only_ones = matrix_of({{1}, {1}}, s);
    CHECK_THROWS_AS(kld(m, only_ones, 0.0), DataError);
    CHECK(kld(m, only_ones, 0.5) > 0.0);
}

TEST_CASE("metrics: pairwise-complete correlation matrix") {
    const std::vector<Scale> s(3, Scale{1, 4});
    auto m = matrix_of({{1, 4, 1}, {2, 3, 1}, {3, 2, 1}, {4, 1, 1}}, s);
    auto c = correlation_matrix(m, 2);
    CHECK(c.at(0, 0) == 1.0);
    CHECK(c.at(0, 1) == -1.0);
    CHECK(c.at(1, 0) == -1.0);
    CHECK(c.flag(0, 2) == EntryFlag::zero_variance);
    CHECK(c.at(0, 2) == 0.0);
    CHECK(c.flag(2, 2) == EntryFlag::zero_variance);
    CHECK(c.flagged_count() > 0);

    auto same = matrix_of({{1, 1}, {3, 3}, {2, 2}}, {Scale{1, 4}, Scale{1, 4}});
    CHECK(correlation_matrix(same, 2).at(0, 1) == 1.0);

    auto sparse = matrix_of({{1, std::nullopt}, {2, 3}, {3, 4}, {std::nullopt, 1}},
                            {Scale{1, 4}, Scale{1, 4}});
    auto cs = correlation_matrix(sparse, 3);
    CHECK(cs.pairs(0, 1) == 2);
    CHECK(cs.flag(0, 1) == EntryFlag::insufficient_pairs);
    CHECK(cs.at(0, 1) == 0.0);
}

TEST_CASE("metrics: correlation matrix equals two-pass brute force") {
    std::mt19937_64 rng(17);
    auto m = test::random_matrix(rng, 4, 3, 0.0, 6);
    auto c = correlation_matrix(m, 2);
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t j = 0; j < 3; ++j) {
            double mx = 0, my = 0;
            for (std::size_t r = 0; r < 4; ++r) {
                mx += *m.at(r, i);
                my += *m.at(r, j);
            }
            mx /= 4;
            my /= 4;
            double sxy = 0, sxx = 0, syy = 0;
            for (std::size_t r = 0; r < 4; ++r) {
                sxy += (*m.at(r, i) - mx) * (*m.at(r, j) - my);
                sxx += (*m.at(r, i) - mx) * (*m.at(r, i) - mx);
                syy += (*m.at(r, j) - my) * (*m.at(r, j) - my);
            }
            if (sxx == 0 || syy == 0) {
                CHECK(c.flag(i, j) == EntryFlag::zero_variance);
                continue;
            }
            CHECK(std::abs(c.at(i, j) - sxy / std::sqrt(sxx * syy)) <= 1e-12);
        }
}

TEST_CASE("metrics: corr_norm") {
    CHECK(corr_norm(dense({1, 0, 0, 0, 1, 0, 0, 0, 1}, 3)) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(corr_norm(dense(std::vector<double>(9, 1.0), 3)) == doctest::Approx(std::sqrt(3.0)).epsilon(1e-15));
    CHECK(corr_norm(dense(std::vector<double>(9, 1.0), 3), Normalization::raw) == doctest::Approx(3.0));
}

TEST_CASE("metrics: corr_distance") {
    auto a = dense({1, 0, 0, 1}, 2);
    auto b = dense({1, 0.6, 0.6, 1}, 2);
    CHECK(corr_distance(a, a) == 0.0);
    CHECK(corr_distance(a, b, Normalization::raw) == doctest::Approx(std::sqrt(2 * 0.36)).epsilon(1e-15));
    CHECK(corr_distance(a, b) == doctest::Approx(std::sqrt(0.36)).epsilon(1e-15));
    CHECK(corr_distance(a, b) == corr_distance(b, a));

    // Restriction to shared ids, in A's order.
    auto c3 = CorrelationMatrix::from_entries({"q2", "q1", "zz"}, {1, 0.6, 0, 0.6, 1, 0, 0, 0, 1});
    auto d = corr_distance_detail(a, c3, Normalization::raw);
    CHECK(d.questions == 2);
    CHECK(d.value == doctest::Approx(std::sqrt(2 * 0.36)));

    auto disjoint = CorrelationMatrix::from_entries({"x"}, {1});
    CHECK_THROWS_AS(corr_distance(a, disjoint), DataError);
    CHECK_THROWS_AS(CorrelationMatrix::from_entries({"a", "b"}, {1, 0.2, 0.3, 1}), DataError);
    CHECK_THROWS_AS(CorrelationMatrix::from_entries({"a", "b"}, {1, 2, 2, 1}), DataError);
}

TEST_CASE("metrics: corr_distance masks flagged entries") {
    const std::vector<Scale> s(3, Scale{1, 4});
    // Column 3 is constant: its diagonal is flagged and the question drops out.
    auto m = matrix_of({{1, 4, 2}, {2, 3, 2}, {3, 2, 2}, {4, 1, 2}}, s);
    auto h = matrix_of({{1, 1, 1}, {2, 2, 4}, {3, 3, 2}, {4, 4, 3}}, s);
    auto cm = correlation_matrix(m, 2), ch = correlation_matrix(h, 2);
    auto d = corr_distance_detail(cm, ch, Normalization::raw);
    CHECK(d.questions == 2);
    CHECK(d.value == doctest::Approx(std::sqrt(2.0 * 4.0)));
}

TEST_CASE("metrics: pearson, spearman, point-biserial") {
    const std::vector<double> x{1, 2, 3}, y{1, 3, 2};
    CHECK(pearson(x, x) == doctest::Approx(1.0));
    const std::vector<double> neg{-1, 0, 1}, pos{1, 0, -1};
    CHECK(pearson(neg, pos) == -1.0);
    CHECK(pearson(x, y) == doctest::Approx(0.5).epsilon(1e-15));
    const std::vector<double> flat{2, 2, 2};
    CHECK_THROWS_AS(pearson(x, flat), DataError);

    const std::vector<double> base{0.3, -1.2, 5.0, 2.2}, mono{std::exp(0.3), std::exp(-1.2), std::exp(5.0), std::exp(2.2)};
    CHECK(spearman(base, mono) == doctest::Approx(1.0));
    const std::vector<double> a{1, 2, 3, 4}, b{10, 8, 9, 7};
    CHECK(spearman(a, b) == -0.8);
    const std::vector<double> tie{1, 1, 2};
    CHECK(average_ranks(tie) == std::vector<double>{1.5, 1.5, 3});

    const std::vector<int> ind{1, 1, 0, 0};
    const std::vector<double> same{3, 3, 3, 3};
    CHECK_THROWS_AS(point_biserial(ind, same), DataError);
    const std::vector<double> both{1, 2, 1, 2};
    CHECK(point_biserial(ind, both) == 0.0);
    const std::vector<double> sep{2, 2, 1, 1};
    CHECK(point_biserial(ind, sep) == 1.0);
    const std::vector<int> alt{1, 0, 1, 0};
    const std::vector<double> v{3, 1, 2, 2};
    const std::vector<double> alt_d{1, 0, 1, 0};
    CHECK(point_biserial(alt, v) == doctest::Approx(pearson(alt_d, v)).epsilon(1e-15));
    CHECK(point_biserial(alt, v) == doctest::Approx(std::sqrt(0.5)).epsilon(1e-12));
    const std::vector<int> single{1, 1, 1, 1};
    CHECK_THROWS_AS(point_biserial(single, v), DataError);
    const std::vector<int> nonbinary{1, 2, 0, 0};
    CHECK_THROWS_AS(point_biserial(nonbinary, v), DataError);
}

TEST_CASE("metrics: property checks on random matrices") {
    std::mt19937_64 rng(2024);
    for (int trial = 0; trial < 25; ++trial) {
        auto m = test::random_matrix(rng, 40, 6, 0.1, 4, ModelRuns{"m"});
        auto h = test::random_matrix(rng, 60, 6, 0.1, 4);
        const double v = msd(m, h, MsdMode::sample_vs_mean);
        CHECK(v >= 0.0);
        CHECK(v <= 1.0);
        CHECK(msd(m, h, MsdMode::mean_vs_mean) <= v + 1e-15);  // sample mode adds the model variance
        CHECK(kld(m, h, 0.5) >= 0.0);
        CHECK(kld(h, h, 0.5) == 0.0);
    }
}

TEST_CASE("metrics: compute_alignment") {
    std::mt19937_64 rng(3);
    auto m = test::random_matrix(rng, 30, 5, 0.0, 4, ModelRuns{"m"});
    auto h = test::random_matrix(rng, 50, 5, 0.0, 4);
    auto r = compute_alignment(m, h, {}, {"mod", "en", "cot", "greedy", "RND"});
    CHECK(r.sessions == 30);
    CHECK(r.human_respondents == 50);
    CHECK(r.questions_used == 5);
    CHECK(r.msd == msd(m, h, MsdMode::sample_vs_mean));
    CHECK(r.corr_distance.has_value());
    auto one = compute_alignment(m.prefix(1), h, {});
    CHECK_FALSE(one.corr_distance.has_value());
    CHECK_FALSE(one.corr_norm_model.has_value());
    CHECK(one.corr_norm_human.has_value());
}
