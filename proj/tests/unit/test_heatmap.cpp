#include <doctest.h>

#include "support.hpp"
#include "valign/error.hpp"
#include "valign/heatmap.hpp"

using namespace valign;

namespace {

std::size_t count_of(const std::string& hay, const std::string& needle) {
    std::size_t n = 0;
    for (auto pos = hay.find(needle); pos != std::string::npos; pos = hay.find(needle, pos + 1)) ++n;
    return n;
}

}  // namespace

TEST_CASE("heatmap: color stops") {
    CHECK(diverging_color(-1.0) == kNegativeStop);
    CHECK(diverging_color(0.0) == kNeutralStop);
    CHECK(diverging_color(1.0) == kPositiveStop);
    CHECK(diverging_color(7.0) == kPositiveStop);
    CHECK(diverging_color(std::nan("")) == kFlaggedFill);
    CHECK(kNegativeStop.hex() == "#2166ac");
    auto mid = diverging_color(0.5);
    CHECK(mid.r == 213);  // (0xf7 + 0xb2) / 2 rounded half up
}

TEST_CASE("heatmap: triangles come from the right matrix") {
    auto lower = CorrelationMatrix::from_entries({"a", "b", "c"}, {1, -1, 0, -1, 1, 0, 0, 0, 1});
    auto upper = CorrelationMatrix::from_entries({"a", "b", "c"}, {1, 1, 0, 1, 1, 0, 0, 0, 1});
    HeatmapOptions opt;
    opt.title = "T & <x>";
    opt.lower_label = "human";
    opt.upper_label = "model";
    opt.metadata = {{"country", "USA"}};
    const std::string svg = render_heatmap(lower, upper, opt);
    CHECK(svg.rfind("<?xml", 0) == 0);
    CHECK(svg.find("country: USA") != std::string::npos);
    CHECK(svg.find("T &amp; &lt;x&gt;") != std::string::npos);
    CHECK(count_of(svg, "<title>") == 9);
    // (a,b) above the diagonal is +1 from `upper`; (b,a) below is -1 from `lower`.
    CHECK(svg.find("fill=\"" + kPositiveStop.hex() + "\"><title>a x b") != std::string::npos);
    CHECK(svg.find("fill=\"" + kNegativeStop.hex() + "\"><title>b x a") != std::string::npos);
    CHECK(render_heatmap(lower, upper, opt) == svg);

    auto other = CorrelationMatrix::from_entries({"a", "c", "b"}, {1, 0, 0, 0, 1, 0, 0, 0, 1});
    CHECK_THROWS_AS(render_heatmap(lower, other), DataError);
}
