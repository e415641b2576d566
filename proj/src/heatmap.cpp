#include "valign/heatmap.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "valign/error.hpp"

namespace valign {

std::string Rgb::hex() const { return fmt::format("#{:02x}{:02x}{:02x}", r, g, b); }

namespace {

std::uint8_t lerp(std::uint8_t a, std::uint8_t b, double t) {
    return static_cast<std::uint8_t>(std::lround(a + (static_cast<double>(b) - a) * t));
}

Rgb mix(Rgb a, Rgb b, double t) { return {lerp(a.r, b.r, t), lerp(a.g, b.g, t), lerp(a.b, b.b, t)}; }

std::string xml_escape(std::string_view s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            default: out.push_back(c);
        }
    }
    return out;
}

std::string comment_safe(std::string s) {
    for (std::size_t pos; (pos = s.find("--")) != std::string::npos;) s.replace(pos, 2, "- -");
    return s;
}

}  // namespace

Rgb diverging_color(double value) {
    if (std::isnan(value)) return kFlaggedFill;
    const double v = std::clamp(value, -1.0, 1.0);
    return v < 0.0 ? mix(kNeutralStop, kNegativeStop, -v) : mix(kNeutralStop, kPositiveStop, v);
}

std::string render_heatmap(const CorrelationMatrix& lower, const CorrelationMatrix& upper,
                           const HeatmapOptions& options) {
    if (lower.question_ids() != upper.question_ids())
        throw DataError("heatmap: both matrices must cover the same questions in the same order");
    const std::size_t n = lower.size();
    const int cs = std::max(options.cell_size, 1);
    std::size_t longest = 1;
    for (const auto& id : lower.question_ids()) longest = std::max(longest, id.size());
    const int label = static_cast<int>(longest) * 7 + 8;
    const int top = 30 + label;
    const int left = label;
    const int grid = static_cast<int>(n) * cs;
    const int legend_w = 70;
    const int width = left + grid + 20 + legend_w;
    const int height = std::max(top + grid + 40, top + 220);

    std::string svg;
    svg += "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
    svg += "<!--\n";
    for (const auto& [k, v] : options.metadata) svg += comment_safe(fmt::format("  {}: {}\n", k, v));
    svg += "-->\n";
    svg += fmt::format("<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{}\" height=\"{}\" "
                       "viewBox=\"0 0 {} {}\" font-family=\"sans-serif\" font-size=\"9\">\n",
                       width, height, width, height);
    svg += fmt::format("<rect width=\"{}\" height=\"{}\" fill=\"#ffffff\"/>\n", width, height);
    if (!options.title.empty())
        svg += fmt::format("<text x=\"{}\" y=\"16\" font-size=\"12\">{}</text>\n", left,
                           xml_escape(options.title));
    svg += fmt::format("<text x=\"{}\" y=\"{}\" font-size=\"9\">below diagonal: {}; above diagonal: "
                       "{}</text>\n",
                       left, height - 12, xml_escape(options.lower_label),
                       xml_escape(options.upper_label));

    svg += "<g id=\"cells\" shape-rendering=\"crispEdges\">\n";
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            const CorrelationMatrix& src = j > i ? upper : lower;
            const bool flagged = src.flag(i, j) != EntryFlag::valid;
            const double v = src.at(i, j);
            const Rgb c = flagged ? kFlaggedFill : diverging_color(v);
            svg += fmt::format("<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"{}\">"
                               "<title>{} x {}: {}</title></rect>\n",
                               left + static_cast<int>(j) * cs, top + static_cast<int>(i) * cs, cs, cs,
                               c.hex(), xml_escape(lower.question_ids()[i]),
                               xml_escape(lower.question_ids()[j]),
                               flagged ? std::string(to_string(src.flag(i, j))) : fmt::format("{:.3f}", v));
        }
    svg += "</g>\n";

    svg += "<g id=\"labels\">\n";
    for (std::size_t i = 0; i < n; ++i) {
        const std::string id = xml_escape(lower.question_ids()[i]);
        const int pos = static_cast<int>(i) * cs + cs / 2;
        svg += fmt::format("<text x=\"{}\" y=\"{}\" text-anchor=\"end\" dominant-baseline=\"middle\">{}</text>\n",
                           left - 3, top + pos, id);
        svg += fmt::format("<text transform=\"translate({},{}) rotate(-90)\" dominant-baseline=\"middle\">{}</text>\n",
                           left + pos, top - 3, id);
    }
    svg += "</g>\n";

    const int lx = left + grid + 20;
    const int ly = top;
    const int lh = 160;
    svg += "<defs><linearGradient id=\"diverging\" x1=\"0\" y1=\"1\" x2=\"0\" y2=\"0\">\n";
    svg += fmt::format("<stop offset=\"0\" stop-color=\"{}\"/>\n", kNegativeStop.hex());
    svg += fmt::format("<stop offset=\"0.5\" stop-color=\"{}\"/>\n", kNeutralStop.hex());
    svg += fmt::format("<stop offset=\"1\" stop-color=\"{}\"/>\n", kPositiveStop.hex());
    svg += "</linearGradient></defs>\n";
    svg += "<g id=\"legend\">\n";
    svg += fmt::format("<rect x=\"{}\" y=\"{}\" width=\"14\" height=\"{}\" fill=\"url(#diverging)\" "
                       "stroke=\"#555555\" stroke-width=\"0.5\"/>\n",
                       lx, ly, lh);
    svg += fmt::format("<text x=\"{}\" y=\"{}\" dominant-baseline=\"middle\">+1</text>\n", lx + 18, ly);
    svg += fmt::format("<text x=\"{}\" y=\"{}\" dominant-baseline=\"middle\">0</text>\n", lx + 18, ly + lh / 2);
    svg += fmt::format("<text x=\"{}\" y=\"{}\" dominant-baseline=\"middle\">-1</text>\n", lx + 18, ly + lh);
    svg += fmt::format("<rect x=\"{}\" y=\"{}\" width=\"14\" height=\"10\" fill=\"{}\"/>\n", lx, ly + lh + 12,
                       kFlaggedFill.hex());
    svg += fmt::format("<text x=\"{}\" y=\"{}\" dominant-baseline=\"middle\">flagged</text>\n", lx + 18,
                       ly + lh + 17);
    svg += "</g>\n</svg>\n";
    return svg;
}

}  // namespace valign
