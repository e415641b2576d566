#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "valign/metrics.hpp"

namespace valign {

struct Rgb {
    std::uint8_t r = 0, g = 0, b = 0;
    std::string hex() const;
    friend bool operator==(const Rgb&, const Rgb&) = default;
};

/// Diverging scale: -1 -> #2166ac, 0 -> #f7f7f7, +1 -> #b2182b, linear in
/// RGB between stops, inputs clamped to [-1, 1].
Rgb diverging_color(double value);

inline constexpr Rgb kNegativeStop{0x21, 0x66, 0xac};
inline constexpr Rgb kNeutralStop{0xf7, 0xf7, 0xf7};
inline constexpr Rgb kPositiveStop{0xb2, 0x18, 0x2b};
inline constexpr Rgb kFlaggedFill{0xbd, 0xbd, 0xbd};

struct HeatmapOptions {
    std::string title;
    std::string lower_label = "lower triangle";
    std::string upper_label = "upper triangle";
    int cell_size = 12;
    /// Written into a comment block at the top of the document.
    std::vector<std::pair<std::string, std::string>> metadata;
};

/// One square heatmap: `lower` below the diagonal (and on it), `upper`
/// above. Flagged entries are drawn grey. Throws DataError unless both
/// matrices cover the same question ids in the same order.
std::string render_heatmap(const CorrelationMatrix& lower, const CorrelationMatrix& upper,
                           const HeatmapOptions& options = {});

}  // namespace valign
