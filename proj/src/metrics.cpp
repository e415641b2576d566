#include "valign/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <fmt/format.h>

#include "valign/error.hpp"
#include "valign/kernels.hpp"

namespace valign {

std::string_view to_string(MsdMode mode) {
    return mode == MsdMode::sample_vs_mean ? "sample_vs_mean" : "mean_vs_mean";
}
std::string_view to_string(Normalization norm) {
    return norm == Normalization::raw ? "raw" : "per_sqrt_n";
}
std::string_view to_string(KlDirection dir) {
    return dir == KlDirection::model_to_human ? "model_to_human" : "human_to_model";
}
std::string_view to_string(EntryFlag flag) {
    switch (flag) {
        case EntryFlag::valid: return "valid";
        case EntryFlag::insufficient_pairs: return "insufficient_pairs";
        case EntryFlag::zero_variance: return "zero_variance";
    }
    return "unknown";
}

MsdMode parse_msd_mode(std::string_view text) {
    if (text == "sample_vs_mean") return MsdMode::sample_vs_mean;
    if (text == "mean_vs_mean") return MsdMode::mean_vs_mean;
    throw UsageError(fmt::format("unknown MSD mode '{}'", text));
}
Normalization parse_normalization(std::string_view text) {
    if (text == "raw") return Normalization::raw;
    if (text == "per_sqrt_n") return Normalization::per_sqrt_n;
    throw UsageError(fmt::format("unknown normalization '{}'", text));
}
KlDirection parse_kl_direction(std::string_view text) {
    if (text == "model_to_human") return KlDirection::model_to_human;
    if (text == "human_to_model") return KlDirection::human_to_model;
    throw UsageError(fmt::format("unknown KL direction '{}'", text));
}

namespace {

// Column of `human` matching each column of `model`, checked for equal scales.
std::vector<std::size_t> align_columns(const ResponseMatrix& model, const ResponseMatrix& human) {
    std::vector<std::size_t> map;
    map.reserve(model.cols());
    for (std::size_t c = 0; c < model.cols(); ++c) {
        const auto& id = model.question_ids()[c];
        auto h = human.column_of(id);
        if (!h)
            throw DataError(fmt::format("question '{}' present in {} but not in {}", id,
                                        describe(model.source()), describe(human.source())));
        if (!(model.scales()[c] == human.scales()[*h]))
            throw DataError(fmt::format("question '{}' has different scales on the two sides", id));
        map.push_back(*h);
    }
    return map;
}

std::vector<double> unit_values(const ResponseMatrix& m, std::size_t col) {
    std::vector<double> out;
    out.reserve(m.rows());
    for (std::size_t r = 0; r < m.rows(); ++r)
        if (const Cell& c = m.at(r, col)) out.push_back(scale_to_unit(*c, m.scales()[col]));
    return out;
}

double mean_of(std::span<const double> v) {
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

}  // namespace

QuestionAverage msd_detail(const ResponseMatrix& model, const ResponseMatrix& human, MsdMode mode) {
    const auto map = align_columns(model, human);
    QuestionAverage out;
    double total = 0.0;
    for (std::size_t c = 0; c < model.cols(); ++c) {
        const auto m = unit_values(model, c);
        const auto h = unit_values(human, map[c]);
        if (m.empty() || h.empty()) {
            ++out.questions_excluded;
            continue;
        }
        const double mu_h = mean_of(h);
        double term = 0.0;
        if (mode == MsdMode::sample_vs_mean) {
            for (double s : m) term += (s - mu_h) * (s - mu_h);
            term /= static_cast<double>(m.size());
        } else {
            const double d = mean_of(m) - mu_h;
            term = d * d;
        }
        total += term;
        ++out.questions_used;
    }
    if (out.questions_used == 0)
        throw DataError("MSD: no question has valid answers on both sides");
    out.value = total / static_cast<double>(out.questions_used);
    return out;
}

double msd(const ResponseMatrix& model, const ResponseMatrix& human, MsdMode mode) {
    return msd_detail(model, human, mode).value;
}

CategoricalDistribution answer_distribution(const ResponseMatrix& matrix, std::size_t column,
                                            double alpha) {
    if (!(alpha >= 0.0) || !std::isfinite(alpha))
        throw DataError(fmt::format("smoothing alpha must be >= 0 (got {})", alpha));
    const Scale& scale = matrix.scales().at(column);
    CategoricalDistribution d{matrix.question_ids()[column], scale,
                              std::vector<double>(static_cast<std::size_t>(scale.size()), 0.0)};
    std::size_t n = 0;
    for (std::size_t r = 0; r < matrix.rows(); ++r)
        if (const Cell& c = matrix.at(r, column)) {
            d.probabilities[static_cast<std::size_t>(*c - scale.min)] += 1.0;
            ++n;
        }
    if (n == 0)
        throw DataError(fmt::format("question '{}' has no valid answers in {}", d.question_id,
                                    describe(matrix.source())));
    const double denom = static_cast<double>(n) + alpha * static_cast<double>(scale.size());
    for (double& p : d.probabilities) p = (p + alpha) / denom;
    return d;
}

double kl_divergence(std::span<const double> p, std::span<const double> q) {
    if (p.size() != q.size()) throw DataError("KL divergence: distributions differ in support size");
    double s = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        if (p[i] <= 0.0) continue;
        if (q[i] <= 0.0)
            throw DataError("KL divergence is infinite: a category has zero reference "
                            "probability; set the smoothing alpha > 0");
        s += p[i] * std::log(p[i] / q[i]);
    }
    return std::max(s, 0.0);
}

QuestionAverage kld_detail(const ResponseMatrix& model, const ResponseMatrix& human, double alpha,
                           KlDirection direction) {
    const auto map = align_columns(model, human);
    QuestionAverage out;
    double total = 0.0;
    for (std::size_t c = 0; c < model.cols(); ++c) {
        const auto has_valid = [](const ResponseMatrix& m, std::size_t col) {
            for (std::size_t r = 0; r < m.rows(); ++r)
                if (m.at(r, col)) return true;
            return false;
        };
        if (!has_valid(model, c) || !has_valid(human, map[c])) {
            ++out.questions_excluded;
            continue;
        }
        const auto pm = answer_distribution(model, c, alpha);
        const auto ph = answer_distribution(human, map[c], alpha);
        try {
            total += direction == KlDirection::model_to_human
                         ? kl_divergence(pm.probabilities, ph.probabilities)
                         : kl_divergence(ph.probabilities, pm.probabilities);
        } catch (const DataError& e) {
            throw DataError(fmt::format("question '{}': {}", pm.question_id, e.what()));
        }
        ++out.questions_used;
    }
    if (out.questions_used == 0)
        throw DataError("KLD: no question has valid answers on both sides");
    out.value = total / static_cast<double>(out.questions_used);
    return out;
}

double kld(const ResponseMatrix& model, const ResponseMatrix& human, double alpha,
           KlDirection direction) {
    return kld_detail(model, human, alpha, direction).value;
}

std::size_t CorrelationMatrix::flagged_count() const {
    std::size_t n = 0;
    for (std::size_t i = 0; i < size(); ++i)
        for (std::size_t j = i; j < size(); ++j)
            if (flag(i, j) != EntryFlag::valid) ++n;
    return n;
}

CorrelationMatrix CorrelationMatrix::from_entries(std::vector<std::string> question_ids,
                                                  std::vector<double> entries) {
    const std::size_t n = question_ids.size();
    if (entries.size() != n * n)
        throw DataError(fmt::format("correlation matrix: {} entries for {} questions", entries.size(), n));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            const double v = entries[i * n + j];
            if (!(v >= -1.0 && v <= 1.0))
                throw DataError(fmt::format("correlation matrix entry ({},{}) = {} outside [-1,1]", i, j, v));
            if (v != entries[j * n + i])
                throw DataError(fmt::format("correlation matrix not symmetric at ({},{})", i, j));
        }
    CorrelationMatrix c;
    c.ids_ = std::move(question_ids);
    c.entries_ = std::move(entries);
    c.flags_.assign(n * n, EntryFlag::valid);
    c.pairs_.assign(n * n, 0);
    return c;
}

CorrelationMatrix CorrelationMatrix::from_parts(std::vector<std::string> question_ids,
                                                std::vector<double> entries,
                                                std::vector<EntryFlag> flags,
                                                std::vector<std::size_t> pairs) {
    const std::size_t n = question_ids.size();
    if (flags.size() != n * n || pairs.size() != n * n)
        throw DataError("correlation matrix: flag or pair-count table has the wrong size");
    CorrelationMatrix c = from_entries(std::move(question_ids), std::move(entries));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            if (flags[i * n + j] != flags[j * n + i] || pairs[i * n + j] != pairs[j * n + i])
                throw DataError(fmt::format("correlation matrix flags not symmetric at ({},{})", i, j));
            if (flags[i * n + j] != EntryFlag::valid && c.entries_[i * n + j] != 0.0)
                throw DataError(fmt::format("correlation matrix: flagged entry ({},{}) is not 0", i, j));
        }
    c.flags_ = std::move(flags);
    c.pairs_ = std::move(pairs);
    return c;
}

CorrelationMatrix correlation_matrix(const ResponseMatrix& matrix, std::size_t min_pairs) {
    const std::size_t q = matrix.cols();
    const std::size_t rows = matrix.rows();
    // Column-major values with zeros at missing cells, plus 0/1 masks.
    std::vector<double> values(q * rows, 0.0), masks(q * rows, 0.0);
    for (std::size_t c = 0; c < q; ++c)
        for (std::size_t r = 0; r < rows; ++r)
            if (const Cell& cell = matrix.at(r, c)) {
                values[c * rows + r] = static_cast<double>(*cell);
                masks[c * rows + r] = 1.0;
            }
    auto col = [&](const std::vector<double>& v, std::size_t c) {
        return std::span<const double>(v.data() + c * rows, rows);
    };

    CorrelationMatrix out;
    out.ids_ = matrix.question_ids();
    out.entries_.assign(q * q, 0.0);
    out.flags_.assign(q * q, EntryFlag::valid);
    out.pairs_.assign(q * q, 0);
    const std::size_t needed = std::max<std::size_t>(min_pairs, 2);
    const auto& kt = kernels::active();
    for (std::size_t i = 0; i < q; ++i) {
        for (std::size_t j = i; j < q; ++j) {
            const auto m = kt.masked_moments(col(values, i), col(masks, i), col(values, j), col(masks, j));
            const auto n_pairs = static_cast<std::size_t>(std::llround(m.n));
            double r = 0.0;
            EntryFlag flag = EntryFlag::valid;
            const double vx = m.n * m.sxx - m.sx * m.sx;
            const double vy = m.n * m.syy - m.sy * m.sy;
            if (n_pairs < needed) {
                flag = EntryFlag::insufficient_pairs;
            } else if (!(vx > 0.0) || !(vy > 0.0)) {
                flag = EntryFlag::zero_variance;
            } else if (i == j) {
                r = 1.0;
            } else {
                r = std::clamp((m.n * m.sxy - m.sx * m.sy) / std::sqrt(vx * vy), -1.0, 1.0);
            }
            for (auto [a, b] : {std::pair{i, j}, std::pair{j, i}}) {
                out.entries_[a * q + b] = r;
                out.flags_[a * q + b] = flag;
                out.pairs_[a * q + b] = n_pairs;
            }
        }
    }
    return out;
}

double corr_norm(const CorrelationMatrix& c, Normalization norm) {
    const double fro = std::sqrt(kernels::sum_squares(c.entries()));
    if (norm == Normalization::raw || c.size() == 0) return fro;
    return fro / std::sqrt(static_cast<double>(c.size()));
}

DistanceDetail corr_distance_detail(const CorrelationMatrix& a, const CorrelationMatrix& b,
                                    Normalization norm) {
    std::vector<std::size_t> ia, ib;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (a.flag(i, i) != EntryFlag::valid) continue;
        for (std::size_t j = 0; j < b.size(); ++j)
            if (b.question_ids()[j] == a.question_ids()[i]) {
                if (b.flag(j, j) == EntryFlag::valid) {
                    ia.push_back(i);
                    ib.push_back(j);
                }
                break;
            }
    }
    const std::size_t n = ia.size();
    if (n == 0)
        throw DataError("correlation distance: the matrices share no question with valid entries");

    std::vector<double> va(n * n), vb(n * n), mask(n * n);
    DistanceDetail out;
    out.questions = n;
    for (std::size_t r = 0; r < n; ++r)
        for (std::size_t c = 0; c < n; ++c) {
            const bool ok = a.flag(ia[r], ia[c]) == EntryFlag::valid &&
                            b.flag(ib[r], ib[c]) == EntryFlag::valid;
            va[r * n + c] = a.at(ia[r], ia[c]);
            vb[r * n + c] = b.at(ib[r], ib[c]);
            mask[r * n + c] = ok ? 1.0 : 0.0;
            if (!ok && r < c) ++out.masked_pairs;
        }
    const double fro = std::sqrt(kernels::masked_squared_distance(va, vb, mask));
    out.value = norm == Normalization::raw ? fro : fro / std::sqrt(static_cast<double>(n));
    return out;
}

double corr_distance(const CorrelationMatrix& a, const CorrelationMatrix& b, Normalization norm) {
    return corr_distance_detail(a, b, norm).value;
}

double pearson(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size())
        throw DataError(fmt::format("pearson: lengths differ ({} vs {})", x.size(), y.size()));
    if (x.size() < 2) throw DataError("pearson: need at least two points");
    const double mx = mean_of(x);
    const double my = mean_of(y);
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double dx = x[i] - mx;
        const double dy = y[i] - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if (!(sxx > 0.0) || !(syy > 0.0))
        throw DataError("pearson: correlation undefined for a zero-variance input");
    return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

std::vector<double> average_ranks(std::span<const double> x) {
    std::vector<std::size_t> order(x.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
    std::vector<double> ranks(x.size());
    for (std::size_t i = 0; i < order.size();) {
        std::size_t j = i;
        while (j + 1 < order.size() && x[order[j + 1]] == x[order[i]]) ++j;
        const double rank = (static_cast<double>(i + 1) + static_cast<double>(j + 1)) / 2.0;
        for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = rank;
        i = j + 1;
    }
    return ranks;
}

double spearman(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size())
        throw DataError(fmt::format("spearman: lengths differ ({} vs {})", x.size(), y.size()));
    const auto rx = average_ranks(x);
    const auto ry = average_ranks(y);
    return pearson(rx, ry);
}

double point_biserial(std::span<const int> indicator, std::span<const double> values) {
    if (indicator.size() != values.size())
        throw DataError("point-biserial: indicator and values differ in length");
    bool has0 = false, has1 = false;
    std::vector<double> coded;
    coded.reserve(indicator.size());
    for (int v : indicator) {
        if (v != 0 && v != 1) throw DataError(fmt::format("point-biserial: indicator value {} is not 0/1", v));
        (v ? has1 : has0) = true;
        coded.push_back(static_cast<double>(v));
    }
    if (!has0 || !has1) throw DataError("point-biserial: indicator holds a single class");
    return pearson(coded, values);
}

AlignmentReport compute_alignment(const ResponseMatrix& model, const ResponseMatrix& human,
                                  const AlignmentOptions& options, const ReportDescriptor& descriptor) {
    AlignmentReport rep;
    rep.config = descriptor;
    const auto m1 = msd_detail(model, human, MsdMode::sample_vs_mean);
    rep.msd = m1.value;
    rep.msd_mean = msd_detail(model, human, MsdMode::mean_vs_mean).value;
    rep.kld = kld_detail(model, human, options.alpha, options.kl_direction).value;
    rep.questions_used = m1.questions_used;
    rep.sessions = model.rows();
    rep.human_respondents = human.rows();

    const auto human_corr = human.rows() >= 2
                                ? std::optional(correlation_matrix(human, options.min_pairs))
                                : std::nullopt;
    const auto model_corr = model.rows() >= 2
                                ? std::optional(correlation_matrix(model, options.min_pairs))
                                : std::nullopt;
    if (human_corr) {
        rep.corr_norm_human = corr_norm(*human_corr, options.normalization);
        rep.corr_flagged_human = human_corr->flagged_count();
    }
    if (model_corr) {
        rep.corr_norm_model = corr_norm(*model_corr, options.normalization);
        rep.corr_flagged_model = model_corr->flagged_count();
    }
    if (human_corr && model_corr) {
        try {
            const auto d = corr_distance_detail(*model_corr, *human_corr, options.normalization);
            rep.corr_distance = d.value;
            rep.corr_masked_pairs = d.masked_pairs;
        } catch (const DataError&) {
            rep.corr_distance.reset();  // no question valid on both sides
        }
    }
    return rep;
}

}  // namespace valign
