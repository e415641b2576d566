#include "valign/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include <fmt/format.h>

#include "valign/error.hpp"

namespace valign {

namespace {
constexpr double nan = std::numeric_limits<double>::quiet_NaN();
}

std::string_view to_string(MetricKind kind) {
    switch (kind) {
        case MetricKind::msd: return "msd";
        case MetricKind::msd_mean: return "msd_mean";
        case MetricKind::kld: return "kld";
        case MetricKind::corr_distance: return "corr_distance";
    }
    return "unknown";
}

MetricKind parse_metric_kind(std::string_view text) {
    for (MetricKind k : {MetricKind::msd, MetricKind::msd_mean, MetricKind::kld, MetricKind::corr_distance})
        if (to_string(k) == text) return k;
    throw UsageError(fmt::format("unknown metric '{}' (msd, msd_mean, kld, corr_distance)", text));
}

std::string_view to_string(CurveMode mode) { return mode == CurveMode::prefix ? "prefix" : "bootstrap"; }

CurveMode parse_curve_mode(std::string_view text) {
    if (text == "prefix") return CurveMode::prefix;
    if (text == "bootstrap") return CurveMode::bootstrap;
    throw UsageError(fmt::format("unknown curve mode '{}'", text));
}

double evaluate_metric(const MetricSelector& selector, const ResponseMatrix& model,
                       const ResponseMatrix& human, const CorrelationMatrix* human_corr) {
    const auto& o = selector.options;
    switch (selector.kind) {
        case MetricKind::msd: return msd(model, human, MsdMode::sample_vs_mean);
        case MetricKind::msd_mean: return msd(model, human, MsdMode::mean_vs_mean);
        case MetricKind::kld: return kld(model, human, o.alpha, o.kl_direction);
        case MetricKind::corr_distance: {
            if (model.rows() < 2 || human.rows() < 2) return nan;
            std::optional<CorrelationMatrix> own;
            if (!human_corr) human_corr = &own.emplace(correlation_matrix(human, o.min_pairs));
            try {
                return corr_distance(correlation_matrix(model, o.min_pairs), *human_corr, o.normalization);
            } catch (const DataError&) {
                return nan;
            }
        }
    }
    return nan;
}

std::vector<std::size_t> default_grid(std::size_t pool_size) {
    std::vector<std::size_t> grid;
    for (std::size_t k : {1, 2, 5, 10, 20, 50, 100, 200, 500})
        if (k < pool_size) grid.push_back(k);
    grid.push_back(pool_size);
    return grid;
}

ConvergenceCurve convergence_curve(const ResponseMatrix& pool, const ResponseMatrix& human,
                                   const MetricSelector& selector, std::vector<std::size_t> grid,
                                   const CurveOptions& options) {
    const std::size_t n = pool.rows();
    if (grid.empty()) grid = default_grid(n);
    for (std::size_t i = 0; i < grid.size(); ++i) {
        if (grid[i] == 0) throw DataError("convergence grid points must be positive");
        if (i && grid[i] <= grid[i - 1]) throw DataError("convergence grid must be strictly increasing");
        if (grid[i] > n)
            throw DataError(fmt::format("convergence grid point {} exceeds the pool of {} sessions",
                                        grid[i], n));
    }
    if (grid.back() != n) grid.push_back(n);

    std::optional<CorrelationMatrix> human_corr;
    if (selector.kind == MetricKind::corr_distance && human.rows() >= 2)
        human_corr = correlation_matrix(human, selector.options.min_pairs);
    const CorrelationMatrix* hc = human_corr ? &*human_corr : nullptr;

    ConvergenceCurve curve;
    curve.metric = std::string(to_string(selector.kind));
    curve.mode = options.mode;
    curve.grid = grid;
    curve.final = evaluate_metric(selector, pool, human, hc);

    if (options.mode == CurveMode::prefix) {
        for (std::size_t k : grid)
            curve.estimates.push_back(k == n ? curve.final
                                             : evaluate_metric(selector, pool.prefix(k), human, hc));
        return curve;
    }

    if (options.bootstrap_samples < 2) throw DataError("bootstrap needs at least two resamples");
    std::mt19937_64 rng(options.seed);
    std::vector<std::size_t> idx;
    for (std::size_t k : grid) {
        std::vector<double> vals;
        vals.reserve(options.bootstrap_samples);
        for (std::size_t b = 0; b < options.bootstrap_samples; ++b) {
            idx.resize(k);
            for (auto& i : idx)
                i = static_cast<std::size_t>(static_cast<double>(rng() >> 11) * 0x1.0p-53 *
                                             static_cast<double>(n));
            vals.push_back(evaluate_metric(selector, pool.select_rows(idx), human, hc));
        }
        double mean = 0.0;
        for (double v : vals) mean += v;
        mean /= static_cast<double>(vals.size());
        double ss = 0.0;
        for (double v : vals) ss += (v - mean) * (v - mean);
        curve.estimates.push_back(mean);
        curve.sd.push_back(std::sqrt(ss / static_cast<double>(vals.size() - 1)));
    }
    return curve;
}

std::optional<std::size_t> stability_point(const ConvergenceCurve& curve, double epsilon) {
    if (curve.estimates.empty()) return std::nullopt;
    std::size_t first = curve.estimates.size();
    for (std::size_t i = curve.estimates.size(); i-- > 0;) {
        const double e = curve.estimates[i];
        if (!(std::abs(e - curve.final) <= epsilon)) break;
        first = i;
    }
    if (first + 1 >= curve.estimates.size()) return std::nullopt;
    return curve.grid[first];
}

namespace {

std::vector<double> metric_column(const std::vector<AlignmentReport>& reports, const std::string& name) {
    std::vector<double> col;
    col.reserve(reports.size());
    for (std::size_t i = 0; i < reports.size(); ++i) {
        const auto& r = reports[i];
        if (name == "msd") col.push_back(r.msd);
        else if (name == "msd_mean") col.push_back(r.msd_mean);
        else if (name == "kld") col.push_back(r.kld);
        else {
            if (!r.corr_distance)
                throw DataError(fmt::format("report {} has no corr_distance", i));
            col.push_back(*r.corr_distance);
        }
    }
    return col;
}

}  // namespace

MetricCorrelationTable metric_correlation_table(const std::vector<AlignmentReport>& reports) {
    if (reports.size() < 3)
        throw DataError(fmt::format("metric correlation needs at least 3 reports (got {})", reports.size()));
    MetricCorrelationTable t;
    t.metrics = {"msd", "kld", "corr_distance"};
    std::vector<std::vector<double>> cols;
    for (const auto& m : t.metrics) {
        cols.push_back(metric_column(reports, m));
        const auto& c = cols.back();
        if (std::all_of(c.begin(), c.end(), [&](double v) { return v == c.front(); }))
            throw DataError(fmt::format("metric '{}' is constant across reports", m));
    }
    const std::size_t k = t.metrics.size();
    t.values.assign(k, std::vector<double>(k, nan));
    for (std::size_t i = 0; i < k; ++i)
        for (std::size_t j = i + 1; j < k; ++j) {
            t.values[i][j] = pearson(cols[i], cols[j]);
            t.values[j][i] = spearman(cols[i], cols[j]);
        }
    return t;
}

std::vector<std::pair<std::string, double>> matching_correlation(
    const std::vector<AlignmentReport>& reports, const std::vector<int>& match) {
    if (match.size() != reports.size())
        throw DataError("matching correlation: one indicator per report is required");
    bool has0 = false, has1 = false;
    for (int v : match) {
        if (v != 0 && v != 1) throw DataError(fmt::format("match indicator value {} is not 0/1", v));
        (v ? has1 : has0) = true;
    }
    if (!has0 || !has1) throw DataError("matching correlation: indicator holds a single class");
    std::vector<std::pair<std::string, double>> out;
    for (const char* m : {"msd", "kld", "corr_distance"}) {
        const auto col = metric_column(reports, m);
        const bool constant =
            std::all_of(col.begin(), col.end(), [&](double v) { return v == col.front(); });
        if (constant) {
            // A metric that does not vary cannot separate the classes.
            out.emplace_back(m, 0.0);
            continue;
        }
        out.emplace_back(m, point_biserial(match, col));
    }
    return out;
}

CountryTable country_baseline_matrix(const CountryPopulations& populations,
                                     const MetricSelector& selector) {
    if (populations.size() < 2)
        throw DataError("country comparison needs at least two countries");
    // Human-vs-human comparisons contrast population averages, so MSD is
    // always taken mean against mean here.
    MetricSelector sel = selector;
    if (sel.kind == MetricKind::msd) sel.kind = MetricKind::msd_mean;
    CountryTable t;
    t.metric = std::string(to_string(sel.kind));
    if (sel.kind == MetricKind::kld)
        t.direction = sel.options.kl_direction == KlDirection::model_to_human ? "KL(row || column)"
                                                                               : "KL(column || row)";
    else
        t.direction = "symmetric";
    std::vector<std::optional<CorrelationMatrix>> corr(populations.size());
    for (std::size_t i = 0; i < populations.size(); ++i) {
        t.countries.push_back(populations[i].first);
        if (selector.kind == MetricKind::corr_distance && populations[i].second.rows() >= 2)
            corr[i] = correlation_matrix(populations[i].second, selector.options.min_pairs);
    }
    const std::size_t n = populations.size();
    t.values.assign(n, std::vector<double>(n, 0.0));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            if (selector.kind == MetricKind::corr_distance) {
                if (j < i) {
                    t.values[i][j] = t.values[j][i];
                    continue;
                }
                t.values[i][j] = (corr[i] && corr[j])
                                     ? corr_distance(*corr[i], *corr[j], selector.options.normalization)
                                     : nan;
            } else {
                t.values[i][j] = evaluate_metric(sel, populations[i].second, populations[j].second);
            }
        }
    return t;
}

std::vector<std::pair<std::string, double>> country_corr_norms(const CountryPopulations& populations,
                                                               const AlignmentOptions& options) {
    std::vector<std::pair<std::string, double>> out;
    for (const auto& [country, m] : populations)
        out.emplace_back(country, m.rows() >= 2
                                      ? corr_norm(correlation_matrix(m, options.min_pairs), options.normalization)
                                      : nan);
    return out;
}

}  // namespace valign
