#include "valign/report.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <unordered_map>

#include <fmt/format.h>

#include "valign/csv.hpp"
#include "valign/digest.hpp"
#include "valign/error.hpp"

namespace valign {

using nlohmann::json;

Metadata base_metadata(const std::string& kind, const AlignmentOptions& options) {
    return {{"tool", "valign"},
            {"version", VALIGN_VERSION},
            {"output", kind},
            {"smoothing_alpha", format_number(options.alpha)},
            {"normalization", std::string(to_string(options.normalization))},
            {"min_pairs", std::to_string(options.min_pairs)},
            {"kl_direction", std::string(to_string(options.kl_direction))},
            {"weights", "unweighted"}};
}

std::string format_number(double value) {
    if (std::isnan(value)) return "NA";
    return fmt::format("{}", value);
}

std::string format_optional(const std::optional<double>& value) {
    return value ? format_number(*value) : "NA";
}

void write_metadata(std::ostream& out, const Metadata& metadata) {
    for (const auto& [k, v] : metadata) {
        std::string value = v;
        for (char& c : value)
            if (c == '\n' || c == '\r') c = ' ';
        out << "# " << k << ": " << value << '\n';
    }
}

namespace {

const std::vector<std::string>& report_columns() {
    static const std::vector<std::string> cols = {
        "model", "language", "style", "decoding", "country",
        "msd", "msd_mean", "kld", "corr_norm_model", "corr_norm_human", "corr_distance",
        "sessions", "excluded_sessions", "human_respondents", "questions_used",
        "extraction_failures", "refusals", "out_of_range", "no_integer", "ambiguous",
        "corr_flagged_model", "corr_flagged_human", "corr_masked_pairs"};
    return cols;
}

std::optional<double> parse_optional(const std::string& s) {
    if (s == "NA" || s.empty()) return std::nullopt;
    try {
        return std::stod(s);
    } catch (const std::exception&) {
        throw DataError(fmt::format("report csv: '{}' is not a number", s));
    }
}

std::size_t parse_count(const std::string& s) {
    try {
        return static_cast<std::size_t>(std::stoull(s));
    } catch (const std::exception&) {
        throw DataError(fmt::format("report csv: '{}' is not a count", s));
    }
}

}  // namespace

void write_report_csv(std::ostream& out, const std::vector<AlignmentReport>& reports,
                      const Metadata& metadata) {
    write_metadata(out, metadata);
    csv::write_record(out, report_columns());
    for (const auto& r : reports) {
        csv::write_record(out, {r.config.model, r.config.language, r.config.style, r.config.decoding,
                                r.config.country, format_number(r.msd), format_number(r.msd_mean),
                                format_number(r.kld), format_optional(r.corr_norm_model),
                                format_optional(r.corr_norm_human), format_optional(r.corr_distance),
                                std::to_string(r.sessions), std::to_string(r.excluded_sessions),
                                std::to_string(r.human_respondents), std::to_string(r.questions_used),
                                std::to_string(r.extraction_failures), std::to_string(r.refusals),
                                std::to_string(r.out_of_range), std::to_string(r.no_integer),
                                std::to_string(r.ambiguous), std::to_string(r.corr_flagged_model),
                                std::to_string(r.corr_flagged_human), std::to_string(r.corr_masked_pairs)});
    }
}

std::vector<AlignmentReport> read_report_csv(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError(fmt::format("cannot open report '{}'", path.string()));
    csv::Reader reader(in, true);
    auto header = reader.next();
    if (!header) throw DataError(fmt::format("report '{}' is empty", path.string()));
    std::unordered_map<std::string, std::size_t> idx;
    for (std::size_t i = 0; i < header->size(); ++i) idx[(*header)[i]] = i;
    for (const auto& c : report_columns())
        if (!idx.contains(c))
            throw DataError(fmt::format("report '{}' lacks column '{}'", path.string(), c));
    std::vector<AlignmentReport> out;
    while (auto rec = reader.next()) {
        if (rec->size() != header->size()) continue;
        auto get = [&](const char* name) -> const std::string& { return (*rec)[idx.at(name)]; };
        AlignmentReport r;
        r.config = {get("model"), get("language"), get("style"), get("decoding"), get("country")};
        r.msd = parse_optional(get("msd")).value_or(NAN);
        r.msd_mean = parse_optional(get("msd_mean")).value_or(NAN);
        r.kld = parse_optional(get("kld")).value_or(NAN);
        r.corr_norm_model = parse_optional(get("corr_norm_model"));
        r.corr_norm_human = parse_optional(get("corr_norm_human"));
        r.corr_distance = parse_optional(get("corr_distance"));
        r.sessions = parse_count(get("sessions"));
        r.excluded_sessions = parse_count(get("excluded_sessions"));
        r.human_respondents = parse_count(get("human_respondents"));
        r.questions_used = parse_count(get("questions_used"));
        r.extraction_failures = parse_count(get("extraction_failures"));
        r.refusals = parse_count(get("refusals"));
        r.out_of_range = parse_count(get("out_of_range"));
        r.no_integer = parse_count(get("no_integer"));
        r.ambiguous = parse_count(get("ambiguous"));
        r.corr_flagged_model = parse_count(get("corr_flagged_model"));
        r.corr_flagged_human = parse_count(get("corr_flagged_human"));
        r.corr_masked_pairs = parse_count(get("corr_masked_pairs"));
        out.push_back(std::move(r));
    }
    return out;
}

void write_curve_csv(std::ostream& out, const ConvergenceCurve& curve, const Metadata& metadata) {
    write_metadata(out, metadata);
    out << "# metric: " << curve.metric << "\n# mode: " << to_string(curve.mode)
        << "\n# final: " << format_number(curve.final) << '\n';
    const bool boot = !curve.sd.empty();
    csv::write_record(out, boot ? csv::Record{"k", "estimate", "sd", "abs_diff_to_final"}
                                : csv::Record{"k", "estimate", "abs_diff_to_final"});
    for (std::size_t i = 0; i < curve.grid.size(); ++i) {
        csv::Record rec{std::to_string(curve.grid[i]), format_number(curve.estimates[i])};
        if (boot) rec.push_back(format_number(curve.sd[i]));
        rec.push_back(format_number(std::abs(curve.estimates[i] - curve.final)));
        csv::write_record(out, rec);
    }
}

void write_stability_csv(std::ostream& out,
                         const std::vector<std::pair<const ConvergenceCurve*, std::optional<std::size_t>>>& rows,
                         double epsilon, const Metadata& metadata) {
    write_metadata(out, metadata);
    out << "# epsilon: " << format_number(epsilon) << '\n';
    csv::write_record(out, {"metric", "stability_k", "pool_size", "final"});
    for (const auto& [curve, k] : rows)
        csv::write_record(out, {curve->metric, k ? std::to_string(*k) : std::string("not_stabilized"),
                                std::to_string(curve->grid.back()), format_number(curve->final)});
}

void write_country_table_csv(std::ostream& out, const CountryTable& table, const Metadata& metadata) {
    write_metadata(out, metadata);
    out << "# metric: " << table.metric << "\n# direction: " << table.direction << '\n';
    csv::Record header{"country"};
    header.insert(header.end(), table.countries.begin(), table.countries.end());
    csv::write_record(out, header);
    for (std::size_t i = 0; i < table.countries.size(); ++i) {
        csv::Record rec{table.countries[i]};
        for (double v : table.values[i]) rec.push_back(format_number(v));
        csv::write_record(out, rec);
    }
}

void write_metric_correlation_csv(std::ostream& out, const MetricCorrelationTable& table,
                                  const Metadata& metadata) {
    write_metadata(out, metadata);
    out << "# layout: pearson above the diagonal, spearman below\n";
    csv::Record header{"metric"};
    header.insert(header.end(), table.metrics.begin(), table.metrics.end());
    csv::write_record(out, header);
    for (std::size_t i = 0; i < table.metrics.size(); ++i) {
        csv::Record rec{table.metrics[i]};
        for (std::size_t j = 0; j < table.metrics.size(); ++j)
            rec.push_back(i == j ? std::string() : format_number(table.values[i][j]));
        csv::write_record(out, rec);
    }
}

void write_text_file(const std::filesystem::path& path, const std::string& content) {
    if (path.has_parent_path()) {
        std::error_code ec;
        std::filesystem::create_directories(path.parent_path(), ec);
        if (ec) throw DataError(fmt::format("cannot create '{}': {}", path.parent_path().string(), ec.message()));
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError(fmt::format("cannot write '{}'", path.string()));
    out << content;
    if (!out) throw DataError(fmt::format("write to '{}' failed", path.string()));
}

Manifest::Manifest(std::string command, json config) {
    doc_ = {{"tool", "valign"},
            {"version", VALIGN_VERSION},
            {"command", std::move(command)},
            {"config", std::move(config)},
            {"inputs", json::array()},
            {"outputs", json::array()}};
}

void Manifest::add_input(const std::filesystem::path& path) {
    doc_["inputs"].push_back({{"path", path.string()}, {"sha256", sha256_file(path)}});
}

void Manifest::add_output(const std::filesystem::path& path, const std::filesystem::path& relative_to) {
    doc_["outputs"].push_back({{"path", std::filesystem::relative(path, relative_to).generic_string()},
                               {"sha256", sha256_file(path)},
                               {"bytes", std::filesystem::file_size(path)}});
}

std::filesystem::path Manifest::write(const std::filesystem::path& dir) const {
    const auto path = dir / "manifest.json";
    write_text_file(path, doc_.dump(2) + "\n");
    return path;
}

}  // namespace valign
