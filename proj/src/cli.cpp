#include "valign/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>

#include <fmt/format.h>

#include "valign/analysis.hpp"
#include "valign/csv.hpp"
#include "valign/error.hpp"
#include "valign/heatmap.hpp"
#include "valign/ingest.hpp"
#include "valign/log.hpp"
#include "valign/report.hpp"
#include "valign/runner.hpp"
#include "valign/synth.hpp"

namespace valign::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Options shared by every command that loads human data and computes metrics.
struct MetricFlags {
    double alpha = 0.5;
    std::string normalization = "per_sqrt_n";
    std::size_t min_pairs = 10;
    std::string kl_direction = "model_to_human";
    std::vector<long long> missing_codes;
    bool keep_negative = false;
    std::string out_of_range = "treat_as_missing";

    void add_to(CLI::App& app) {
        app.add_option("--alpha", alpha, "Additive smoothing per category for KL")
            ->capture_default_str();
        app.add_option("--normalization", normalization, "Frobenius normalization: raw or per_sqrt_n")
            ->check(CLI::IsMember({"raw", "per_sqrt_n"}))
            ->capture_default_str();
        app.add_option("--min-pairs", min_pairs, "Minimum complete pairs per correlation entry")
            ->capture_default_str();
        app.add_option("--kl-direction", kl_direction, "model_to_human or human_to_model")
            ->check(CLI::IsMember({"model_to_human", "human_to_model"}))
            ->capture_default_str();
        app.add_option("--missing-codes", missing_codes, "Extra integer codes treated as missing");
        app.add_flag("--keep-negative", keep_negative,
                     "Do not treat every negative value as missing");
        app.add_option("--out-of-range", out_of_range,
                       "treat_as_missing, reject_row or fail for off-scale values")
            ->check(CLI::IsMember({"treat_as_missing", "reject_row", "fail"}))
            ->capture_default_str();
    }

    AlignmentOptions options() const {
        AlignmentOptions o;
        if (!(alpha >= 0.0)) throw UsageError("--alpha must be >= 0");
        o.alpha = alpha;
        o.normalization = parse_normalization(normalization);
        o.min_pairs = min_pairs;
        o.kl_direction = parse_kl_direction(kl_direction);
        return o;
    }

    MissingCodePolicy policy() const {
        MissingCodePolicy p;
        p.codes.insert(missing_codes.begin(), missing_codes.end());
        p.all_negative = !keep_negative;
        p.out_of_range_action = parse_out_of_range_action(out_of_range);
        return p;
    }
};

// Resolved flag values of a subcommand, for manifests.
json resolved_flags(const CLI::App& app) {
    json j = json::object();
    for (const CLI::Option* opt : app.get_options()) {
        const std::string name = opt->get_name();
        if (name == "--help" || name.empty()) continue;
        if (opt->count() > 0) {
            const auto& res = opt->results();
            j[name] = opt->get_expected_max() > 1 ? json(res) : json(res.empty() ? "" : res.back());
        } else if (!opt->get_default_str().empty()) {
            j[name] = opt->get_default_str();
        } else {
            j[name] = nullptr;
        }
    }
    return j;
}

void finish(Manifest& manifest, const fs::path& dir, const std::vector<fs::path>& outputs,
            std::ostream& out) {
    for (const auto& p : outputs) manifest.add_output(p, dir);
    const auto path = manifest.write(dir);
    out << "wrote " << path.string() << '\n';
}

// ---------------------------------------------------------------- run

struct RunFlags {
    std::string survey, lang, style, decoding, endpoint, mock, model, out, system_prompt;
    std::string api_key_env = "VALIGN_API_KEY";
    std::string refusal_patterns;
    std::optional<double> top_p, temperature;
    std::size_t sessions = 1;
    std::size_t concurrency = 1;
    std::optional<std::uint64_t> seed;
    std::size_t max_attempts = 4;
    long backoff_ms = 1000;
    long timeout_s = 120;
};

RefusalPatterns refusal_patterns(const std::string& path) {
    return path.empty() ? RefusalPatterns::defaults() : RefusalPatterns::load(path);
}

int cmd_run(const RunFlags& f, const CLI::App& app, std::ostream& out) {
    DecodingConfig decoding = DecodingConfig::greedy();
    if (f.decoding == "greedy") {
        if (f.top_p || f.temperature)
            throw UsageError("greedy decoding takes no --top-p/--temperature");
    } else {
        if (!f.top_p || !f.temperature)
            throw UsageError("nucleus decoding needs both --top-p and --temperature");
        decoding = DecodingConfig::nucleus(*f.top_p, *f.temperature);
    }
    if (f.endpoint.empty() == f.mock.empty())
        throw UsageError("exactly one of --endpoint or --mock is required");
    if (f.seed && f.mock.empty()) throw UsageError("--seed only applies to the mock backend");

    auto survey = std::make_shared<const Survey>(load_survey(f.survey));
    RunConfig config;
    config.survey = survey;
    config.language = f.lang;
    config.style = parse_prompt_style(f.style);
    config.decoding = decoding;
    config.n_sessions = f.sessions;
    config.max_concurrent_sessions = f.concurrency;
    config.model = f.model;
    config.seed = f.seed;
    if (!f.system_prompt.empty()) config.system_prompt = f.system_prompt;
    config.retry.max_attempts = f.max_attempts;
    config.retry.initial_backoff = std::chrono::milliseconds(f.backoff_ms);
    config.backend = f.mock.empty() ? f.endpoint : "mock";
    config.validate();  // rejects greedy with several sessions before any request

    std::unique_ptr<ChatBackend> backend;
    if (!f.mock.empty()) {
        backend = MockBackend::from_file(f.mock, *survey, f.seed);
    } else {
        HttpBackendConfig http;
        http.url = f.endpoint;
        if (const char* key = std::getenv(f.api_key_env.c_str())) http.api_key = key;
        http.timeout = std::chrono::seconds(f.timeout_s);
        backend = std::make_unique<HttpChatBackend>(std::move(http));
    }
    const RefusalPatterns refusals = refusal_patterns(f.refusal_patterns);

    const fs::path dir = f.out;
    Manifest manifest("run", {{"flags", resolved_flags(app)}, {"run_config", config.snapshot()}});
    manifest.add_input(f.survey);
    if (!f.mock.empty()) manifest.add_input(f.mock);
    if (!f.refusal_patterns.empty()) manifest.add_input(f.refusal_patterns);

    BatchResult result;
    try {
        result = run_batch(config, *backend, refusals, dir);
    } catch (const BatchError& e) {
        // Persisted sessions stay on disk; no manifest marks the run as failed.
        out << e.what() << '\n';
        throw;
    }
    std::vector<fs::path> outputs;
    for (std::size_t i = 0; i < config.n_sessions; ++i) outputs.push_back(transcript_path(dir, i));
    out << fmt::format("sessions: {} executed, {} resumed\n", result.executed, result.skipped);
    finish(manifest, dir, outputs, out);
    return 0;
}

// ---------------------------------------------------------------- analyze

struct AnalyzeFlags {
    std::string transcripts, survey, human, country, out, label;
    MetricFlags metrics;
};

ReportDescriptor descriptor_from(const SessionTranscript& t, const std::string& country,
                                 const std::string& label) {
    ReportDescriptor d;
    d.model = label.empty() ? t.config.value("model", std::string()) : label;
    d.language = t.config.value("language", std::string());
    d.style = t.config.value("prompt_style", std::string());
    if (t.config.contains("decoding")) d.decoding = DecodingConfig::from_json(t.config.at("decoding")).describe();
    d.country = country;
    return d;
}

struct ModelSide {
    std::vector<SessionTranscript> transcripts;
    ModelMatrix model;
};

ModelSide load_model_side(const std::string& dir, const Survey& survey, const std::string& label) {
    auto transcripts = load_transcripts(dir);
    if (transcripts.empty())
        throw DataError(fmt::format("no transcripts found in '{}'", dir));
    auto model = transcripts_to_matrix(transcripts, survey, label.empty() ? "model" : label);
    return {std::move(transcripts), std::move(model)};
}

int cmd_analyze(const AnalyzeFlags& f, const CLI::App& app, std::ostream& out) {
    const AlignmentOptions options = f.metrics.options();
    const Survey survey = load_survey(f.survey);
    ModelSide side = load_model_side(f.transcripts, survey, f.label);
    const ResponseMatrix human = load_responses(f.human, survey, f.country, f.metrics.policy());

    AlignmentReport rep = compute_alignment(side.model.matrix, human, options,
                                            descriptor_from(side.transcripts.front(), f.country, f.label));
    rep.excluded_sessions = side.model.excluded_incomplete;
    const auto& by = side.model.outcomes.by_outcome;
    auto count = [&](Outcome o) { return by.contains(o) ? by.at(o) : std::size_t{0}; };
    rep.refusals = count(Outcome::refusal);
    rep.out_of_range = count(Outcome::out_of_range);
    rep.no_integer = count(Outcome::no_integer_found);
    rep.ambiguous = count(Outcome::ambiguous);
    rep.extraction_failures = side.model.outcomes.failures();

    Metadata meta = base_metadata("alignment_report", options);
    meta.emplace_back("survey_id", survey.survey_id());
    meta.emplace_back("country", f.country);
    meta.emplace_back("msd_modes", "msd=sample_vs_mean, msd_mean=mean_vs_mean");

    const fs::path dir = f.out;
    std::ostringstream buf;
    write_report_csv(buf, {rep}, meta);
    const fs::path report_path = dir / "report.csv";
    write_text_file(report_path, buf.str());
    std::vector<fs::path> outputs{report_path};

    if (side.model.matrix.rows() >= 2) {
        const auto hc = correlation_matrix(human, options.min_pairs);
        const auto mc = correlation_matrix(side.model.matrix, options.min_pairs);
        HeatmapOptions h;
        h.title = fmt::format("Self-correlation: {} vs {}", f.country, rep.config.model);
        h.lower_label = fmt::format("human ({})", f.country);
        h.upper_label = fmt::format("model ({}, {}, {})", rep.config.model, rep.config.style,
                                    rep.config.decoding);
        h.metadata = meta;
        const fs::path svg_path = dir / "heatmap.svg";
        write_text_file(svg_path, render_heatmap(hc, mc, h));
        outputs.push_back(svg_path);
    } else {
        log::warn("model matrix has a single session; correlation metrics and heatmap skipped");
    }

    out << fmt::format("msd={} msd_mean={} kld={} corr_norm_model={} corr_norm_human={} corr_distance={}\n",
                       format_number(rep.msd), format_number(rep.msd_mean), format_number(rep.kld),
                       format_optional(rep.corr_norm_model), format_optional(rep.corr_norm_human),
                       format_optional(rep.corr_distance));
    Manifest manifest("analyze", {{"flags", resolved_flags(app)}});
    manifest.add_input(f.survey);
    manifest.add_input(f.human);
    for (const auto& t : side.transcripts) manifest.add_input(transcript_path(f.transcripts, t.session_id));
    finish(manifest, dir, outputs, out);
    return 0;
}

// ---------------------------------------------------------------- compare

struct CompareFlags {
    std::string human, survey, out;
    std::vector<std::string> countries;
    MetricFlags metrics;
};

int cmd_compare(const CompareFlags& f, const CLI::App& app, std::ostream& out) {
    if (f.countries.size() < 2) throw UsageError("compare needs at least two --country values");
    const AlignmentOptions options = f.metrics.options();
    const Survey survey = load_survey(f.survey);
    CountryPopulations pops;
    for (const auto& c : f.countries) pops.emplace_back(c, load_responses(f.human, survey, c, f.metrics.policy()));

    Metadata meta = base_metadata("country_baseline", options);
    meta.emplace_back("survey_id", survey.survey_id());
    const fs::path dir = f.out;
    std::vector<fs::path> outputs;
    for (MetricKind kind : {MetricKind::msd, MetricKind::kld, MetricKind::corr_distance}) {
        CountryTable t = country_baseline_matrix(pops, MetricSelector{kind, options});
        std::ostringstream buf;
        write_country_table_csv(buf, t, meta);
        const fs::path p = dir / fmt::format("{}.csv", kind == MetricKind::msd ? "msd" : to_string(kind));
        write_text_file(p, buf.str());
        outputs.push_back(p);
    }
    std::ostringstream norms;
    write_metadata(norms, meta);
    csv::write_record(norms, {"country", "corr_norm", "respondents"});
    const auto cn = country_corr_norms(pops, options);
    for (std::size_t i = 0; i < cn.size(); ++i)
        csv::write_record(norms, {cn[i].first, format_number(cn[i].second), std::to_string(pops[i].second.rows())});
    const fs::path np = dir / "corr_norm.csv";
    write_text_file(np, norms.str());
    outputs.push_back(np);

    Manifest manifest("compare", {{"flags", resolved_flags(app)}});
    manifest.add_input(f.survey);
    manifest.add_input(f.human);
    finish(manifest, dir, outputs, out);
    return 0;
}

// ---------------------------------------------------------------- converge

struct ConvergeFlags {
    std::string transcripts, survey, human, country, out, mode = "prefix";
    std::vector<std::size_t> grid;
    std::vector<std::string> metric_names{"msd", "kld", "corr_distance"};
    double epsilon = 0.005;
    std::size_t bootstrap_samples = 100;
    std::uint64_t seed = 0;
    MetricFlags metrics;
};

int cmd_converge(const ConvergeFlags& f, const CLI::App& app, std::ostream& out) {
    if (!(f.epsilon > 0.0)) throw UsageError("--epsilon must be positive");
    const AlignmentOptions options = f.metrics.options();
    const Survey survey = load_survey(f.survey);
    ModelSide side = load_model_side(f.transcripts, survey, "");
    const ResponseMatrix human = load_responses(f.human, survey, f.country, f.metrics.policy());
    const std::size_t pool = side.model.matrix.rows();

    std::vector<std::size_t> grid;
    if (f.grid.empty()) {
        grid = default_grid(pool);
    } else {
        std::vector<std::size_t> g = f.grid;
        std::sort(g.begin(), g.end());
        g.erase(std::unique(g.begin(), g.end()), g.end());
        if (g.front() == 0) throw UsageError("--grid points must be positive");
        if (g.front() > pool)
            throw DataError(fmt::format("pool of {} complete sessions is smaller than the smallest "
                                        "grid point {}",
                                        pool, g.front()));
        for (std::size_t k : g)
            if (k <= pool) grid.push_back(k);
        if (grid.back() != pool) grid.push_back(pool);
    }
    CurveOptions copt;
    copt.mode = parse_curve_mode(f.mode);
    copt.bootstrap_samples = f.bootstrap_samples;
    copt.seed = f.seed;

    Metadata meta = base_metadata("convergence_curve", options);
    meta.emplace_back("survey_id", survey.survey_id());
    meta.emplace_back("country", f.country);
    meta.emplace_back("pool_size", std::to_string(pool));

    const fs::path dir = f.out;
    std::vector<fs::path> outputs;
    std::vector<ConvergenceCurve> curves;
    for (const auto& name : f.metric_names) {
        curves.push_back(convergence_curve(side.model.matrix, human, MetricSelector{parse_metric_kind(name), options},
                                           grid, copt));
        std::ostringstream buf;
        write_curve_csv(buf, curves.back(), meta);
        const fs::path p = dir / fmt::format("curve_{}.csv", name);
        write_text_file(p, buf.str());
        outputs.push_back(p);
    }
    std::vector<std::pair<const ConvergenceCurve*, std::optional<std::size_t>>> stab;
    for (const auto& c : curves) {
        stab.emplace_back(&c, stability_point(c, f.epsilon));
        out << fmt::format("{}: final={} stability_k={}\n", c.metric, format_number(c.final),
                           stab.back().second ? std::to_string(*stab.back().second) : "not_stabilized");
    }
    std::ostringstream buf;
    write_stability_csv(buf, stab, f.epsilon, meta);
    const fs::path sp = dir / "stability.csv";
    write_text_file(sp, buf.str());
    outputs.push_back(sp);

    Manifest manifest("converge", {{"flags", resolved_flags(app)}});
    manifest.add_input(f.survey);
    manifest.add_input(f.human);
    finish(manifest, dir, outputs, out);
    return 0;
}

// ---------------------------------------------------------------- synth

struct SynthFlags {
    std::string spec, out;
    std::optional<std::size_t> n;
    std::optional<std::uint64_t> seed;
    bool separation = false;
};

int cmd_synth(const SynthFlags& f, const CLI::App& app, std::ostream& out) {
    const fs::path dir = f.out;
    Manifest manifest("synth", {{"flags", resolved_flags(app)}});
    std::vector<fs::path> outputs;
    if (f.separation) {
        if (!f.spec.empty()) throw UsageError("--separation does not take --spec");
        const SeparationReport rep = separation_experiment(f.n.value_or(2000), f.seed.value_or(20240601));
        std::ostringstream buf;
        write_metadata(buf, {{"tool", "valign"},
                             {"version", VALIGN_VERSION},
                             {"output", "separation_experiment"},
                             {"smoothing_alpha", "0.5"},
                             {"normalization", "per_sqrt_n"},
                             {"min_pairs", "10"}});
        csv::write_record(buf, {"n", "seed", "msd_mean", "msd", "kld", "corr_distance"});
        csv::write_record(buf, {std::to_string(rep.n), std::to_string(rep.seed), format_number(rep.msd_mean),
                                format_number(rep.msd_sample), format_number(rep.kld),
                                format_number(rep.corr_distance)});
        const fs::path p = dir / "separation.csv";
        write_text_file(p, buf.str());
        outputs.push_back(p);
        out << fmt::format("msd_mean={} kld={} corr_distance={}\n", format_number(rep.msd_mean),
                           format_number(rep.kld), format_number(rep.corr_distance));
    } else {
        if (f.spec.empty()) throw UsageError("synth needs --spec (or --separation)");
        PopulationSpec spec = PopulationSpec::load(f.spec);
        if (f.n) spec.n_respondents = *f.n;
        if (f.seed) spec.seed = *f.seed;
        const ResponseMatrix pop = make_population(spec);
        std::ostringstream buf;
        write_responses_csv(buf, pop, spec.country);
        const fs::path p = dir / "population.csv";
        write_text_file(p, buf.str());
        outputs.push_back(p);
        manifest.add_input(f.spec);
        out << fmt::format("{} respondents x {} questions\n", pop.rows(), pop.cols());
    }
    finish(manifest, dir, outputs, out);
    return 0;
}

// ---------------------------------------------------------------- summarize

struct SummarizeFlags {
    std::string human, survey, country, out;
    MetricFlags metrics;
};

int cmd_summarize(const SummarizeFlags& f, const CLI::App& app, std::ostream& out) {
    const Survey survey = load_survey(f.survey);
    LoadStats stats;
    const ResponseMatrix human = load_responses(f.human, survey, f.country, f.metrics.policy(), &stats);
    std::ostringstream buf;
    write_metadata(buf, {{"tool", "valign"},
                         {"version", VALIGN_VERSION},
                         {"output", "population_summary"},
                         {"country", f.country},
                         {"respondents", std::to_string(human.rows())},
                         {"rows_rejected", std::to_string(stats.rows_rejected)},
                         {"weights", "unweighted"}});
    write_summary_csv(buf, population_summary(human));
    const fs::path dir = f.out;
    const fs::path p = dir / "summary.csv";
    write_text_file(p, buf.str());
    Manifest manifest("summarize", {{"flags", resolved_flags(app)}});
    manifest.add_input(f.survey);
    manifest.add_input(f.human);
    finish(manifest, dir, {p}, out);
    return 0;
}

// ---------------------------------------------------------------- correlate

struct CorrelateFlags {
    std::vector<std::string> reports;
    std::vector<std::string> matches;  // LANG:COUNTRY
    std::string out;
};

int cmd_correlate(const CorrelateFlags& f, const CLI::App& app, std::ostream& out) {
    std::vector<AlignmentReport> reports;
    for (const auto& p : f.reports) {
        auto r = read_report_csv(p);
        reports.insert(reports.end(), r.begin(), r.end());
    }
    Metadata meta{{"tool", "valign"}, {"version", VALIGN_VERSION}, {"output", "metric_correlation"},
                  {"reports", std::to_string(reports.size())}};
    const fs::path dir = f.out;
    std::vector<fs::path> outputs;
    std::ostringstream buf;
    write_metric_correlation_csv(buf, metric_correlation_table(reports), meta);
    const fs::path p = dir / "metric_correlation.csv";
    write_text_file(p, buf.str());
    outputs.push_back(p);

    if (!f.matches.empty()) {
        std::multimap<std::string, std::string> pairs;
        for (const auto& m : f.matches) {
            auto colon = m.find(':');
            if (colon == std::string::npos || colon == 0 || colon + 1 == m.size())
                throw UsageError(fmt::format("--match expects LANG:COUNTRY, got '{}'", m));
            pairs.emplace(m.substr(0, colon), m.substr(colon + 1));
        }
        std::vector<int> match;
        for (const auto& r : reports) {
            int v = 0;
            for (auto [it, end] = pairs.equal_range(r.config.language); it != end; ++it)
                if (it->second == r.config.country) v = 1;
            match.push_back(v);
        }
        std::ostringstream mcsv;
        write_metadata(mcsv, meta);
        mcsv << "# indicator: 1 when the report's language matches its country\n";
        csv::write_record(mcsv, {"metric", "point_biserial"});
        for (const auto& [metric, value] : matching_correlation(reports, match))
            csv::write_record(mcsv, {metric, format_number(value)});
        const fs::path mp = dir / "matching.csv";
        write_text_file(mp, mcsv.str());
        outputs.push_back(mp);
    }
    Manifest manifest("correlate", {{"flags", resolved_flags(app)}});
    for (const auto& r : f.reports) manifest.add_input(r);
    finish(manifest, dir, outputs, out);
    return 0;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Survey alignment metrics for chat language models", "valign"};
    app.set_version_flag("--version", VALIGN_VERSION);
    app.set_config("--config", "", "TOML/INI file; [run], [analyze], ... sections hold subcommand flags");
    app.allow_config_extras(CLI::config_extras_mode::error);
    app.require_subcommand(1);
    bool verbose = false;
    app.add_flag("-v,--verbose", verbose, "Log progress to stderr");

    RunFlags rf;
    CLI::App* run = app.add_subcommand("run", "Administer a survey to a model backend");
    run->add_option("--survey", rf.survey, "Survey JSON")->required()->check(CLI::ExistingFile);
    run->add_option("--lang", rf.lang, "Prompt language code")->required();
    run->add_option("--style", rf.style, "direct or cot")->required()->check(CLI::IsMember({"direct", "cot"}));
    run->add_option("--decoding", rf.decoding, "greedy or nucleus")
        ->required()
        ->check(CLI::IsMember({"greedy", "nucleus"}));
    run->add_option("--top-p", rf.top_p, "Nucleus mass (nucleus only)");
    run->add_option("--temperature", rf.temperature, "Sampling temperature (nucleus only)");
    run->add_option("--sessions", rf.sessions, "Number of sessions")->capture_default_str();
    run->add_option("--concurrency", rf.concurrency, "Sessions in flight")->capture_default_str();
    run->add_option("--endpoint", rf.endpoint, "Chat completion URL");
    run->add_option("--mock", rf.mock, "Mock backend script (JSON)")->check(CLI::ExistingFile);
    run->add_option("--model", rf.model, "Model name sent to the backend")->required();
    run->add_option("--out", rf.out, "Transcript directory")->required();
    run->add_option("--seed", rf.seed, "Seed for the mock backend");
    run->add_option("--system-prompt", rf.system_prompt, "Optional system message");
    run->add_option("--api-key-env", rf.api_key_env, "Environment variable holding the API key")
        ->capture_default_str();
    run->add_option("--refusal-patterns", rf.refusal_patterns, "Refusal pattern file")->check(CLI::ExistingFile);
    run->add_option("--max-attempts", rf.max_attempts, "Attempts per request")->capture_default_str();
    run->add_option("--backoff-ms", rf.backoff_ms, "Initial retry backoff")->capture_default_str();
    run->add_option("--timeout-s", rf.timeout_s, "HTTP timeout in seconds")->capture_default_str();

    AnalyzeFlags af;
    CLI::App* analyze = app.add_subcommand("analyze", "Compare transcripts with a human population");
    analyze->add_option("--transcripts", af.transcripts, "Transcript directory")->required();
    analyze->add_option("--survey", af.survey, "Survey JSON")->required()->check(CLI::ExistingFile);
    analyze->add_option("--human", af.human, "Human responses CSV")->required()->check(CLI::ExistingFile);
    analyze->add_option("--country", af.country, "Country code in the CSV")->required();
    analyze->add_option("--out", af.out, "Output directory")->required();
    analyze->add_option("--label", af.label, "Model label in the report (default: model name)");
    af.metrics.add_to(*analyze);

    CompareFlags cf;
    CLI::App* compare = app.add_subcommand("compare", "Country-to-country baseline tables");
    compare->add_option("--human", cf.human, "Human responses CSV")->required()->check(CLI::ExistingFile);
    compare->add_option("--survey", cf.survey, "Survey JSON")->required()->check(CLI::ExistingFile);
    compare->add_option("--country", cf.countries, "Country code (repeat, at least two)")->required();
    compare->add_option("--out", cf.out, "Output directory")->required();
    cf.metrics.add_to(*compare);

    ConvergeFlags vf;
    CLI::App* converge = app.add_subcommand("converge", "Metric estimates against sample count");
    converge->add_option("--transcripts", vf.transcripts, "Transcript directory")->required();
    converge->add_option("--survey", vf.survey, "Survey JSON")->required()->check(CLI::ExistingFile);
    converge->add_option("--human", vf.human, "Human responses CSV")->required()->check(CLI::ExistingFile);
    converge->add_option("--country", vf.country, "Country code in the CSV")->required();
    converge->add_option("--out", vf.out, "Output directory")->required();
    converge->add_option("--epsilon", vf.epsilon, "Stability tolerance")->capture_default_str();
    converge->add_option("--grid", vf.grid, "Sample counts (default 1,2,5,...,500,pool)")->delimiter(',');
    converge->add_option("--metric", vf.metric_names, "Metrics to trace")
        ->delimiter(',')
        ->check(CLI::IsMember({"msd", "msd_mean", "kld", "corr_distance"}))
        ->capture_default_str();
    converge->add_option("--mode", vf.mode, "prefix or bootstrap")
        ->check(CLI::IsMember({"prefix", "bootstrap"}))
        ->capture_default_str();
    converge->add_option("--bootstrap-samples", vf.bootstrap_samples, "Resamples per grid point")
        ->capture_default_str();
    converge->add_option("--seed", vf.seed, "Bootstrap seed")->capture_default_str();
    vf.metrics.add_to(*converge);

    SynthFlags sf;
    CLI::App* synth = app.add_subcommand("synth", "Generate a synthetic respondent population");
    synth->add_option("--spec", sf.spec, "Population spec JSON")->check(CLI::ExistingFile);
    synth->add_option("--out", sf.out, "Output directory")->required();
    synth->add_option("--n", sf.n, "Override the number of respondents");
    synth->add_option("--seed", sf.seed, "Override the seed");
    synth->add_flag("--separation", sf.separation, "Run the marginal/structural separation experiment");

    SummarizeFlags mf;
    CLI::App* summarize = app.add_subcommand("summarize", "Per-question counts and unit means");
    summarize->add_option("--human", mf.human, "Human responses CSV")->required()->check(CLI::ExistingFile);
    summarize->add_option("--survey", mf.survey, "Survey JSON")->required()->check(CLI::ExistingFile);
    summarize->add_option("--country", mf.country, "Country code in the CSV")->required();
    summarize->add_option("--out", mf.out, "Output directory")->required();
    mf.metrics.add_to(*summarize);

    CorrelateFlags rfl;
    CLI::App* correlate = app.add_subcommand("correlate", "Correlations between metrics across reports");
    correlate->add_option("--reports", rfl.reports, "Report CSV files")->required()->check(CLI::ExistingFile);
    correlate->add_option("--match", rfl.matches, "LANG:COUNTRY pairs counted as matching");
    correlate->add_option("--out", rfl.out, "Output directory")->required();

    // --config belongs to the top-level app; accept it after the subcommand too.
    std::vector<std::string> ordered;
    std::vector<std::string> rest;
    for (std::size_t i = 0; i < args.size(); ++i) {
        if (args[i] == "--config" && i + 1 < args.size()) {
            ordered.push_back(args[i]);
            ordered.push_back(args[++i]);
        } else if (args[i].rfind("--config=", 0) == 0) {
            ordered.push_back(args[i]);
        } else {
            rest.push_back(args[i]);
        }
    }
    ordered.insert(ordered.end(), rest.begin(), rest.end());
    std::vector<std::string> reversed(ordered.rbegin(), ordered.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? 0 : static_cast<int>(ErrorKind::usage);
    }
    log::set_level(verbose ? log::Level::info : log::Level::warn);

    try {
        if (run->parsed()) return cmd_run(rf, *run, out);
        if (analyze->parsed()) return cmd_analyze(af, *analyze, out);
        if (compare->parsed()) return cmd_compare(cf, *compare, out);
        if (converge->parsed()) return cmd_converge(vf, *converge, out);
        if (synth->parsed()) return cmd_synth(sf, *synth, out);
        if (summarize->parsed()) return cmd_summarize(mf, *summarize, out);
        if (correlate->parsed()) return cmd_correlate(rfl, *correlate, out);
    } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        return e.exit_code();
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return static_cast<int>(ErrorKind::data);
    }
    return static_cast<int>(ErrorKind::usage);
}

}  // namespace valign::cli
