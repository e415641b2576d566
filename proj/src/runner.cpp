#include "valign/runner.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <mutex>
#include <thread>

#include <fmt/format.h>

#include "valign/log.hpp"

namespace valign {

using nlohmann::json;

void RunConfig::validate() const {
    if (!survey) throw UsageError("run configuration has no survey");
    if (n_sessions == 0) throw UsageError("--sessions must be positive");
    if (max_concurrent_sessions == 0) throw UsageError("--concurrency must be positive");
    if (decoding.mode() == DecodingMode::greedy && n_sessions > 1)
        throw UsageError(fmt::format("greedy decoding is deterministic; {} sessions would be "
                                     "duplicates (use --sessions 1 or nucleus sampling)",
                                     n_sessions));
    if (!survey->languages().contains(language))
        throw UsageError(fmt::format("survey '{}' has no prompts for language '{}'",
                                     survey->survey_id(), language));
    if (retry.max_attempts == 0) throw UsageError("retry policy needs at least one attempt");
}

json RunConfig::snapshot() const {
    json j = {{"survey_id", survey ? survey->survey_id() : std::string()},
              {"language", language},
              {"prompt_style", std::string(to_string(style))},
              {"decoding", decoding.to_json()},
              {"backend", backend},
              {"model", model},
              {"system_prompt", system_prompt ? json(*system_prompt) : json(nullptr)}};
    j["seed"] = seed ? json(*seed) : json(nullptr);
    return j;
}

std::size_t OutcomeCounts::failures() const {
    std::size_t n = 0;
    for (const auto& [o, c] : by_outcome)
        if (o != Outcome::answer) n += c;
    return n;
}

SessionTranscript run_session(const RunConfig& config, ChatBackend& backend,
                              const RefusalPatterns& refusals, std::size_t session_index,
                              const std::filesystem::path* out) {
    config.validate();
    const Survey& survey = *config.survey;
    const json snapshot = config.snapshot();

    SessionTranscript t;
    t.session_id = session_index;
    t.survey_id = survey.survey_id();
    t.config = snapshot;

    std::optional<TranscriptWriter> writer;
    if (out) writer.emplace(*out, session_index, survey.survey_id(), snapshot);

    std::vector<ChatMessage> history;
    if (config.system_prompt) history.push_back({"system", *config.system_prompt});

    for (std::size_t qi = 0; qi < survey.size(); ++qi) {
        const Question& q = survey.question(qi);
        const std::string& prompt = q.prompts.at(config.language).get(config.style);
        history.push_back({"user", prompt});

        CompletionRequest req;
        req.model = config.model;
        req.messages = history;
        req.decoding = config.decoding;
        req.style = config.style;
        req.session_index = session_index;
        req.question_index = qi;
        req.question_id = q.id;

        std::optional<std::string> reply;
        std::string last_error;
        auto backoff = config.retry.initial_backoff;
        for (std::size_t attempt = 0; attempt < config.retry.max_attempts; ++attempt) {
            req.attempt = attempt;
            try {
                reply = backend.complete(req);
                break;
            } catch (const TransportError& e) {
                last_error = e.what();
                log::warn("session {} question '{}' attempt {}: {}", session_index, q.id,
                          attempt + 1, e.what());
                if (!e.retryable()) break;
                if (attempt + 1 < config.retry.max_attempts && backoff.count() > 0) {
                    std::this_thread::sleep_for(backoff);
                    backoff = std::chrono::milliseconds(static_cast<long long>(
                        std::llround(static_cast<double>(backoff.count()) * config.retry.multiplier)));
                }
            }
        }
        if (!reply) {
            t.complete = false;
            t.error = fmt::format("question '{}' (index {}): {}", q.id, qi, last_error);
            if (writer) writer->finish(false, t.error);
            return t;
        }

        TurnRecord rec;
        rec.index = qi;
        rec.question_id = q.id;
        rec.prompt = prompt;
        rec.raw = *reply;
        rec.timestamp = utc_timestamp();
        if (writer) {
            // Raw text hits the disk before parsing, and parsing never edits it.
            TurnRecord pending = rec;
            pending.result = extract_answer(rec.raw, q, config.style, refusals, config.language);
            rec.result = pending.result;
            writer->append(pending);
        } else {
            rec.result = extract_answer(rec.raw, q, config.style, refusals, config.language);
        }
        history.push_back({"assistant", *reply});
        t.records.push_back(std::move(rec));
    }
    t.complete = true;
    if (writer) writer->finish(true);
    return t;
}

BatchResult run_batch(const RunConfig& config, ChatBackend& backend, const RefusalPatterns& refusals,
                      const std::filesystem::path& out_dir) {
    config.validate();
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec) throw DataError(fmt::format("cannot create '{}': {}", out_dir.string(), ec.message()));

    const json snapshot = config.snapshot();
    BatchResult result;
    result.transcripts.resize(config.n_sessions);
    std::vector<std::size_t> pending;
    for (std::size_t i = 0; i < config.n_sessions; ++i) {
        const auto path = transcript_path(out_dir, i);
        if (std::filesystem::exists(path)) {
            SessionTranscript existing = load_transcript(path);
            if (existing.complete) {
                if (existing.config != snapshot)
                    throw DataError(fmt::format("'{}' was produced by a different configuration; "
                                                "use a fresh output directory",
                                                path.string()));
                result.transcripts[i] = std::move(existing);
                ++result.skipped;
                continue;
            }
        }
        pending.push_back(i);
    }
    log::info("batch: {} sessions requested, {} already complete, {} to run", config.n_sessions,
              result.skipped, pending.size());

    std::atomic<std::size_t> cursor{0};
    std::mutex mutex;
    auto worker = [&] {
        for (;;) {
            std::size_t slot = cursor.fetch_add(1);
            if (slot >= pending.size()) return;
            const std::size_t session = pending[slot];
            const auto path = transcript_path(out_dir, session);
            SessionTranscript t;
            try {
                t = run_session(config, backend, refusals, session, &path);
            } catch (const Error& e) {
                t.session_id = session;
                t.complete = false;
                t.error = e.what();
            }
            std::lock_guard lock(mutex);
            if (!t.complete) result.aborted.push_back(session);
            result.transcripts[session] = std::move(t);
            ++result.executed;
        }
    };
    {
        const std::size_t n_workers = std::min(config.max_concurrent_sessions, pending.size());
        std::vector<std::jthread> workers;
        workers.reserve(n_workers);
        for (std::size_t w = 0; w < n_workers; ++w) workers.emplace_back(worker);
    }

    std::sort(result.aborted.begin(), result.aborted.end());
    if (!result.aborted.empty()) {
        std::string ids;
        for (auto id : result.aborted) ids += (ids.empty() ? "" : ", ") + std::to_string(id);
        std::string what = fmt::format("{} of {} sessions aborted: {}", result.aborted.size(),
                                       config.n_sessions, ids);
        throw BatchError(what, std::move(result));
    }
    return result;
}

ModelMatrix transcripts_to_matrix(const std::vector<SessionTranscript>& transcripts,
                                  const Survey& survey, const std::string& label) {
    std::vector<std::vector<Cell>> rows;
    std::size_t excluded = 0;
    OutcomeCounts counts;
    const json* reference_config = nullptr;
    for (const auto& t : transcripts) {
        if (t.survey_id != survey.survey_id())
            throw DataError(fmt::format("session {} belongs to survey '{}', expected '{}'",
                                        t.session_id, t.survey_id, survey.survey_id()));
        if (reference_config && t.config != *reference_config)
            throw DataError(fmt::format("session {} was run with a different configuration",
                                        t.session_id));
        reference_config = &t.config;
        if (!t.complete) {
            ++excluded;
            continue;
        }
        if (t.records.size() != survey.size())
            throw DataError(fmt::format("session {} has {} records for a {}-question survey",
                                        t.session_id, t.records.size(), survey.size()));
        std::vector<Cell> row(survey.size());
        for (std::size_t i = 0; i < survey.size(); ++i) {
            const TurnRecord& r = t.records[i];
            if (r.index != i || r.question_id != survey.question(i).id)
                throw DataError(fmt::format("session {} record {} is question '{}', expected '{}'",
                                            t.session_id, i, r.question_id, survey.question(i).id));
            ++counts.by_outcome[r.result.outcome];
            if (r.result.outcome == Outcome::answer) row[i] = static_cast<int>(r.result.value);
        }
        rows.push_back(std::move(row));
    }
    if (rows.empty())
        throw EmptyPopulationError(fmt::format("no complete sessions among {} transcripts ({} "
                                               "incomplete)",
                                               transcripts.size(), excluded));
    return ModelMatrix{ResponseMatrix(ModelRuns{label}, survey.question_ids(), survey.scales(),
                                      std::move(rows)),
                       excluded, std::move(counts)};
}

}  // namespace valign
