#pragma once

#include <chrono>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "valign/backend.hpp"
#include "valign/extract.hpp"
#include "valign/survey.hpp"
#include "valign/transcript.hpp"

namespace valign {

struct RetryPolicy {
    std::size_t max_attempts = 4;
    std::chrono::milliseconds initial_backoff{1000};
    double multiplier = 2.0;
};

struct RunConfig {
    std::shared_ptr<const Survey> survey;
    std::string language = "en";
    PromptStyle style = PromptStyle::direct;
    DecodingConfig decoding = DecodingConfig::greedy();
    std::size_t n_sessions = 1;
    std::string backend;  // endpoint URL or "mock"
    std::string model;
    std::size_t max_concurrent_sessions = 1;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> system_prompt;
    RetryPolicy retry;

    /// Throws UsageError for greedy with n_sessions > 1, zero counts, an
    /// unknown language or a missing survey.
    void validate() const;
    /// Persisted with every transcript. Excludes n_sessions and concurrency
    /// so a batch can be extended on resume.
    nlohmann::json snapshot() const;
};

/// Administers the whole survey as one accumulating conversation. If `out`
/// is given the transcript is persisted record by record. Transport failures
/// that survive the retry policy end the session as incomplete; they do not
/// throw.
SessionTranscript run_session(const RunConfig& config, ChatBackend& backend,
                              const RefusalPatterns& refusals, std::size_t session_index,
                              const std::filesystem::path* out = nullptr);

struct BatchResult {
    std::vector<SessionTranscript> transcripts;  // ordered by session id
    std::size_t executed = 0;
    std::size_t skipped = 0;                     // already complete on disk
    std::vector<std::size_t> aborted;
};

class BatchError : public BackendError {
public:
    BatchError(const std::string& what, BatchResult result)
        : BackendError(what), result_(std::move(result)) {}
    const BatchResult& result() const noexcept { return result_; }

private:
    BatchResult result_;
};

/// Runs sessions 0..n-1 with at most max_concurrent_sessions in flight,
/// skipping sessions already persisted as complete with the same config.
/// Throws BatchError (after persisting everything) if any session aborted.
BatchResult run_batch(const RunConfig& config, ChatBackend& backend, const RefusalPatterns& refusals,
                      const std::filesystem::path& out_dir);

struct OutcomeCounts {
    std::map<Outcome, std::size_t> by_outcome;
    std::size_t failures() const;  // everything except answers
};

struct ModelMatrix {
    ResponseMatrix matrix;
    std::size_t excluded_incomplete = 0;
    OutcomeCounts outcomes;  // over included sessions
};

/// One row per complete session in session-id order; non-answers become
/// missing cells. Throws EmptyPopulationError if no session is complete and
/// DataError if transcripts disagree with the survey or with each other.
ModelMatrix transcripts_to_matrix(const std::vector<SessionTranscript>& transcripts,
                                  const Survey& survey, const std::string& label = "model");

}  // namespace valign
