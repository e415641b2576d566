#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "valign/error.hpp"
#include "valign/survey.hpp"

namespace valign {

struct ChatMessage {
    std::string role;
    std::string content;
    friend bool operator==(const ChatMessage&, const ChatMessage&) = default;
};

enum class DecodingMode { greedy, nucleus };

/// Greedy carries no sampling parameters; nucleus requires 0 < top_p <= 1
/// and temperature > 0.
class DecodingConfig {
public:
    static DecodingConfig greedy() { return DecodingConfig(DecodingMode::greedy, 1.0, 0.0); }
    /// Throws UsageError on out-of-range parameters.
    static DecodingConfig nucleus(double top_p, double temperature);

    DecodingMode mode() const noexcept { return mode_; }
    double top_p() const noexcept { return top_p_; }
    double temperature() const noexcept { return temperature_; }

    std::string describe() const;
    nlohmann::json to_json() const;
    static DecodingConfig from_json(const nlohmann::json& j);
    friend bool operator==(const DecodingConfig&, const DecodingConfig&) = default;

private:
    DecodingConfig(DecodingMode m, double p, double t) : mode_(m), top_p_(p), temperature_(t) {}
    DecodingMode mode_;
    double top_p_;
    double temperature_;
};

struct CompletionRequest {
    std::string model;
    std::span<const ChatMessage> messages;
    DecodingConfig decoding = DecodingConfig::greedy();
    PromptStyle style = PromptStyle::direct;
    std::size_t session_index = 0;
    std::size_t question_index = 0;
    std::string question_id;
    std::size_t attempt = 0;  // 0-based retry counter
};

/// A failed request. Retryable failures (connection errors, 429, 5xx) are
/// re-attempted by the runner; others abort the session immediately.
class TransportError : public BackendError {
public:
    TransportError(const std::string& what, bool retryable)
        : BackendError(what), retryable_(retryable) {}
    bool retryable() const noexcept { return retryable_; }

private:
    bool retryable_;
};

/// One chat-completion call. Implementations must be safe to call from
/// several sessions concurrently.
class ChatBackend {
public:
    virtual ~ChatBackend() = default;
    virtual std::string complete(const CompletionRequest& request) = 0;
    virtual std::string describe() const = 0;
};

/// Request body for the OpenAI-style chat completion wire format. Greedy is
/// sent as temperature 0 without top_p.
nlohmann::json chat_request_body(const std::string& model, std::span<const ChatMessage> messages,
                                 const DecodingConfig& decoding);
/// choices[0].message.content of a completion response.
std::string parse_chat_response(const nlohmann::json& body);

struct HttpBackendConfig {
    std::string url;  // full endpoint, e.g. http://localhost:8000/v1/chat/completions
    std::string api_key;
    std::chrono::milliseconds timeout{120000};
};

class HttpChatBackend final : public ChatBackend {
public:
    explicit HttpChatBackend(HttpBackendConfig config);
    std::string complete(const CompletionRequest& request) override;
    std::string describe() const override { return config_.url; }

private:
    HttpBackendConfig config_;
    std::string scheme_host_port_;
    std::string path_;
};

/// Scripted backend used by tests and offline runs.
///
/// Script (JSON):
///   responses      [{session?, question? | question_id?, style?, text}] exact texts;
///                  omitted keys match anything, the most specific entry wins
///   distributions  {question_id: [p_min, ..., p_max]} categorical answer law;
///                  greedy returns the mode, nucleus samples after temperature
///                  scaling and top-p truncation
///   failures       [{session, question, attempts}] transport failures; attempts < 0
///                  fails permanently, k fails the first k attempts
///   direct_template / cot_template  text wrapping a sampled answer ("{answer}")
///   seed           default seed when the run supplies none
class MockBackend final : public ChatBackend {
public:
    MockBackend(const nlohmann::json& script, const Survey& survey,
                std::optional<std::uint64_t> seed = std::nullopt);
    static std::unique_ptr<MockBackend> from_file(const std::filesystem::path& path,
                                                  const Survey& survey,
                                                  std::optional<std::uint64_t> seed = std::nullopt);

    std::string complete(const CompletionRequest& request) override;
    std::string describe() const override { return "mock"; }

    /// Keep a copy of every request's message history (off by default).
    void record_requests(bool on) { record_ = on; }
    /// Messages seen by the most recent request for (session, question).
    std::vector<ChatMessage> observed(std::size_t session, std::size_t question) const;
    std::size_t request_count() const;

private:
    struct Scripted {
        std::optional<std::size_t> session;
        std::optional<std::size_t> question;
        std::optional<PromptStyle> style;
        std::string text;
    };
    struct Failure {
        std::size_t session;
        std::size_t question;
        long attempts;
    };

    std::optional<std::string> scripted_text(const CompletionRequest& request) const;
    int sample_answer(const CompletionRequest& request) const;

    const Survey& survey_;
    std::uint64_t seed_ = 0;
    std::vector<Scripted> responses_;
    std::map<std::string, std::vector<double>> distributions_;
    std::vector<Failure> failures_;
    std::string direct_template_ = "{answer}";
    std::string cot_template_ =
        "Weighing the considerations step by step, my final answer is {answer}";

    mutable std::mutex mutex_;
    std::map<std::pair<std::size_t, std::size_t>, std::vector<ChatMessage>> observed_;
    std::size_t requests_ = 0;
    bool record_ = false;
};

/// Nucleus truncation of a categorical law: probabilities raised to 1/T,
/// renormalised, then the smallest top-probability set whose mass reaches
/// top_p is kept and renormalised. Greedy returns a one-hot at the mode.
std::vector<double> nucleus_filter(std::span<const double> probs, const DecodingConfig& decoding);

}  // namespace valign
