#include <httplib.h>

#include <regex>

#include <fmt/format.h>

#include "valign/backend.hpp"
#include "valign/log.hpp"

namespace valign {

HttpChatBackend::HttpChatBackend(HttpBackendConfig config) : config_(std::move(config)) {
    static const std::regex url_re(R"(^(https?://[^/]+)(/.*)?$)");
    std::smatch m;
    if (!std::regex_match(config_.url, m, url_re))
        throw UsageError(fmt::format("endpoint '{}' is not an http(s) URL", config_.url));
    scheme_host_port_ = m[1].str();
    path_ = m[2].matched ? m[2].str() : "/v1/chat/completions";
}

std::string HttpChatBackend::complete(const CompletionRequest& request) {
    // httplib::Client is not thread-safe; sessions each get their own.
    httplib::Client client(scheme_host_port_);
    const auto secs = std::chrono::duration_cast<std::chrono::seconds>(config_.timeout);
    client.set_connection_timeout(secs);
    client.set_read_timeout(secs);
    client.set_write_timeout(secs);

    httplib::Headers headers;
    if (!config_.api_key.empty()) headers.emplace("Authorization", "Bearer " + config_.api_key);

    const std::string body =
        chat_request_body(request.model, request.messages, request.decoding).dump();
    auto res = client.Post(path_, headers, body, "application/json");
    if (!res)
        throw TransportError(fmt::format("POST {}{} failed: {}", scheme_host_port_, path_,
                                         httplib::to_string(res.error())),
                             true);
    if (res->status == 429 || res->status >= 500)
        throw TransportError(fmt::format("POST {}{}: HTTP {}", scheme_host_port_, path_, res->status),
                             true);
    if (res->status != 200)
        throw TransportError(fmt::format("POST {}{}: HTTP {}: {}", scheme_host_port_, path_,
                                         res->status, res->body.substr(0, 200)),
                             false);
    nlohmann::json parsed;
    try {
        parsed = nlohmann::json::parse(res->body);
    } catch (const nlohmann::json::parse_error& e) {
        throw TransportError(fmt::format("response body is not JSON: {}", e.what()), false);
    }
    return parse_chat_response(parsed);
}

}  // namespace valign
