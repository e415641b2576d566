#include "valign/backend.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <fmt/format.h>

namespace valign {

using nlohmann::json;

DecodingConfig DecodingConfig::nucleus(double top_p, double temperature) {
    if (!(top_p > 0.0 && top_p <= 1.0))
        throw UsageError(fmt::format("nucleus sampling requires 0 < top_p <= 1 (got {})", top_p));
    if (!(temperature > 0.0) || !std::isfinite(temperature))
        throw UsageError(fmt::format("nucleus sampling requires temperature > 0 (got {})",
                                     temperature));
    return DecodingConfig(DecodingMode::nucleus, top_p, temperature);
}

std::string DecodingConfig::describe() const {
    if (mode_ == DecodingMode::greedy) return "greedy";
    return fmt::format("nucleus(top_p={},temperature={})", top_p_, temperature_);
}

json DecodingConfig::to_json() const {
    if (mode_ == DecodingMode::greedy) return {{"mode", "greedy"}, {"temperature", 0.0}};
    return {{"mode", "nucleus"}, {"top_p", top_p_}, {"temperature", temperature_}};
}

DecodingConfig DecodingConfig::from_json(const json& j) {
    std::string mode = j.at("mode").get<std::string>();
    if (mode == "greedy") return greedy();
    if (mode == "nucleus") return nucleus(j.at("top_p").get<double>(), j.at("temperature").get<double>());
    throw DataError(fmt::format("unknown decoding mode '{}'", mode));
}

json chat_request_body(const std::string& model, std::span<const ChatMessage> messages,
                       const DecodingConfig& decoding) {
    json msgs = json::array();
    for (const auto& m : messages) msgs.push_back({{"role", m.role}, {"content", m.content}});
    json body = {{"model", model}, {"messages", std::move(msgs)}};
    if (decoding.mode() == DecodingMode::greedy) {
        body["temperature"] = 0.0;
    } else {
        body["temperature"] = decoding.temperature();
        body["top_p"] = decoding.top_p();
    }
    return body;
}

std::string parse_chat_response(const json& body) {
    try {
        const json& content = body.at("choices").at(0).at("message").at("content");
        if (content.is_null()) return {};
        return content.get<std::string>();
    } catch (const json::exception& e) {
        throw TransportError(fmt::format("malformed chat completion response: {}", e.what()), false);
    }
}

std::vector<double> nucleus_filter(std::span<const double> probs, const DecodingConfig& decoding) {
    const std::size_t k = probs.size();
    std::vector<double> out(k, 0.0);
    if (k == 0) return out;
    if (decoding.mode() == DecodingMode::greedy) {
        auto it = std::max_element(probs.begin(), probs.end());  // first mode on ties
        out[static_cast<std::size_t>(it - probs.begin())] = 1.0;
        return out;
    }
    const double inv_t = 1.0 / decoding.temperature();
    std::vector<double> scaled(k);
    for (std::size_t i = 0; i < k; ++i) scaled[i] = probs[i] > 0.0 ? std::pow(probs[i], inv_t) : 0.0;
    double total = std::accumulate(scaled.begin(), scaled.end(), 0.0);
    for (double& s : scaled) s /= total;

    std::vector<std::size_t> order(k);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return scaled[a] > scaled[b]; });
    double mass = 0.0;
    for (std::size_t idx : order) {
        if (scaled[idx] <= 0.0) break;
        out[idx] = scaled[idx];
        mass += scaled[idx];
        if (mass >= decoding.top_p() - 1e-12) break;
    }
    for (double& o : out) o /= mass;
    return out;
}

}  // namespace valign
