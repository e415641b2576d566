#include <cmath>
#include <fstream>
#include <numeric>

#include <fmt/format.h>

#include "valign/backend.hpp"

namespace valign {

using nlohmann::json;

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

// Uniform in [0, 1) from a counter-based hash so draws do not depend on
// scheduling order across concurrent sessions.
double uniform_at(std::uint64_t seed, std::size_t session, std::size_t question, std::size_t attempt) {
    std::uint64_t h = splitmix64(seed);
    h = splitmix64(h ^ static_cast<std::uint64_t>(session));
    h = splitmix64(h ^ (static_cast<std::uint64_t>(question) << 20));
    h = splitmix64(h ^ (static_cast<std::uint64_t>(attempt) << 40));
    return static_cast<double>(h >> 11) * 0x1.0p-53;
}

std::string render(const std::string& tmpl, int answer) {
    std::string out = tmpl;
    const std::string key = "{answer}";
    for (std::size_t pos = 0; (pos = out.find(key, pos)) != std::string::npos;) {
        std::string v = std::to_string(answer);
        out.replace(pos, key.size(), v);
        pos += v.size();
    }
    return out;
}

}  // namespace

MockBackend::MockBackend(const json& script, const Survey& survey, std::optional<std::uint64_t> seed)
    : survey_(survey) {
    try {
        seed_ = seed ? *seed : script.value("seed", std::uint64_t{0});
        direct_template_ = script.value("direct_template", direct_template_);
        cot_template_ = script.value("cot_template", cot_template_);

        for (const json& r : script.value("responses", json::array())) {
            Scripted s;
            if (r.contains("session")) s.session = r.at("session").get<std::size_t>();
            if (r.contains("question")) s.question = r.at("question").get<std::size_t>();
            if (r.contains("question_id")) {
                auto idx = survey.index_of(r.at("question_id").get<std::string>());
                if (!idx)
                    throw DataError(fmt::format("mock script: unknown question id '{}'",
                                                r.at("question_id").get<std::string>()));
                s.question = *idx;
            }
            if (r.contains("style")) s.style = parse_prompt_style(r.at("style").get<std::string>());
            s.text = r.at("text").get<std::string>();
            responses_.push_back(std::move(s));
        }

        const json distributions = script.value("distributions", json::object());
        for (const auto& [qid, probs] : distributions.items()) {
            auto idx = survey.index_of(qid);
            if (!idx) throw DataError(fmt::format("mock script: unknown question id '{}'", qid));
            auto p = probs.get<std::vector<double>>();
            const Scale& scale = survey.question(*idx).scale;
            if (p.size() != static_cast<std::size_t>(scale.size()))
                throw DataError(fmt::format("mock script: distribution for '{}' has {} entries, "
                                            "scale has {}",
                                            qid, p.size(), scale.size()));
            double total = std::accumulate(p.begin(), p.end(), 0.0);
            if (!(total > 0.0) || std::any_of(p.begin(), p.end(), [](double x) { return x < 0.0; }))
                throw DataError(fmt::format("mock script: distribution for '{}' is not a valid "
                                            "probability vector",
                                            qid));
            for (double& x : p) x /= total;
            distributions_.emplace(qid, std::move(p));
        }

        for (const json& f : script.value("failures", json::array()))
            failures_.push_back({f.at("session").get<std::size_t>(), f.at("question").get<std::size_t>(),
                                 f.value("attempts", -1L)});
    } catch (const json::exception& e) {
        throw DataError(fmt::format("malformed mock script: {}", e.what()));
    }
}

std::unique_ptr<MockBackend> MockBackend::from_file(const std::filesystem::path& path,
                                                    const Survey& survey,
                                                    std::optional<std::uint64_t> seed) {
    std::ifstream in(path);
    if (!in) throw DataError(fmt::format("cannot open mock script '{}'", path.string()));
    json script;
    try {
        script = json::parse(in);
    } catch (const json::parse_error& e) {
        throw DataError(fmt::format("mock script '{}' is not valid JSON: {}", path.string(), e.what()));
    }
    return std::make_unique<MockBackend>(script, survey, seed);
}

std::optional<std::string> MockBackend::scripted_text(const CompletionRequest& request) const {
    const Scripted* best = nullptr;
    int best_score = -1;
    for (const auto& s : responses_) {
        if (s.session && *s.session != request.session_index) continue;
        if (s.question && *s.question != request.question_index) continue;
        if (s.style && *s.style != request.style) continue;
        int score = (s.session ? 4 : 0) + (s.question ? 2 : 0) + (s.style ? 1 : 0);
        if (score > best_score) {
            best = &s;
            best_score = score;
        }
    }
    if (!best) return std::nullopt;
    return best->text;
}

int MockBackend::sample_answer(const CompletionRequest& request) const {
    const Question& q = survey_.question(request.question_index);
    auto it = distributions_.find(q.id);
    if (it == distributions_.end())
        throw TransportError(fmt::format("mock: no scripted response for session {} question '{}'",
                                         request.session_index, q.id),
                             false);
    std::vector<double> law = nucleus_filter(it->second, request.decoding);
    double u = uniform_at(seed_, request.session_index, request.question_index, request.attempt);
    double cum = 0.0;
    std::size_t last_positive = 0;
    for (std::size_t i = 0; i < law.size(); ++i) {
        if (law[i] <= 0.0) continue;
        last_positive = i;
        cum += law[i];
        if (u < cum) return q.scale.min + static_cast<int>(i);
    }
    return q.scale.min + static_cast<int>(last_positive);
}

std::string MockBackend::complete(const CompletionRequest& request) {
    {
        std::lock_guard lock(mutex_);
        ++requests_;
        if (record_)
            observed_[{request.session_index, request.question_index}] =
            std::vector<ChatMessage>(request.messages.begin(), request.messages.end());
    }
    for (const auto& f : failures_) {
        if (f.session != request.session_index || f.question != request.question_index) continue;
        if (f.attempts < 0 || static_cast<long>(request.attempt) < f.attempts)
            throw TransportError(fmt::format("mock: injected failure at session {} question {}",
                                             f.session, f.question),
                                 true);
    }
    if (request.question_index >= survey_.size())
        throw TransportError("mock: question index beyond survey", false);
    if (auto text = scripted_text(request)) return *text;
    int answer = sample_answer(request);
    return render(request.style == PromptStyle::direct ? direct_template_ : cot_template_, answer);
}

std::vector<ChatMessage> MockBackend::observed(std::size_t session, std::size_t question) const {
    std::lock_guard lock(mutex_);
    auto it = observed_.find({session, question});
    return it == observed_.end() ? std::vector<ChatMessage>{} : it->second;
}

std::size_t MockBackend::request_count() const {
    std::lock_guard lock(mutex_);
    return requests_;
}

}  // namespace valign
