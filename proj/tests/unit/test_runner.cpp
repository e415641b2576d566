#include <doctest.h>

#include <httplib.h>

#include <fstream>
#include <thread>

#include "support.hpp"
#include "valign/error.hpp"
#include "valign/runner.hpp"

using namespace valign;
using nlohmann::json;

namespace {

std::shared_ptr<const Survey> three_questions() {
    json p = {{"en", {{"direct", "Pick 1-4."}, {"cot", "Think, then pick 1-4."}}}};
    json qs = json::array();
    for (const char* id : {"a", "b", "c"}) qs.push_back({{"id", id}, {"scale_min", 1}, {"scale_max", 4}, {"prompts", p}});
    return std::make_shared<const Survey>(validate_survey({{"survey_id", "three"}, {"questions", qs}}));
}

RunConfig config_for(std::shared_ptr<const Survey> s, std::size_t n, DecodingConfig d) {
    RunConfig c;
    c.survey = std::move(s);
    c.decoding = d;
    c.n_sessions = n;
    c.backend = "mock";
    c.model = "m";
    c.retry.initial_backoff = std::chrono::milliseconds(0);
    return c;
}

json scripted(std::vector<std::string> texts) {
    json r = json::array();
    for (std::size_t i = 0; i < texts.size(); ++i) r.push_back({{"question", i}, {"text", texts[i]}});
    return {{"responses", r}};
}

std::vector<Cell> answers(const SessionTranscript& t) {
    std::vector<Cell> out;
    for (const auto& r : t.records) out.push_back(r.result.ok() ? Cell(static_cast<int>(r.result.value)) : Cell());
    return out;
}

const RefusalPatterns refusals = RefusalPatterns::defaults();

}  // namespace

TEST_CASE("run_session: scripted answers and accumulated history") {
    auto s = three_questions();
    MockBackend mock(scripted({"2", "1", "4"}), *s);
    mock.record_requests(true);
    auto t = run_session(config_for(s, 1, DecodingConfig::greedy()), mock, refusals, 0);
    CHECK(t.complete);
    CHECK(answers(t) == std::vector<Cell>{2, 1, 4});
    auto seen = mock.observed(0, 2);
    REQUIRE(seen.size() == 5);
    CHECK(seen[0] == ChatMessage{"user", "Pick 1-4."});
    CHECK(seen[1] == ChatMessage{"assistant", "2"});
    CHECK(seen[3] == ChatMessage{"assistant", "1"});
}

TEST_CASE("run_session: system prompt and refusal") {
    auto s = three_questions();
    MockBackend mock(scripted({"2", "I cannot answer", "4"}), *s);
    mock.record_requests(true);
    auto cfg = config_for(s, 1, DecodingConfig::greedy());
    cfg.system_prompt = "Be a respondent.";
    auto t = run_session(cfg, mock, refusals, 0);
    CHECK(t.complete);
    CHECK(answers(t) == std::vector<Cell>{2, std::nullopt, 4});
    CHECK(t.records[1].result.outcome == Outcome::refusal);
    CHECK(mock.observed(0, 0).front().role == "system");
}

TEST_CASE("run_session: permanent failure leaves a partial transcript") {
    auto s = three_questions();
    json script = scripted({"2", "1", "4"});
    script["failures"] = {{{"session", 0}, {"question", 1}}};
    MockBackend mock(script, *s);
    test::TempDir dir("partial");
    const auto path = dir / "s0.jsonl";
    auto t = run_session(config_for(s, 1, DecodingConfig::greedy()), mock, refusals, 0, &path);
    CHECK_FALSE(t.complete);
    CHECK(t.records.size() == 1);
    CHECK(mock.request_count() == 1 + 4);  // q1 plus max_attempts tries on q2
    auto back = load_transcript(path);
    CHECK_FALSE(back.complete);
    CHECK(back.records.size() == 1);
    CHECK_FALSE(back.error.empty());
}

TEST_CASE("run_session: transient failure is retried") {
    auto s = three_questions();
    json script = scripted({"2", "1", "4"});
    script["failures"] = {{{"session", 0}, {"question", 2}, {"attempts", 2}}};
    MockBackend mock(script, *s);
    auto t = run_session(config_for(s, 1, DecodingConfig::greedy()), mock, refusals, 0);
    CHECK(t.complete);
    CHECK(answers(t) == std::vector<Cell>{2, 1, 4});
}

TEST_CASE("run_batch: counts, resume and validation") {
    auto s = three_questions();
    json script = {{"distributions", {{"a", {0.1, 0.2, 0.3, 0.4}}, {"b", {1, 1, 1, 1}}, {"c", {0, 0, 1, 0}}}}};
    test::TempDir dir("batch");
    {
        MockBackend mock(script, *s);
        auto r = run_batch(config_for(s, 6, DecodingConfig::nucleus(0.95, 1.0)), mock, refusals, dir.path());
        CHECK(r.executed == 6);
    }
    MockBackend mock(script, *s);
    auto r = run_batch(config_for(s, 10, DecodingConfig::nucleus(0.95, 1.0)), mock, refusals, dir.path());
    CHECK(r.executed == 4);
    CHECK(r.skipped == 6);
    CHECK(r.transcripts.size() == 10);
    std::size_t files = 0;
    for (const auto& e : std::filesystem::directory_iterator(dir.path()))
        if (e.path().extension() == ".jsonl") ++files;
    CHECK(files == 10);
    for (std::size_t i = 0; i < 10; ++i) CHECK(std::filesystem::exists(transcript_path(dir.path(), i)));

    MockBackend untouched(script, *s);
    CHECK_THROWS_AS(run_batch(config_for(s, 5, DecodingConfig::greedy()), untouched, refusals, dir.path()),
                    UsageError);
    CHECK(untouched.request_count() == 0);
}

TEST_CASE("run_batch: a changed config refuses to mix into the directory") {
    auto s = three_questions();
    json script = {{"distributions", {{"a", {1, 1, 1, 1}}, {"b", {1, 1, 1, 1}}, {"c", {1, 1, 1, 1}}}}};
    test::TempDir dir("reconf");
    MockBackend mock(script, *s);
    run_batch(config_for(s, 2, DecodingConfig::nucleus(0.9, 1.0)), mock, refusals, dir.path());
    CHECK_THROWS_AS(run_batch(config_for(s, 2, DecodingConfig::nucleus(0.8, 1.0)), mock, refusals, dir.path()),
                    DataError);
}

TEST_CASE("run_batch: aborted sessions raise BatchError") {
    auto s = three_questions();
    json script = {{"distributions", {{"a", {1, 1, 1, 1}}, {"b", {1, 1, 1, 1}}, {"c", {1, 1, 1, 1}}}},
                   {"failures", {{{"session", 1}, {"question", 0}}}}};
    test::TempDir dir("abort");
    MockBackend mock(script, *s);
    try {
        run_batch(config_for(s, 3, DecodingConfig::nucleus(0.9, 1.0)), mock, refusals, dir.path());
        FAIL("expected BatchError");
    } catch (const BatchError& e) {
        CHECK(e.result().aborted == std::vector<std::size_t>{1});
        CHECK(e.exit_code() == 3);
    }
    auto model = transcripts_to_matrix(load_transcripts(dir.path()), *s);
    CHECK(model.matrix.rows() == 2);
    CHECK(model.excluded_incomplete == 1);
}

TEST_CASE("run_batch: results do not depend on concurrency") {
    auto s = three_questions();
    json script = {{"seed", 5}, {"distributions", {{"a", {1, 2, 3, 4}}, {"b", {4, 3, 2, 1}}, {"c", {1, 1, 1, 1}}}}};
    test::TempDir d1("c1"), d4("c4");
    MockBackend m1(script, *s), m4(script, *s);
    auto c1 = config_for(s, 12, DecodingConfig::nucleus(0.9, 0.8));
    auto c4 = c1;
    c4.max_concurrent_sessions = 4;
    auto r1 = run_batch(c1, m1, refusals, d1.path());
    auto r4 = run_batch(c4, m4, refusals, d4.path());
    for (std::size_t i = 0; i < 12; ++i) CHECK(answers(r1.transcripts[i]) == answers(r4.transcripts[i]));
}

TEST_CASE("transcripts_to_matrix") {
    auto s = three_questions();
    std::vector<SessionTranscript> ts;
    for (std::size_t i = 0; i < 3; ++i) {
        MockBackend mock(scripted({"2", i == 1 ? "I cannot answer" : "3", "4"}), *s);
        ts.push_back(run_session(config_for(s, 3, DecodingConfig::nucleus(0.9, 1.0)), mock, refusals, i));
    }
    auto m = transcripts_to_matrix(ts, *s, "x");
    CHECK(m.matrix.rows() == 3);
    CHECK_FALSE(m.matrix.at(1, 1).has_value());
    CHECK(m.outcomes.by_outcome.at(Outcome::refusal) == 1);
    CHECK(m.outcomes.failures() == 1);

    auto single = transcripts_to_matrix({ts[0]}, *s);
    CHECK(single.matrix.rows() == 1);

    ts[2].config["model"] = "other";
    CHECK_THROWS_AS(transcripts_to_matrix(ts, *s), DataError);
    ts.resize(1);
    ts[0].complete = false;
    CHECK_THROWS_AS(transcripts_to_matrix(ts, *s), EmptyPopulationError);
}

TEST_CASE("transcript JSONL round trip and torn files") {
    test::TempDir dir("jsonl");
    const auto path = transcript_path(dir.path(), 7);
    CHECK(path.filename() == "session_00007.jsonl");
    {
        TranscriptWriter w(path, 7, "sv", json{{"model", "m"}});
        w.append({0, "a", "prompt", "raw text", ExtractionResult::answer(3), "t0"});
        w.append({1, "b", "prompt", "nope", ExtractionResult::of(Outcome::no_integer_found), "t1"});
        w.finish(true);
    }
    auto t = load_transcript(path);
    CHECK(t.complete);
    CHECK(t.session_id == 7);
    REQUIRE(t.records.size() == 2);
    CHECK(t.records[0].result == ExtractionResult::answer(3));
    CHECK(t.records[1].raw == "nope");
    // Drop the footer: the session reads back as incomplete.
    std::ifstream in(path);
    std::string header, l1, l2;
    std::getline(in, header);
    std::getline(in, l1);
    std::getline(in, l2);
    in.close();
    std::ofstream(path) << header << '\n' << l1 << '\n' << l2.substr(0, l2.size() / 2);
    auto torn = load_transcript(path);
    CHECK_FALSE(torn.complete);
    CHECK(torn.records.size() == 1);
}

TEST_CASE("decoding configuration") {
    CHECK_THROWS_AS(DecodingConfig::nucleus(0.0, 1.0), UsageError);
    CHECK_THROWS_AS(DecodingConfig::nucleus(1.5, 1.0), UsageError);
    CHECK_THROWS_AS(DecodingConfig::nucleus(0.9, 0.0), UsageError);
    auto d = DecodingConfig::nucleus(0.9, 0.7);
    CHECK(DecodingConfig::from_json(d.to_json()) == d);
    CHECK(DecodingConfig::from_json(DecodingConfig::greedy().to_json()) == DecodingConfig::greedy());
}

TEST_CASE("nucleus filter") {
    const std::vector<double> p{0.1, 0.6, 0.3};
    auto g = nucleus_filter(p, DecodingConfig::greedy());
    CHECK(g == std::vector<double>{0.0, 1.0, 0.0});
    auto top = nucleus_filter(p, DecodingConfig::nucleus(0.5, 1.0));
    CHECK(top == std::vector<double>{0.0, 1.0, 0.0});
    auto two = nucleus_filter(p, DecodingConfig::nucleus(0.85, 1.0));
    CHECK(two[0] == 0.0);
    CHECK(two[1] == doctest::Approx(2.0 / 3.0));
    auto all = nucleus_filter(p, DecodingConfig::nucleus(1.0, 1.0));
    CHECK(all[0] == doctest::Approx(0.1));
    auto sharp = nucleus_filter(p, DecodingConfig::nucleus(1.0, 0.5));
    CHECK(sharp[1] == doctest::Approx(0.36 / (0.01 + 0.36 + 0.09)));
}

TEST_CASE("chat wire format") {
    std::vector<ChatMessage> msgs{{"user", "hi"}};
    auto greedy = chat_request_body("m", msgs, DecodingConfig::greedy());
    CHECK(greedy["model"] == "m");
    CHECK(greedy["temperature"] == 0.0);
    CHECK_FALSE(greedy.contains("top_p"));
    CHECK(greedy["messages"][0]["content"] == "hi");
    auto nuc = chat_request_body("m", msgs, DecodingConfig::nucleus(0.9, 0.7));
    CHECK(nuc["top_p"] == 0.9);
    CHECK(nuc["temperature"] == 0.7);
    CHECK(parse_chat_response(json{{"choices", {{{"message", {{"content", "3"}}}}}}}) == "3");
    CHECK_THROWS_AS(parse_chat_response(json{{"choices", json::array()}}), TransportError);
}

TEST_CASE("http backend against a local server") {
    httplib::Server server;
    json last_body;
    std::string last_auth;
    int calls = 0;
    server.Post("/v1/chat/completions", [&](const httplib::Request& req, httplib::Response& res) {
        ++calls;
        last_body = json::parse(req.body);
        last_auth = req.get_header_value("Authorization");
        const std::string content = last_body["messages"].back()["content"];
        if (content == "busy") {
            res.status = 429;
            return;
        }
        if (content == "bad") {
            res.status = 400;
            return;
        }
        res.set_content(json{{"choices", {{{"message", {{"role", "assistant"}, {"content", "4"}}}}}}}.dump(),
                        "application/json");
    });
    const int port = server.bind_to_any_port("127.0.0.1");
    std::thread worker([&] { server.listen_after_bind(); });
    server.wait_until_ready();

    HttpChatBackend backend({fmt::format("http://127.0.0.1:{}/v1/chat/completions", port), "secret",
                             std::chrono::milliseconds(5000)});
    std::vector<ChatMessage> msgs{{"user", "q"}};
    CompletionRequest req;
    req.model = "m";
    req.messages = msgs;
    req.decoding = DecodingConfig::nucleus(0.9, 1.0);
    CHECK(backend.complete(req) == "4");
    CHECK(last_auth == "Bearer secret");
    CHECK(last_body["top_p"] == 0.9);

    std::vector<ChatMessage> busy{{"user", "busy"}};
    req.messages = busy;
    try {
        backend.complete(req);
        FAIL("expected TransportError");
    } catch (const TransportError& e) {
        CHECK(e.retryable());
    }
    std::vector<ChatMessage> bad{{"user", "bad"}};
    req.messages = bad;
    try {
        backend.complete(req);
        FAIL("expected TransportError");
    } catch (const TransportError& e) {
        CHECK_FALSE(e.retryable());
    }
    server.stop();
    worker.join();
    CHECK(calls == 3);
}
