#include "valign/transcript.hpp"

#include <algorithm>
#include <chrono>
#include <ctime>

#include <fmt/format.h>

#include "valign/error.hpp"

namespace valign {

using nlohmann::json;

std::string utc_timestamp() {
    using namespace std::chrono;
    const auto now = system_clock::now();
    const auto ms = duration_cast<milliseconds>(now.time_since_epoch()) % 1000;
    std::time_t t = system_clock::to_time_t(now);
    std::tm tm{};
    gmtime_r(&t, &tm);
    return fmt::format("{:04}-{:02}-{:02}T{:02}:{:02}:{:02}.{:03}Z", tm.tm_year + 1900, tm.tm_mon + 1,
                       tm.tm_mday, tm.tm_hour, tm.tm_min, tm.tm_sec, ms.count());
}

std::filesystem::path transcript_path(const std::filesystem::path& dir, std::size_t session_id) {
    return dir / fmt::format("session_{:05}.jsonl", session_id);
}

TranscriptWriter::TranscriptWriter(const std::filesystem::path& path, std::size_t session_id,
                                   const std::string& survey_id, const json& config)
    : out_(path, std::ios::binary | std::ios::trunc), session_id_(session_id) {
    if (!out_) throw DataError(fmt::format("cannot write transcript '{}'", path.string()));
    json header = {{"kind", "header"},
                   {"session_id", session_id},
                   {"survey_id", survey_id},
                   {"config", config}};
    out_ << header.dump() << '\n';
    out_.flush();
}

void TranscriptWriter::append(const TurnRecord& r) {
    json line = {{"kind", "turn"},
                 {"session_id", session_id_},
                 {"index", r.index},
                 {"question_id", r.question_id},
                 {"prompt", r.prompt},
                 {"raw", r.raw},
                 {"outcome", to_string(r.result.outcome)},
                 {"timestamp", r.timestamp}};
    if (r.result.outcome == Outcome::answer || r.result.outcome == Outcome::out_of_range)
        line["value"] = r.result.value;
    else
        line["value"] = nullptr;
    out_ << line.dump() << '\n';
    out_.flush();
    ++written_;
}

void TranscriptWriter::finish(bool complete, const std::string& error) {
    json footer = {{"kind", "footer"},
                   {"session_id", session_id_},
                   {"complete", complete},
                   {"n_records", written_}};
    footer["error"] = error.empty() ? json(nullptr) : json(error);
    out_ << footer.dump() << '\n';
    out_.flush();
}

SessionTranscript load_transcript(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError(fmt::format("cannot open transcript '{}'", path.string()));
    SessionTranscript t;
    bool have_header = false;
    std::string line;
    std::size_t lineno = 0;
    try {
        while (std::getline(in, line)) {
            ++lineno;
            if (line.empty()) continue;
            json j;
            try {
                j = json::parse(line);
            } catch (const json::parse_error&) {
                // A torn final line from an interrupted run leaves the session incomplete.
                t.complete = false;
                t.error = fmt::format("unparseable line {}", lineno);
                break;
            }
            const std::string kind = j.at("kind").get<std::string>();
            if (kind == "header") {
                t.session_id = j.at("session_id").get<std::size_t>();
                t.survey_id = j.at("survey_id").get<std::string>();
                t.config = j.at("config");
                have_header = true;
            } else if (kind == "turn") {
                TurnRecord r;
                r.index = j.at("index").get<std::size_t>();
                r.question_id = j.at("question_id").get<std::string>();
                r.prompt = j.at("prompt").get<std::string>();
                r.raw = j.at("raw").get<std::string>();
                r.result.outcome = parse_outcome(j.at("outcome").get<std::string>());
                if (!j.at("value").is_null()) r.result.value = j.at("value").get<long long>();
                r.timestamp = j.value("timestamp", "");
                t.records.push_back(std::move(r));
            } else if (kind == "footer") {
                t.complete = j.at("complete").get<bool>();
                if (!j.at("error").is_null()) t.error = j.at("error").get<std::string>();
            }
        }
    } catch (const json::exception& e) {
        throw DataError(fmt::format("transcript '{}' line {}: {}", path.string(), lineno, e.what()));
    }
    if (!have_header) throw DataError(fmt::format("transcript '{}' has no header", path.string()));
    return t;
}

std::vector<SessionTranscript> load_transcripts(const std::filesystem::path& dir) {
    if (!std::filesystem::is_directory(dir))
        throw DataError(fmt::format("transcript directory '{}' does not exist", dir.string()));
    std::vector<SessionTranscript> out;
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
        const auto name = entry.path().filename().string();
        if (entry.is_regular_file() && name.starts_with("session_") && name.ends_with(".jsonl"))
            out.push_back(load_transcript(entry.path()));
    }
    std::sort(out.begin(), out.end(),
              [](const auto& a, const auto& b) { return a.session_id < b.session_id; });
    return out;
}

}  // namespace valign
