#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "valign/extract.hpp"

namespace valign {

struct TurnRecord {
    std::size_t index = 0;  // administration position
    std::string question_id;
    std::string prompt;     // rendered user turn
    std::string raw;        // generation text, verbatim
    ExtractionResult result;
    std::string timestamp;  // UTC, ISO 8601
};

/// Record of one full questionnaire conversation.
struct SessionTranscript {
    std::size_t session_id = 0;
    std::string survey_id;
    nlohmann::json config;  // resolved run configuration snapshot
    std::vector<TurnRecord> records;
    bool complete = false;
    std::string error;      // reason for an incomplete session
};

/// JSON Lines persistence: a "header" line, one "turn" line per question,
/// and a closing "footer" line. A file without a footer, or whose footer
/// says complete=false, is an incomplete session.
class TranscriptWriter {
public:
    TranscriptWriter(const std::filesystem::path& path, std::size_t session_id,
                     const std::string& survey_id, const nlohmann::json& config);

    void append(const TurnRecord& record);
    void finish(bool complete, const std::string& error = {});

private:
    std::ofstream out_;
    std::size_t session_id_;
    std::size_t written_ = 0;
};

std::filesystem::path transcript_path(const std::filesystem::path& dir, std::size_t session_id);

SessionTranscript load_transcript(const std::filesystem::path& path);
/// All session_*.jsonl files in a directory, ordered by session id.
std::vector<SessionTranscript> load_transcripts(const std::filesystem::path& dir);

std::string utc_timestamp();

}  // namespace valign
