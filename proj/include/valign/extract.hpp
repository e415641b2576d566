#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "valign/survey.hpp"

namespace valign {

enum class Outcome { answer, refusal, out_of_range, no_integer_found, ambiguous };

std::string_view to_string(Outcome outcome);
Outcome parse_outcome(std::string_view text);

struct ExtractionResult {
    Outcome outcome = Outcome::no_integer_found;
    long long value = 0;  // answer or out-of-range integer; 0 otherwise

    static ExtractionResult answer(long long v) { return {Outcome::answer, v}; }
    static ExtractionResult out_of_range(long long v) { return {Outcome::out_of_range, v}; }
    static ExtractionResult of(Outcome o) { return {o, 0}; }

    bool ok() const noexcept { return outcome == Outcome::answer; }
    friend bool operator==(const ExtractionResult&, const ExtractionResult&) = default;
};

/// Case-insensitive substring patterns that mark a refusal. Patterns are
/// keyed by language; the "*" key applies to every language.
class RefusalPatterns {
public:
    /// Built-in defaults for en, de and cs.
    static RefusalPatterns defaults();
    /// Plain-text file: one pattern per line, '#' comments, optional
    /// "[lang]" section headers. Lines before any header apply to all
    /// languages.
    static RefusalPatterns load(const std::filesystem::path& path);
    static RefusalPatterns parse(std::string_view text);

    void add(const std::string& language, std::string pattern);
    bool matches(std::string_view text, std::string_view language) const;

private:
    std::map<std::string, std::vector<std::string>, std::less<>> by_language_;
};

/// A maximal run of ASCII digits that is not part of a decimal number,
/// a thousands group or a negative number.
struct IntegerToken {
    std::size_t offset = 0;
    std::size_t length = 0;
    long long value = 0;
};

std::vector<IntegerToken> integer_tokens(std::string_view text);

/// Direct style: the text with surrounding whitespace and punctuation
/// stripped must be one integer. CoT style: the last standalone integer
/// wins. Refusal patterns are checked first in both styles.
ExtractionResult extract_answer(std::string_view text, const Question& question, PromptStyle style,
                                const RefusalPatterns& refusals, std::string_view language = "en");

}  // namespace valign
