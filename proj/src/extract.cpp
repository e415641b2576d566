#include "valign/extract.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <limits>
#include <fstream>
#include <sstream>

#include <fmt/format.h>

#include "valign/csv.hpp"
#include "valign/error.hpp"
#include "valign/log.hpp"

namespace valign {

std::string_view to_string(Outcome outcome) {
    switch (outcome) {
        case Outcome::answer: return "answer";
        case Outcome::refusal: return "refusal";
        case Outcome::out_of_range: return "out_of_range";
        case Outcome::no_integer_found: return "no_integer_found";
        case Outcome::ambiguous: return "ambiguous";
    }
    return "unknown";
}

Outcome parse_outcome(std::string_view text) {
    for (Outcome o : {Outcome::answer, Outcome::refusal, Outcome::out_of_range,
                      Outcome::no_integer_found, Outcome::ambiguous})
        if (to_string(o) == text) return o;
    throw DataError(fmt::format("unknown extraction outcome '{}'", text));
}

namespace {

bool is_digit(char c) { return c >= '0' && c <= '9'; }
bool is_alpha(char c) { return std::isalpha(static_cast<unsigned char>(c)) != 0; }

std::string ascii_lower(std::string_view s) {
    std::string out(s);
    for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
}

}  // namespace

RefusalPatterns RefusalPatterns::defaults() {
    RefusalPatterns p;
    for (const char* s : {"as an ai", "as a language model", "i cannot answer", "i can't answer",
                          "i cannot choose", "i can't choose", "i cannot provide",
                          "i can't provide", "i am unable to", "i'm unable to", "i am not able to",
                          "i'm not able to", "i do not have personal", "i don't have personal",
                          "i cannot give", "i can't give", "i must decline", "i won't answer"})
        p.add("en", s);
    for (const char* s : {"als ki", "als künstliche intelligenz", "als sprachmodell",
                          "ich kann nicht antworten", "ich kann keine", "ich kann diese frage nicht",
                          "ich habe keine persönliche", "ich bin nicht in der lage"})
        p.add("de", s);
    for (const char* s : {"jako ai", "jako umělá inteligence", "jako jazykový model",
                          "nemohu odpovědět", "nemohu vybrat", "nemám osobní",
                          "nejsem schopen", "nejsem schopna"})
        p.add("cs", s);
    return p;
}

RefusalPatterns RefusalPatterns::parse(std::string_view text) {
    RefusalPatterns p;
    std::istringstream in{std::string(text)};
    std::string line;
    std::string section = "*";
    while (std::getline(in, line)) {
        std::string t = csv::trim(line);
        if (t.empty() || t.front() == '#') continue;
        if (t.front() == '[' && t.back() == ']') {
            section = csv::trim(std::string_view(t).substr(1, t.size() - 2));
            if (section.empty()) section = "*";
            continue;
        }
        p.add(section, t);
    }
    return p;
}

RefusalPatterns RefusalPatterns::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError(fmt::format("cannot open refusal pattern file '{}'", path.string()));
    std::stringstream buf;
    buf << in.rdbuf();
    return parse(buf.str());
}

void RefusalPatterns::add(const std::string& language, std::string pattern) {
    if (pattern.empty()) return;
    by_language_[language].push_back(ascii_lower(pattern));
}

bool RefusalPatterns::matches(std::string_view text, std::string_view language) const {
    std::string lowered = ascii_lower(text);
    // Typographic apostrophes are folded so "can’t" matches "can't".
    for (std::size_t pos = 0; (pos = lowered.find("\xE2\x80\x99", pos)) != std::string::npos;)
        lowered.replace(pos, 3, "'");
    auto check = [&](std::string_view key) {
        auto it = by_language_.find(key);
        if (it == by_language_.end()) return false;
        return std::any_of(it->second.begin(), it->second.end(),
                           [&](const std::string& pat) { return lowered.find(pat) != std::string::npos; });
    };
    return check(language) || check("*");
}

std::vector<IntegerToken> integer_tokens(std::string_view text) {
    std::vector<IntegerToken> out;
    const std::size_t n = text.size();
    std::size_t i = 0;
    while (i < n) {
        if (!is_digit(text[i])) {
            ++i;
            continue;
        }
        std::size_t start = i;
        while (i < n && is_digit(text[i])) ++i;
        std::size_t end = i;

        // "3.5" / "3,5" / "1,000": a separator glued to digits on both sides
        // makes the run part of a larger number.
        bool glued_before = start >= 2 && (text[start - 1] == '.' || text[start - 1] == ',') &&
                            is_digit(text[start - 2]);
        bool glued_after = end + 1 < n && (text[end] == '.' || text[end] == ',') &&
                           is_digit(text[end + 1]);
        // A minus sign not preceded by an alphanumeric is a negative sign;
        // "1-4" keeps the 4.
        bool negative = start >= 1 && text[start - 1] == '-' &&
                        (start < 2 || !(is_digit(text[start - 2]) || is_alpha(text[start - 2])));
        if (glued_before || glued_after || negative) {
            // Skip the whole compound number.
            while (i + 1 < n && (text[i] == '.' || text[i] == ',') && is_digit(text[i + 1])) {
                ++i;
                while (i < n && is_digit(text[i])) ++i;
            }
            continue;
        }
        IntegerToken tok{start, end - start, 0};
        auto [ptr, ec] = std::from_chars(text.data() + start, text.data() + end, tok.value);
        if (ec != std::errc()) tok.value = std::numeric_limits<long long>::max();  // overflow
        out.push_back(tok);
    }
    return out;
}

namespace {

bool is_strippable(unsigned char c) {
    return std::isspace(c) || std::ispunct(c);
}

std::string_view strip_punct(std::string_view s) {
    while (!s.empty() && is_strippable(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && is_strippable(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return s;
}

ExtractionResult validate(long long value, const Question& q) {
    return q.scale.contains(value) ? ExtractionResult::answer(value)
                                   : ExtractionResult::out_of_range(value);
}

}  // namespace

ExtractionResult extract_answer(std::string_view text, const Question& question, PromptStyle style,
                                const RefusalPatterns& refusals, std::string_view language) {
    if (refusals.matches(text, language)) {
        log::debug("question '{}': refusal pattern matched", question.id);
        return ExtractionResult::of(Outcome::refusal);
    }
    auto tokens = integer_tokens(text);
    if (tokens.empty()) return ExtractionResult::of(Outcome::no_integer_found);

    if (style == PromptStyle::cot) return validate(tokens.back().value, question);

    if (tokens.size() > 1) return ExtractionResult::of(Outcome::ambiguous);
    std::string_view core = strip_punct(text);
    bool only_digits = !core.empty() && std::all_of(core.begin(), core.end(), is_digit);
    if (!only_digits) return ExtractionResult::of(Outcome::ambiguous);
    return validate(tokens.front().value, question);
}

}  // namespace valign
