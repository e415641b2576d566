#include "valign/csv.hpp"

#include <fmt/format.h>

#include "valign/error.hpp"

namespace valign::csv {

std::optional<Record> Reader::next() {
    for (;;) {
        int c = in_.peek();
        if (c == std::char_traits<char>::eof()) return std::nullopt;
        if (skip_comments_ && c == '#') {
            std::string discard;
            std::getline(in_, discard);
            ++line_;
            continue;
        }
        break;
    }

    record_line_ = line_;
    Record record;
    std::string field;
    bool quoted = false;
    bool field_was_quoted = false;
    for (;;) {
        int c = in_.get();
        if (c == std::char_traits<char>::eof()) {
            if (quoted)
                throw DataError(fmt::format("csv: unterminated quoted field starting on line {}",
                                            record_line_));
            record.push_back(std::move(field));
            return record;
        }
        char ch = static_cast<char>(c);
        if (quoted) {
            if (ch == '"') {
                if (in_.peek() == '"') {
                    in_.get();
                    field.push_back('"');
                } else {
                    quoted = false;
                }
            } else {
                if (ch == '\n') ++line_;
                field.push_back(ch);
            }
            continue;
        }
        switch (ch) {
            case ',':
                record.push_back(std::move(field));
                field.clear();
                field_was_quoted = false;
                break;
            case '"':
                if (field.empty() && !field_was_quoted) {
                    quoted = true;
                    field_was_quoted = true;
                } else {
                    field.push_back(ch);
                }
                break;
            case '\r':
                if (in_.peek() == '\n') in_.get();
                [[fallthrough]];
            case '\n':
                ++line_;
                record.push_back(std::move(field));
                return record;
            default:
                field.push_back(ch);
        }
    }
}

std::string escape(std::string_view field) {
    if (field.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(field);
    std::string out = "\"";
    for (char c : field) {
        if (c == '"') out.push_back('"');
        out.push_back(c);
    }
    out.push_back('"');
    return out;
}

void write_record(std::ostream& out, const Record& record) {
    for (std::size_t i = 0; i < record.size(); ++i) {
        if (i) out << ',';
        out << escape(record[i]);
    }
    out << '\n';
}

std::string trim(std::string_view s) {
    const char* ws = " \t\r\n\v\f";
    auto b = s.find_first_not_of(ws);
    if (b == std::string_view::npos) return {};
    auto e = s.find_last_not_of(ws);
    return std::string(s.substr(b, e - b + 1));
}

}  // namespace valign::csv
