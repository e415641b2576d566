#pragma once

#include <istream>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

namespace valign::csv {

using Record = std::vector<std::string>;

/// RFC 4180 reader: comma separator, double-quote quoting with "" escapes,
/// CRLF or LF line endings, embedded newlines inside quoted fields.
/// Lines starting with '#' outside quotes are skipped when skip_comments is set.
class Reader {
public:
    explicit Reader(std::istream& in, bool skip_comments = false)
        : in_(in), skip_comments_(skip_comments) {}

    /// Next record, or nullopt at end of input. Throws DataError on an
    /// unterminated quoted field.
    std::optional<Record> next();
    /// 1-based physical line where the last returned record started.
    std::size_t line() const noexcept { return record_line_; }

private:
    std::istream& in_;
    bool skip_comments_;
    std::size_t line_ = 1;
    std::size_t record_line_ = 0;
};

std::string escape(std::string_view field);
void write_record(std::ostream& out, const Record& record);

std::string trim(std::string_view s);

}  // namespace valign::csv
