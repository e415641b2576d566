#pragma once

#include <stdexcept>
#include <string>

namespace valign {

// Exit codes follow the category: 1 usage, 2 data, 3 backend.
enum class ErrorKind { usage = 1, data = 2, backend = 3 };

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what)
        : std::runtime_error(what), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }
    int exit_code() const noexcept { return static_cast<int>(kind_); }

private:
    ErrorKind kind_;
};

class UsageError : public Error {
public:
    explicit UsageError(const std::string& what) : Error(ErrorKind::usage, what) {}
};

class DataError : public Error {
public:
    explicit DataError(const std::string& what) : Error(ErrorKind::data, what) {}
};

class BackendError : public Error {
public:
    explicit BackendError(const std::string& what) : Error(ErrorKind::backend, what) {}
};

/// Raised when a survey document violates a structural invariant.
/// Carries the offending question id (empty for document-level problems).
class SurveyError : public DataError {
public:
    SurveyError(std::string question_id, const std::string& what)
        : DataError(what), question_id_(std::move(question_id)) {}

    const std::string& question_id() const noexcept { return question_id_; }

private:
    std::string question_id_;
};

/// A raw cell that could not be mapped onto its question's scale.
class RecodeError : public DataError {
public:
    RecodeError(long long raw, std::string question_id, const std::string& what)
        : DataError(what), raw_(raw), question_id_(std::move(question_id)) {}

    long long raw() const noexcept { return raw_; }
    const std::string& question_id() const noexcept { return question_id_; }

private:
    long long raw_;
    std::string question_id_;
};

class EmptyPopulationError : public DataError {
public:
    using DataError::DataError;
};

}  // namespace valign
