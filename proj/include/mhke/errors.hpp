#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace mhke {

/// Base class for every error thrown by this library.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& message) : std::runtime_error(message) {}
};

/// Raised when an operation requires non-empty text and got none.
class EmptyTextError : public Error {
public:
    using Error::Error;
};

/// Two vectors with different dimensions were combined.
class DimensionMismatchError : public Error {
public:
    using Error::Error;
};

/// A remote backend could not be reached or answered with a failure.
class BackendUnavailableError : public Error {
public:
    using Error::Error;
};

/// A remote backend timed out (after the retry budget was spent).
class BackendTimeoutError : public BackendUnavailableError {
public:
    using BackendUnavailableError::BackendUnavailableError;
};

/// The backend returned an empty completion text.
class EmptyCompletionError : public Error {
public:
    using Error::Error;
};

/// A judgment reply contained no integer token.
class UnparseableJudgmentError : public Error {
public:
    using Error::Error;
};

/// A decomposition reply contained neither a subquestion nor a final answer.
class UnparseableDecompositionError : public Error {
public:
    using Error::Error;
};

/// Attempted to append to a frozen case library.
class LibraryFrozenError : public Error {
public:
    using Error::Error;
};

/// Attempted to store a case record that did not succeed.
class RecordNotSuccessfulError : public Error {
public:
    using Error::Error;
};

/// A dataset record is missing a mandatory field or has the wrong shape.
class MalformedDatasetError : public Error {
public:
    MalformedDatasetError(std::size_t record_index, const std::string& message)
        : Error("record " + std::to_string(record_index) + ": " + message),
          record_index_(record_index) {}

    std::size_t record_index() const { return record_index_; }

private:
    std::size_t record_index_ = 0;
};

/// Invalid configuration value or an unusable config/template file.
class ConfigError : public Error {
public:
    using Error::Error;
};

}  // namespace mhke
