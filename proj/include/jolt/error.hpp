#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace jolt {

/// Domain error categories. Every failure surfaced by the library carries one.
enum class ErrorCode {
    SyntaxError,
    AmbiguousColumn,
    UnknownColumn,
    UnknownTable,
    Unsupported,
    DbError,
    DbUnavailable,
    SpanMisaligned,
    SequenceTooLong,
    InvalidSegmentation,
    ShapeMismatch,
    EmptyRow,
    NoMarkers,
    EmptyQuery,
    MissingCacheEntry,
    DuplicateCacheEntry,
    DegenerateExample,
    EmptyPrediction,
    NonFiniteLoss,
    LengthMismatch,
    DegenerateLabels,
    ConfigError,
    IoError,
    FormatError,
};

const char* to_string(ErrorCode code) noexcept;

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what) : std::runtime_error(format(code, what)), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    static std::string format(ErrorCode code, const std::string& what) { return std::string(to_string(code)) + ": " + what; }

    ErrorCode code_;
};

/// Parse failure with the byte offset of the offending token.
class SyntaxError : public Error {
public:
    SyntaxError(std::size_t offset, const std::string& what)
        : Error(ErrorCode::SyntaxError, "at offset " + std::to_string(offset) + ": " + what), offset_(offset) {}

    std::size_t offset() const noexcept { return offset_; }

private:
    std::size_t offset_;
};

inline const char* to_string(ErrorCode code) noexcept {
    switch (code) {
        case ErrorCode::SyntaxError: return "SyntaxError";
        case ErrorCode::AmbiguousColumn: return "AmbiguousColumn";
        case ErrorCode::UnknownColumn: return "UnknownColumn";
        case ErrorCode::UnknownTable: return "UnknownTable";
        case ErrorCode::Unsupported: return "Unsupported";
        case ErrorCode::DbError: return "DbError";
        case ErrorCode::DbUnavailable: return "DbUnavailable";
        case ErrorCode::SpanMisaligned: return "SpanMisaligned";
        case ErrorCode::SequenceTooLong: return "SequenceTooLong";
        case ErrorCode::InvalidSegmentation: return "InvalidSegmentation";
        case ErrorCode::ShapeMismatch: return "ShapeMismatch";
        case ErrorCode::EmptyRow: return "EmptyRow";
        case ErrorCode::NoMarkers: return "NoMarkers";
        case ErrorCode::EmptyQuery: return "EmptyQuery";
        case ErrorCode::MissingCacheEntry: return "MissingCacheEntry";
        case ErrorCode::DuplicateCacheEntry: return "DuplicateCacheEntry";
        case ErrorCode::DegenerateExample: return "DegenerateExample";
        case ErrorCode::EmptyPrediction: return "EmptyPrediction";
        case ErrorCode::NonFiniteLoss: return "NonFiniteLoss";
        case ErrorCode::LengthMismatch: return "LengthMismatch";
        case ErrorCode::DegenerateLabels: return "DegenerateLabels";
        case ErrorCode::ConfigError: return "ConfigError";
        case ErrorCode::IoError: return "IoError";
        case ErrorCode::FormatError: return "FormatError";
    }
    return "Error";
}

}  // namespace jolt
