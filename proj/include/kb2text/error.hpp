#pragma once

#include <stdexcept>
#include <string>

namespace kb2text {

// Base class for all library errors.
struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Invalid argument values (empty corpus, bad config, ...).
struct ArgumentError : Error {
    explicit ArgumentError(const std::string& msg) : Error(msg) {}
};

// Incompatible tensor shapes.
struct ShapeError : Error {
    explicit ShapeError(const std::string& msg) : Error(msg) {}
};

// Index outside a valid range.
struct BoundsError : Error {
    explicit BoundsError(const std::string& msg) : Error(msg) {}
};

// Non-finite values, failed determinism checks, diverged training.
struct NumericError : Error {
    explicit NumericError(const std::string& msg) : Error(msg) {}
};

// File I/O failures.
struct IoError : Error {
    explicit IoError(const std::string& msg) : Error(msg) {}
};

// A required input file (corpus, vocab, checkpoint, ...) does not exist.
struct MissingArtifactError : IoError {
    explicit MissingArtifactError(const std::string& msg) : IoError(msg) {}
};

// A checkpoint was produced against different vocabularies.
struct VocabHashError : Error {
    explicit VocabHashError(const std::string& msg) : Error(msg) {}
};

// Malformed input data; carries the 1-based line number when known.
struct FormatError : Error {
    long line = 0;
    explicit FormatError(const std::string& msg, long line_no = 0)
        : Error(line_no > 0 ? msg + " (line " + std::to_string(line_no) + ")" : msg),
          line(line_no) {}
};

}  // namespace kb2text
