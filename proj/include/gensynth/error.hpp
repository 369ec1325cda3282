// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace gensynth {

/// Base of every exception thrown by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Invalid network document or graph invariant violation. `subject()` names the
/// offending vertex id (or field) when one exists.
class GraphError : public Error {
public:
    enum class Code { Schema, DuplicateId, Cycle, DanglingEdge, Shape, Retention };

    GraphError(Code code, std::string subject, const std::string& what)
        : Error(what), code_(code), subject_(std::move(subject)) {}

    Code code() const noexcept { return code_; }
    const std::string& subject() const noexcept { return subject_; }

private:
    Code code_;
    std::string subject_;
};

class DatasetError : public Error {
public:
    explicit DatasetError(const std::string& what, long line = -1) : Error(what), line_(line) {}
    /// 1-based line number for text inputs, -1 otherwise.
    long line() const noexcept { return line_; }

private:
    long line_;
};

/// Non-finite loss or activation during training/forward.
class DivergenceError : public Error {
public:
    DivergenceError(const std::string& what, int epoch, std::string vertex)
        : Error(what), epoch_(epoch), vertex_(std::move(vertex)) {}
    int epoch() const noexcept { return epoch_; }
    const std::string& vertex() const noexcept { return vertex_; }

private:
    int epoch_;
    std::string vertex_;
};

/// Configuration / checkpoint document problems. `field()` is a dotted path.
class ConfigError : public Error {
public:
    ConfigError(std::string field, const std::string& what)
        : Error(field.empty() ? what : field + ": " + what), field_(std::move(field)) {}
    const std::string& field() const noexcept { return field_; }

private:
    std::string field_;
};

}  // namespace gensynth
