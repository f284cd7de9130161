#pragma once

#include <stdexcept>
#include <string>

namespace gfpcc {

// Process exit codes used by the command-line tool. Each error family maps to
// its own code so scripts can tell a bad config apart from a diverged run.
enum class ExitCode : int {
    ok = 0,
    failure = 1,
    usage = 2,
    data = 3,
    diverged = 4,
    aggregation = 5,
    io = 6,
};

class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what, ExitCode code = ExitCode::failure)
        : std::runtime_error(what), code_(code) {}

    ExitCode code() const noexcept { return code_; }

private:
    ExitCode code_;
};

class ConfigError : public Error {
public:
    explicit ConfigError(const std::string& what) : Error(what, ExitCode::usage) {}
};

class DataError : public Error {
public:
    explicit DataError(const std::string& what) : Error(what, ExitCode::data) {}
};

class ParseError : public DataError {
public:
    ParseError(const std::string& what, std::size_t line)
        : DataError(what + " (line " + std::to_string(line) + ")"), line_(line) {}

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

class TrainingDiverged : public Error {
public:
    explicit TrainingDiverged(const std::string& what) : Error(what, ExitCode::diverged) {}
};

class AggregationError : public Error {
public:
    explicit AggregationError(const std::string& what) : Error(what, ExitCode::aggregation) {}
};

class IoError : public Error {
public:
    explicit IoError(const std::string& what) : Error(what, ExitCode::io) {}
};

}  // namespace gfpcc
