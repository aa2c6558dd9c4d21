#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace pathcv {

/// Stable error codes. The numeric values are part of the CLI contract
/// (they are emitted in machine-readable error records) and must not change.
enum class ErrorCode : int {
    invalid_argument = 10,
    degenerate_grid = 11,
    solver_divergence = 12,
    oversize_model = 13,
    selection_failed = 14,
    io_error = 20,
    parse_error = 21,
    config_error = 22,
};

inline std::string_view error_code_name(ErrorCode code)
{
    switch (code) {
        case ErrorCode::invalid_argument: return "invalid_argument";
        case ErrorCode::degenerate_grid: return "degenerate_grid";
        case ErrorCode::solver_divergence: return "solver_divergence";
        case ErrorCode::oversize_model: return "oversize_model";
        case ErrorCode::selection_failed: return "selection_failed";
        case ErrorCode::io_error: return "io_error";
        case ErrorCode::parse_error: return "parse_error";
        case ErrorCode::config_error: return "config_error";
    }
    return "unknown";
}

class Error : public std::runtime_error
{
public:
    Error(ErrorCode code, const std::string& msg)
        : std::runtime_error(msg), code_(code)
    {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

namespace detail {

[[noreturn]] inline void fail(ErrorCode code, const std::string& msg)
{
    throw Error(code, msg);
}

inline void require(bool cond, const std::string& msg)
{
    if (!cond) fail(ErrorCode::invalid_argument, msg);
}

} // namespace detail
} // namespace pathcv
