#pragma once

#include <stdexcept>
#include <string>

namespace avex {

struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ParseError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct SplitError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct NotFoundError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct InvalidArgument : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Backend failures carry a retryable flag so the retry loop can tell
// transient transport problems apart from fatal configuration errors.
struct BackendError : std::runtime_error {
    BackendError(const std::string& msg, bool retryable_)
        : std::runtime_error(msg), retryable(retryable_) {}
    bool retryable = false;
};

}  // namespace avex
