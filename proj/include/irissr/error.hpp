#pragma once

#include <stdexcept>
#include <string>

namespace irissr {

// Broad failure classes. The CLI maps each onto its own exit code.
enum class ErrorKind {
    InvalidArgument,
    DimensionMismatch,
    Parse,
    MissingInput,
    Io,
    Backend,
    Data,
};

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what)
        : std::runtime_error(what), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) {
    throw Error(kind, what);
}

inline void require(bool cond, ErrorKind kind, const std::string& what) {
    if (!cond) fail(kind, what);
}

} // namespace irissr
