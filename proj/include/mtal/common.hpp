#pragma once

#include <stdexcept>
#include <string>

namespace mtal {

// Thrown when an input violates a documented precondition.
class validation_error : public std::invalid_argument {
public:
    explicit validation_error(const std::string& what) : std::invalid_argument(what) {}
};

// Thrown when an operation is asked for a configuration it does not support
// (as opposed to a malformed input).
class unsupported_error : public std::logic_error {
public:
    explicit unsupported_error(const std::string& what) : std::logic_error(what) {}
};

inline void require(bool cond, const std::string& message) {
    if (!cond) throw validation_error(message);
}

} // namespace mtal
