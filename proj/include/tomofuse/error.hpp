#pragma once

#include <stdexcept>
#include <string>

namespace tomofuse {

/// Mismatched array shapes between collaborating objects.
class DimensionError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Invalid or non-finite input values.
class InputError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Malformed file contents. Carries the line (text formats) or byte offset
/// (binary formats) where parsing stopped.
class ParseError : public std::runtime_error {
public:
    ParseError(const std::string& what, long position)
        : std::runtime_error(what + " (at " + std::to_string(position) + ")"), position_(position) {}
    long position() const noexcept { return position_; }

private:
    long position_;
};

/// A numerical procedure could not make progress (line-search failure,
/// degenerate data, empty dataset).
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace tomofuse
