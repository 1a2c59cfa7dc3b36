#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace faintedge {

// Bad argument values (ranges, sizes, mismatched dimensions).
class ParameterError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// Malformed or truncated image file. offset() is the byte position where parsing failed.
class FormatError : public std::runtime_error {
public:
    FormatError(const std::string& what, std::size_t offset)
        : std::runtime_error(what + " (at byte " + std::to_string(offset) + ")"), offset_(offset) {}

    std::size_t offset() const noexcept { return offset_; }

private:
    std::size_t offset_;
};

class PreconditionError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

class InternalError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

}  // namespace faintedge
