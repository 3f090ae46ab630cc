#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace actguard {

class InvalidArgument : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

class UnsupportedFormat : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ParseError : public std::runtime_error {
public:
    ParseError(const std::string& what, std::size_t byte_offset)
        : std::runtime_error(what), byte_offset_(byte_offset) {}
    std::size_t byte_offset() const noexcept { return byte_offset_; }

private:
    std::size_t byte_offset_;
};

class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// The bounded model cannot reach the required validation accuracy.
class ConstraintFailure : public std::runtime_error {
public:
    ConstraintFailure(const std::string& what, double best_accuracy)
        : std::runtime_error(what), best_accuracy_(best_accuracy) {}
    double best_accuracy() const noexcept { return best_accuracy_; }

private:
    double best_accuracy_;
};

}  // namespace actguard
