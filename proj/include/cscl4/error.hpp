#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace cscl4 {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class DimensionError : public Error {
public:
    using Error::Error;
};

class NumericError : public Error {
public:
    using Error::Error;
};

class DegenerateInputError : public Error {
public:
    explicit DegenerateInputError(const std::string& what, long index = -1)
        : Error(what), index_(index) {}
    // Offending sample index, or -1 when not tied to a sample.
    long index() const { return index_; }

private:
    long index_;
};

class SolverError : public Error {
public:
    using Error::Error;
};

class PreconditionError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

class FormatError : public Error {
public:
    FormatError(const std::string& what, std::uint64_t offset)
        : Error(what + " (byte offset " + std::to_string(offset) + ")"), reason_(what), offset_(offset) {}
    std::uint64_t offset() const { return offset_; }
    const std::string& reason() const { return reason_; }

private:
    std::string reason_;
    std::uint64_t offset_;
};

} // namespace cscl4
