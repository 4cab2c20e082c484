#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace twoscale {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Parameter or input outside the documented domain.
class DomainError : public Error {
public:
    using Error::Error;
};

// A price component fell below the configured floor, or a division by a
// zero price was requested.
class SingularityError : public Error {
public:
    explicit SingularityError(const std::string& what, std::int64_t step = -1)
        : Error(step < 0 ? what : what + " (step " + std::to_string(step) + ")"),
          step_(step) {}

    std::int64_t step() const noexcept { return step_; }

private:
    std::int64_t step_;
};

class InvariantError : public Error {
public:
    using Error::Error;
};

// Zero variance, all-zero returns and similar inputs that carry no signal.
class DegenerateSeriesError : public Error {
public:
    using Error::Error;
};

// Malformed input files.
class DataError : public Error {
public:
    using Error::Error;
};

}  // namespace twoscale
