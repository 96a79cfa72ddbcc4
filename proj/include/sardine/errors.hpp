#pragma once

#include <stdexcept>

namespace sardine {

// Error taxonomy shared across the toolkit. The CLI maps these onto exit
// codes: usage/domain/shape/format -> 2, numeric -> 3.
struct ShapeError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct DomainError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct FormatError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

} // namespace sardine
