#pragma once

#include <stdexcept>
#include <string>

namespace itequant {

/// Bad input: malformed tables, out-of-range hypotheses, invalid parameters.
class ValidationError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// File-system or parse failures on external data.
class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace itequant
