#pragma once

#include <stdexcept>
#include <string>

namespace polarforge {

/// Bad input: malformed files, out-of-range parameters, mismatched fields.
class ValidationError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// A node, subset-enumeration or trial budget would be exceeded.
class BudgetError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A requested (beta', 1/mu') target or constant set cannot be certified.
class InfeasibleError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace polarforge
