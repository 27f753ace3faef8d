#pragma once

#include <stdexcept>
#include <string>

namespace resetfree {

// Caller broke a documented precondition (wrong dimensions, out-of-range
// argument, malformed table).  These indicate bugs at the call site, not
// recoverable runtime conditions.
class ContractViolation : public std::logic_error {
public:
    explicit ContractViolation(const std::string& what) : std::logic_error(what) {}
};

// The environment admits no reset-free policy from some required start state,
// so the learning problem is ill-posed and the run cannot proceed.
class InfeasibleEnvironment : public std::runtime_error {
public:
    explicit InfeasibleEnvironment(const std::string& what) : std::runtime_error(what) {}
};

// A rejection-sampling generator exhausted its attempt budget.
class GenerationFailure : public std::runtime_error {
public:
    explicit GenerationFailure(const std::string& what) : std::runtime_error(what) {}
};

// A bracketed scalar search did not reach its target within the given bound.
class SearchBoundError : public std::runtime_error {
public:
    explicit SearchBoundError(const std::string& what) : std::runtime_error(what) {}
};

// Non-finite or otherwise unusable numeric state encountered mid-computation.
class NumericError : public std::runtime_error {
public:
    explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

// Invalid or inconsistent user-supplied configuration (CLI / JSON).
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

} // namespace resetfree
