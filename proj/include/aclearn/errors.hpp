#ifndef ACLEARN_ERRORS_HPP
#define ACLEARN_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace aclearn {

// Malformed or out-of-range input: bad files, bad evidence, bad parameters.
class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Impossible evidence in a conditional query (P(E) == 0).
class ImpossibleEvidence : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// A structural invariant of the circuit or network was violated. Always a bug.
class InvariantViolation : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

}  // namespace aclearn

#endif  // ACLEARN_ERRORS_HPP
