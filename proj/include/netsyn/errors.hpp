#pragma once

#include <stdexcept>
#include <string>

namespace netsyn {

// Bad user input: dimensions, ranges, violated preconditions.
struct InvalidArgument : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// A conic program (or the synthesis it encodes) has no feasible point.
struct Infeasible : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// The solver or a linear-algebra kernel did not converge.
struct NumericalFailure : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// An a-posteriori check disagreed with a certificate we produced ourselves.
struct ConsistencyError : std::logic_error {
    using std::logic_error::logic_error;
};

}  // namespace netsyn
