#pragma once

#include <functional>
#include <string>
#include <vector>

#include "dynrec/tape.hpp"

namespace dynrec {

struct GradCheckResult {
    double max_rel_err = 0.0;
    std::string worst;  // "<leaf>[i]" of the worst coordinate
    bool finite = true;
    std::string failure;  // set when a non-finite value was encountered

    bool ok(double tol) const { return finite && max_rel_err < tol; }
};

// Central-difference check of a scalar-valued computation against the tape's
// analytic gradients. `build` must re-run the forward pass from the current
// leaf values; leaves are perturbed in place.
GradCheckResult grad_check(const std::function<Value()>& build, const std::vector<Value>& leaves,
                           double eps = 1e-5);

}  // namespace dynrec
