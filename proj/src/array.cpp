#include "dynrec/array.hpp"

#include <cmath>

namespace dynrec {

bool Array::all_finite() const {
    for (double x : v)
        if (!std::isfinite(x)) return false;
    return true;
}

}  // namespace dynrec
