#pragma once

#include <boost/multiprecision/float128.hpp>

namespace ergolab {

/// Extended-precision scalar used where orbits must resolve points far
/// closer to a critical point than a double can (partition construction,
/// critical orbits, order verification).
using Real = boost::multiprecision::float128;

inline double to_double(double x) { return x; }
inline double to_double(const Real& x) { return x.convert_to<double>(); }

}  // namespace ergolab
