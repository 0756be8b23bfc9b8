#pragma once

#include <gmpxx.h>

#include <string>

namespace logsym {

using Rational = mpq_class;

/// Exact conversion: every finite double is a dyadic rational.
Rational rational_from_double(double value);

/// "p" or "p/q" in lowest terms.
std::string to_string(const Rational& value);

inline double to_double(const Rational& value) { return value.get_d(); }

inline bool is_zero(const Rational& value) { return sgn(value) == 0; }

}  // namespace logsym
