#include "logsym/rational.hpp"

#include <cmath>
#include <stdexcept>

namespace logsym {

Rational rational_from_double(double value) {
  if (!std::isfinite(value)) throw std::invalid_argument("non-finite value has no rational form");
  Rational r;
  mpq_set_d(r.get_mpq_t(), value);
  r.canonicalize();
  return r;
}

std::string to_string(const Rational& value) { return value.get_str(); }

}  // namespace logsym
