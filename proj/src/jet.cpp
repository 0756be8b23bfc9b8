#include "logsym/jet.hpp"

#include <cassert>
#include <cmath>

namespace logsym {

Jet::Jet(std::size_t order, double value) : c_(order + 1, 0.0) { c_[0] = value; }

Jet Jet::variable(std::size_t order, double s) {
  Jet j(order, s);
  if (order >= 1) j.c_[1] = 1.0;
  return j;
}

double Jet::derivative(std::size_t k) const {
  double factorial = 1.0;
  for (std::size_t i = 2; i <= k; ++i) factorial *= static_cast<double>(i);
  return c_[k] * factorial;
}

Jet& Jet::operator+=(const Jet& other) {
  assert(other.c_.size() == c_.size());
  for (std::size_t k = 0; k < c_.size(); ++k) c_[k] += other.c_[k];
  return *this;
}

Jet& Jet::operator-=(const Jet& other) {
  assert(other.c_.size() == c_.size());
  for (std::size_t k = 0; k < c_.size(); ++k) c_[k] -= other.c_[k];
  return *this;
}

Jet& Jet::operator*=(double scalar) {
  for (double& v : c_) v *= scalar;
  return *this;
}

Jet& Jet::operator+=(double scalar) {
  c_[0] += scalar;
  return *this;
}

Jet operator-(double s, const Jet& a) {
  Jet r = -a;
  r.c_[0] += s;
  return r;
}

Jet operator-(const Jet& a) {
  Jet r = a;
  for (double& v : r.c_) v = -v;
  return r;
}

Jet operator*(const Jet& a, const Jet& b) {
  const std::size_t n = a.c_.size();
  Jet r(n - 1, 0.0);
  for (std::size_t k = 0; k < n; ++k) {
    double acc = 0.0;
    for (std::size_t i = 0; i <= k; ++i) acc += a.c_[i] * b.c_[k - i];
    r.c_[k] = acc;
  }
  return r;
}

Jet operator/(const Jet& a, const Jet& b) {
  const std::size_t n = a.c_.size();
  Jet r(n - 1, 0.0);
  for (std::size_t k = 0; k < n; ++k) {
    double acc = a.c_[k];
    for (std::size_t i = 1; i <= k; ++i) acc -= b.c_[i] * r.c_[k - i];
    r.c_[k] = acc / b.c_[0];
  }
  return r;
}

// e' = a' e  =>  k e_k = sum_{i=1..k} i a_i e_{k-i}
Jet exp(const Jet& a) {
  const std::size_t n = a.order() + 1;
  Jet r(n - 1, std::exp(a.value()));
  for (std::size_t k = 1; k < n; ++k) {
    double acc = 0.0;
    for (std::size_t i = 1; i <= k; ++i)
      acc += static_cast<double>(i) * a.coef(i) * r.coef(k - i);
    r.coef(k) = acc / static_cast<double>(k);
  }
  return r;
}

// l' = a'/a  =>  k a_0 l_k = k a_k - sum_{i=1..k-1} i l_i a_{k-i}
Jet log(const Jet& a) {
  const std::size_t n = a.order() + 1;
  Jet r(n - 1, std::log(a.value()));
  for (std::size_t k = 1; k < n; ++k) {
    double acc = static_cast<double>(k) * a.coef(k);
    for (std::size_t i = 1; i < k; ++i)
      acc -= static_cast<double>(i) * r.coef(i) * a.coef(k - i);
    r.coef(k) = acc / (static_cast<double>(k) * a.value());
  }
  return r;
}

}  // namespace logsym
