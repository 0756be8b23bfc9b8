#pragma once

#include <cstddef>
#include <vector>

namespace logsym {

// Truncated Taylor series in one variable: coef(k) = f^(k)(s) / k!.
class Jet {
 public:
  Jet(std::size_t order, double value);

  /// The identity jet t ↦ s + t, used to seed a univariate derivative computation.
  static Jet variable(std::size_t order, double s);

  std::size_t order() const { return c_.size() - 1; }
  double coef(std::size_t k) const { return c_[k]; }
  double& coef(std::size_t k) { return c_[k]; }
  double value() const { return c_[0]; }

  /// k-th derivative, i.e. coef(k) * k!.
  double derivative(std::size_t k) const;

  Jet& operator+=(const Jet& other);
  Jet& operator-=(const Jet& other);
  Jet& operator*=(double scalar);
  Jet& operator+=(double scalar);

  friend Jet operator+(Jet a, const Jet& b) { return a += b; }
  friend Jet operator-(Jet a, const Jet& b) { return a -= b; }
  friend Jet operator*(Jet a, double s) { return a *= s; }
  friend Jet operator*(double s, Jet a) { return a *= s; }
  friend Jet operator+(Jet a, double s) { return a += s; }
  friend Jet operator+(double s, Jet a) { return a += s; }
  friend Jet operator-(double s, const Jet& a);
  friend Jet operator-(const Jet& a);
  friend Jet operator*(const Jet& a, const Jet& b);
  friend Jet operator/(const Jet& a, const Jet& b);

 private:
  std::vector<double> c_;
};

Jet exp(const Jet& a);
Jet log(const Jet& a);

}  // namespace logsym
