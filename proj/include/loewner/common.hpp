#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace loewner {

using Complex = std::complex<double>;

inline constexpr double kPi = 3.14159265358979323846;

// Configuration rejected (bad JSON, invalid slit data, unknown rule).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Evaluation refused (pole proximity, excluded point).
class EvalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// An iteration failed to meet its tolerance (bracketing, Newton, continuation).
class ConvergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Numerical evidence contradicts a structural guarantee; reported, never guessed away.
class InconsistencyError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Neumaier-compensated accumulator. The compensation also yields a cheap
// running bound on the accumulated rounding error (eps * sum of |terms|).
struct Kahan {
  double sum = 0.0;
  double comp = 0.0;
  double abs_sum = 0.0;

  void add(double x) {
    abs_sum += std::abs(x);
    double t = sum + x;
    if (std::abs(sum) >= std::abs(x)) {
      comp += (sum - t) + x;
    } else {
      comp += (x - t) + sum;
    }
    sum = t;
  }

  double value() const { return sum + comp; }

  // Conservative bound on the rounding error of value().
  double error_bound() const {
    return 4.0 * std::numeric_limits<double>::epsilon() * (abs_sum + std::abs(sum));
  }
};

struct KahanComplex {
  Kahan re, im;

  void add(const Complex& z) {
    re.add(z.real());
    im.add(z.imag());
  }

  Complex value() const { return {re.value(), im.value()}; }
  double error_bound() const { return re.error_bound() + im.error_bound(); }
};

// Replaces a signed-zero imaginary part by +0.0 so that boundary evaluations
// take the principal branch from the upper side.
inline Complex from_upper(Complex z) {
  if (z.imag() == 0.0) return {z.real(), +0.0};
  return z;
}

inline double sq(double x) { return x * x; }

}  // namespace loewner
