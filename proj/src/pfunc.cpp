#include "loewner/pfunc.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace loewner {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();

double factorial(int m) {
  double f = 1.0;
  for (int i = 2; i <= m; ++i) f *= i;
  return f;
}
}  // namespace

PFunction::PFunction(const SlitFamily& family, std::size_t truncation)
    : entries_(family.materialize(truncation)),
      truncation_(truncation),
      gap_(family.gap()),
      tail_weight_(family.tail_weight(truncation)),
      finite_complete_(family.kind() == FamilyKind::Finite) {
  Kahan w;
  for (const auto& e : entries_) w.add(4.0 * e.b);
  weight_sum4_ = w.value();
  if (finite_complete_) tail_weight_ = 0.0;
}

double PFunction::pole_distance(Complex z) const {
  double d = kInf;
  for (const auto& e : entries_) d = std::min(d, std::abs(z - Complex(e.k, 0.0)));
  return d;
}

void PFunction::guard_pole(Complex z) const {
  for (const auto& e : entries_) {
    double lim = 1e-12 * std::max(1.0, std::abs(e.k));
    if (std::abs(z - Complex(e.k, 0.0)) < lim) {
      throw EvalError("evaluation within machine distance of pole k = " +
                      std::to_string(e.k));
    }
  }
}

double PFunction::tail_pole_distance(Complex z) const {
  if (finite_complete_ || tail_weight_ == 0.0) return kInf;
  // Tail poles lie on the real axis outside [k_min - d, k_max + d].
  const double a = k_min() - gap_;
  const double b = k_max() + gap_;
  const double x = z.real(), y = std::abs(z.imag());
  double dl = (x <= a) ? y : std::hypot(x - a, y);
  double dr = (x >= b) ? y : std::hypot(x - b, y);
  return std::min(dl, dr);
}

PEvaluation PFunction::eval(Complex z, int order) const {
  if (order < 0 || order > 5) throw EvalError("derivative order must be 0..5");
  guard_pole(z);

  KahanComplex acc;
  if (order == 0) {
    acc.add(z);
    for (const auto& e : entries_) acc.add(4.0 * e.b / (z - e.k));
  } else {
    if (order == 1) acc.add(Complex(1.0, 0.0));
    const double sign = (order % 2 == 0) ? 1.0 : -1.0;
    const double fact = factorial(order);
    for (const auto& e : entries_) {
      Complex p = z - e.k;
      Complex q = p;
      for (int i = 0; i < order; ++i) q *= p;  // p^(order+1)
      acc.add(sign * fact * 4.0 * e.b / q);
    }
  }

  PEvaluation out;
  out.value = acc.value();
  out.order = order;
  if (tail_weight_ == 0.0) {
    out.tail_bound = 0.0;
  } else {
    double dist = tail_pole_distance(z);
    if (dist <= 0.0) {
      out.tail_bound = kInf;
    } else {
      out.tail_bound =
          4.0 * tail_weight_ * factorial(order) / std::pow(dist, order + 1);
    }
  }
  return out;
}

double PFunction::value_real(double x) const {
  return eval(from_upper(Complex(x, 0.0)), 0).value.real();
}

double PFunction::deriv_real(double x, int order) const {
  return eval(from_upper(Complex(x, 0.0)), order).value.real();
}

Complex PFunction::F_direct(Complex z, Complex w) const {
  return value(z) / ((z - w) * (z - std::conj(w)));
}

Complex PFunction::F_decomposed(Complex z, Complex w) const {
  Complex wb = std::conj(w);
  Complex head = (value(w) / (z - w) - value(wb) / (z - wb)) / (w - wb);
  KahanComplex acc;
  acc.add(head);
  for (const auto& e : entries_) {
    double wk2 = std::norm(w - e.k);
    acc.add(4.0 * e.b / ((z - e.k) * wk2));
  }
  return acc.value();
}

Complex PFunction::H_direct(Complex z, Complex l1, Complex l2) const {
  return value(z) / ((z - l1) * (z - l2));
}

Complex PFunction::H_decomposed(Complex z, Complex l1, Complex l2) const {
  Complex head = (value(l1) / (z - l1) - value(l2) / (z - l2)) / (l1 - l2);
  KahanComplex acc;
  acc.add(head);
  for (const auto& e : entries_) {
    acc.add(4.0 * e.b / ((z - e.k) * (l1 - e.k) * (l2 - e.k)));
  }
  return acc.value();
}

Complex PFunction::G_direct(Complex z, Complex l) const {
  Complex d = z - l;
  return value(z) / (d * d);
}

Complex PFunction::G_decomposed(Complex z, Complex l) const {
  Complex d = z - l;
  KahanComplex acc;
  acc.add(deriv(l, 1) / d);
  acc.add(value(l) / (d * d));
  for (const auto& e : entries_) {
    Complex lk = l - e.k;
    acc.add(4.0 * e.b / ((z - e.k) * lk * lk));
  }
  return acc.value();
}

double PFunction::tail_root_residue_bound() const {
  if (tail_weight_ == 0.0) return 0.0;
  // Non-materialized standard roots hug their nearest tail pole: at a root,
  // |x| = |sum 4b/(x-k)| forces one term to be >= |x| - 8*W/d with
  // W = total 4b-weight, hence |P'| >= x^2/(32 b*) at that root once
  // |x| >= 4 * sigma with sigma = 2 * weight_sum / d. Summing over tail
  // poles (each adjacent to at most two tail intervals) gives the bound.
  const double sigma = 2.0 * (weight_sum4_ + 4.0 * tail_weight_) / gap_;
  const double r = std::min(std::abs(k_min()), std::abs(k_max())) + gap_;
  const double b_out = std::max(entries_.front().b, entries_.back().b);
  if (!(r >= 4.0 * sigma)) return kInf;
  if (!(r * r >= 32.0 * std::max(tail_weight_, b_out))) return kInf;
  return 64.0 * (tail_weight_ + b_out) / (r * r);
}

}  // namespace loewner
