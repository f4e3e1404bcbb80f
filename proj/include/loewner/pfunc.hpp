#pragma once

#include <cstddef>
#include <vector>

#include "loewner/common.hpp"
#include "loewner/family.hpp"

namespace loewner {

struct PEvaluation {
  Complex value;
  // Certified bound on the dropped tail (0 for fully-materialized finite
  // families, +infinity when no certificate applies at z).
  double tail_bound = 0.0;
  int order = 0;
};

// The auxiliary rational function of a materialized family,
//   P(z) = z + sum_n 4 b_n / (z - k_n),
// together with its derivatives. All sums are Neumaier-compensated and run in
// ascending-k order, so evaluation is deterministic bit-for-bit.
class PFunction {
 public:
  PFunction(const SlitFamily& family, std::size_t truncation);

  const std::vector<SlitEntry>& entries() const { return entries_; }
  std::size_t truncation() const { return truncation_; }
  double gap() const { return gap_; }

  double k_min() const { return entries_.front().k; }
  double k_max() const { return entries_.back().k; }

  // sum of 4*b over materialized entries.
  double weight_sum4() const { return weight_sum4_; }
  // family tail weight beyond the materialization (sum of b).
  double tail_weight() const { return tail_weight_; }

  double pole_distance(Complex z) const;

  // Derivative of the given order (0..5). Throws EvalError within machine
  // distance of a materialized pole: |z - k_n| < 1e-12 * max(1, |k_n|).
  PEvaluation eval(Complex z, int order = 0) const;

  Complex value(Complex z) const { return eval(z, 0).value; }
  Complex deriv(Complex z, int order = 1) const { return eval(z, order).value; }

  // Real-axis convenience (principal boundary value from above).
  double value_real(double x) const;
  double deriv_real(double x, int order = 1) const;

  // Quotient forms and their pole-separated decompositions. Direct and
  // decomposed sides agree identically off the singular set; the decomposed
  // sides stay finite where the direct quotients degenerate.
  Complex F_direct(Complex z, Complex w) const;
  Complex F_decomposed(Complex z, Complex w) const;
  Complex H_direct(Complex z, Complex l1, Complex l2) const;
  Complex H_decomposed(Complex z, Complex l1, Complex l2) const;
  Complex G_direct(Complex z, Complex l) const;
  Complex G_decomposed(Complex z, Complex l) const;

  // Lower bound on the distance from z to the non-materialized poles; 0 when
  // the certificate fails. Tail poles live outside [k_min - d, k_max + d].
  double tail_pole_distance(Complex z) const;

  // Certified bound on sum over non-materialized standard roots of 1/|P'|.
  // +infinity when the certificate's preconditions fail.
  double tail_root_residue_bound() const;

 private:
  void guard_pole(Complex z) const;

  std::vector<SlitEntry> entries_;
  std::size_t truncation_ = 0;
  double gap_ = 0.0;
  double weight_sum4_ = 0.0;
  double tail_weight_ = 0.0;
  bool finite_complete_ = false;
};

}  // namespace loewner
