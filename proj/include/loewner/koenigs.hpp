#pragma once

#include <cstddef>
#include <vector>

#include "loewner/common.hpp"
#include "loewner/pfunc.hpp"
#include "loewner/roots.hpp"

namespace loewner {

// h-value with a certified bound on the truncation error of the dropped
// slit terms (0 for finite families).
struct HEvaluation {
  Complex value{0.0, 0.0};
  double tail_bound = 0.0;
};

struct TipPoint {
  std::size_t index = 0;  // position in ascending-k order
  double k = 0.0;
  Complex h{0.0, 0.0};  // canonical gauge
  bool truncation_artifact = false;
};

struct ScanSample {
  double x = 0.0;
  Complex h{0.0, 0.0};  // canonical gauge
  // number of structural points (roots and branch points) strictly to the
  // right of x; identifies the Arg plateau the sample sits on
  int branch_flags = 0;
  bool nudged = false;  // x was moved off a structural point
};

// Boundary-image summary. Only the fields of the matching case are set.
struct ScanReport {
  RootCase kind = RootCase::ComplexPair;
  std::vector<ScanSample> samples;

  // conjugate-pair images: logarithmic-spiral slits inside a sector
  double spiral_amplitude = 0.0;  // (sum a_n pi) / cos psi

  // distinct-real-pair images: ray slits around a slit-free sector
  double theta1 = 0.0;     // canonical arg limit as x -> +inf
  double theta2 = 0.0;     // canonical arg limit as x -> -inf
  double amplitude = 0.0;  // theta1 - theta2

  // collapse images: horizontal half-line slits between Im plateaus
  std::vector<double> im_levels;  // plateau values, left to right
  double strip_width = 0.0;       // slit-free horizontal strip (pi)
  double tip_bound = 0.0;         // uniform bound on |Im h(k_n)|
};

// The case-specific univalent map conjugating the flow to a linear action
// on its image: power scaling for the conjugate-pair and distinct-real
// cases, translation for the collapse cases. Values are reported in the raw
// gauge (integration constant zero, lambda factors normalized at z0);
// tip_points and image_boundary_scan apply the canonical gauge that puts
// the boundary image in its reference position.
class KoenigsMap {
 public:
  KoenigsMap(const PFunction& P, const RootClassification& cls,
             const PartialFraction& pf, Complex z0 = Complex(0.0, 1.0));

  RootCase kind() const { return pf_.kind; }
  Complex z0() const { return z0_; }
  const PartialFraction& pf() const { return pf_; }
  const PFunction& P() const { return *P_; }

  // Attracting point of the image action: beta, rho1, or rho0 per case.
  Complex limit_point() const;

  // Raw-gauge h. z in the closed upper half-plane, off the real
  // singularities of the formula (rho1 for the distinct-real case, rho0 for
  // the collapse cases, lambda_n on the boundary). h(beta) = 0 is a regular
  // value. Real z uses the boundary branch Arg(x - s) in {0, pi}.
  HEvaluation eval_h(Complex z) const;

  // h' through the logarithmic-derivative identities h'/h = P'(beta)/P,
  // h'/h = -P'(rho1)/P, h' = 1/P; never by term-wise differentiation.
  Complex eval_h_prime(Complex z) const;

  // Multiplicative gauge factor (conjugate-pair and distinct-real cases):
  // canonical h = factor * raw h. Identity for the conjugate-pair case.
  Complex canonical_factor() const { return canonical_factor_; }
  // Additive gauge shift (collapse cases): canonical h = raw h + shift.
  Complex canonical_shift() const { return canonical_shift_; }
  Complex to_canonical(Complex raw_h) const;

  // Boundary values h(k_n) in the canonical gauge, ascending k.
  std::vector<TipPoint> tip_points() const;

  // Minimum over the sample of Im(e^{-i psi} (z-beta)(z-conj beta) h'/h).
  // Positive margin certifies the spiral invariance of the image.
  // Conjugate-pair case only.
  double spirallike_margin(const std::vector<Complex>& sample) const;

  // Canonical boundary curve on an adaptive grid plus the case summary.
  ScanReport image_boundary_scan(std::size_t grid_points = 512) const;

  // Certified bound on the log-h shift from branch terms dropped at
  // construction because their residue weight is below rounding noise.
  // Included in every eval_h tail bound.
  double dropped_term_bound() const { return dropped_bound_; }

 private:
  const PFunction* P_;
  PartialFraction pf_;
  Complex z0_;

  // precomputed per-lambda data, ascending |lambda|
  struct LambdaTerm {
    double lambda = 0.0;
    double coeff = 0.0;   // a_n (cases 1-2) or A_n (case 3)
    Complex log_at_z0{0.0, 0.0};
  };
  std::vector<LambdaTerm> lambdas_;

  Complex e_ipsi_{1.0, 0.0};        // e^{i psi}
  Complex e_2ipsi_{1.0, 0.0};       // e^{2 i psi}
  Complex log_beta_at_z0_{0.0, 0.0};
  Complex log_betabar_at_z0_{0.0, 0.0};
  Complex p_prime_beta_{0.0, 0.0};
  double a_sum_ = 0.0;  // sum of A_n (collapse cases)
  double b_coeff_ = 0.0;
  double c_coeff_ = 0.0;
  Complex canonical_factor_{1.0, 0.0};
  Complex canonical_shift_{0.0, 0.0};
  double dropped_bound_ = 0.0;

  void guard_formula_singularities(Complex z) const;
  double eval_tail_bound(Complex z) const;
  // log|h| and continuous boundary arg at real x (raw gauge, exact Arg
  // pattern); valid off the structural points.
  Complex boundary_log(double x) const;
  std::vector<double> structural_points() const;
};

}  // namespace loewner
