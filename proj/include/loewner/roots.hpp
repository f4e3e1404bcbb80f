#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "loewner/common.hpp"
#include "loewner/family.hpp"
#include "loewner/pfunc.hpp"

namespace loewner {

// Interval bookkeeping: bounded intervals are indexed 0..m-2; the unbounded
// half-lines use the sentinels below.
inline constexpr int kLeftUnbounded = -1;
inline constexpr int kRightUnbounded = -2;

// A real zero of P with P' < 0 (one per bounded interval at minimum).
struct StandardRoot {
  int interval = 0;
  double lambda = 0.0;
  double p_prime = 0.0;
};

enum class RootCase { ComplexPair, DistinctReal, DoubleRoot, TripleRoot };

std::string to_string(RootCase c);

// Outcome of the exclusive four-way case analysis. standard_roots is exactly
// the lambda-enumeration that enters the expansions: for DistinctReal it
// excludes rho2 (whose reciprocal derivative appears as a separate term), and
// for TripleRoot it excludes rho0 itself (which doubles as the standard root
// of its interval; see coinciding_interval).
struct RootClassification {
  RootCase kind = RootCase::ComplexPair;
  std::vector<StandardRoot> standard_roots;

  // ComplexPair
  Complex beta{0.0, 0.0};
  double psi = 0.0;

  // DistinctReal, labeled so that P'(rho1) > 0 > P'(rho2).
  double rho1 = 0.0, rho2 = 0.0;
  double p_prime_rho1 = 0.0, p_prime_rho2 = 0.0;

  // DoubleRoot / TripleRoot
  double rho0 = 0.0;
  int coinciding_interval = 0;  // TripleRoot: bounded interval of rho0

  int host_interval = 0;  // interval carrying the extra root structure
  // Im beta | |rho1-rho2| | for degenerate kinds, the certified cap on any
  // root separation hiding below the rounding envelope.
  double margin = 0.0;
  bool near_degenerate = false;
  std::string alternative;  // candidate case when near-degenerate
  int upper_zero_count = -1;  // argument-principle count in the upper half-plane
};

// All real roots of one interval scan (used by classify; exposed for tests).
struct IntervalRoots {
  int interval = 0;
  std::vector<double> roots;     // ascending
  std::vector<double> p_primes;  // aligned
  bool degenerate = false;       // a double/triple candidate was detected
  double degenerate_at = 0.0;
  double separation_scale = 0.0;  // rounding-adjusted root-separation estimate
};

// Certified scan of one interval's real roots via the monotone pieces of P
// (P''' < 0 off the poles bounds the critical-point structure).
IntervalRoots scan_interval_roots(const PFunction& P, const Interval& iv, double tol);

// Standard roots across all intervals (P' < 0 at each).
std::vector<StandardRoot> find_standard_roots(const PFunction& P,
                                              const IntervalStructure& intervals,
                                              double tol);

// Argument-principle zero count of P over the rectangle
// [re0,re1] x [im0,im1] in the open upper half-plane (P is analytic there).
// When the bottom edge runs close above the real axis, the phase races a
// full circle within a width comparable to im0 around each real zero or pole
// of P underneath, and such a circle can hide inside one subdivision segment
// of the tracker. Passing the known real-axis abscissas as bottom_breaks
// pre-splits the edge there, which pins each racing circle to a piece
// boundary where it cannot be skipped.
int count_zeros_rect(const PFunction& P, double re0, double re1, double im0,
                     double im1, const std::vector<double>& bottom_breaks = {});

// The exclusive case decision. tol controls the root polish; the
// near-degeneracy threshold is 1e-8 * local scale.
RootClassification classify(const PFunction& P, const IntervalStructure& intervals,
                            double tol = 1e-12);

// Expansion of 1/P into pole terms, with the residue identity (sum = 1).
struct PartialFraction {
  RootCase kind = RootCase::ComplexPair;
  std::vector<StandardRoot> standard_roots;
  std::vector<double> residues;  // 1/P'(lambda_n), aligned, all negative

  // ComplexPair
  Complex beta{0.0, 0.0};
  double psi = 0.0;
  Complex residue_beta{0.0, 0.0};  // 1/P'(beta)
  std::vector<double> alpha;       // |P'(beta)/P'(lambda_n)|

  // DistinctReal
  double rho1 = 0.0, rho2 = 0.0;
  double residue_rho1 = 0.0, residue_rho2 = 0.0;
  double exponent_b = 0.0;          // P'(rho1)/|P'(rho2)|
  std::vector<double> exponent_a;   // P'(rho1)/|P'(lambda_n)|

  // DoubleRoot: lead2/(z-rho0)^2 + residue_rho0/(z-rho0)
  // TripleRoot: lead3/(z-rho0)^3 + coef2/(z-rho0)^2 + residue_rho0/(z-rho0)
  double rho0 = 0.0;
  double lead2 = 0.0, lead3 = 0.0, coef2 = 0.0;
  double residue_rho0 = 0.0;

  double identity_sum = 0.0;       // should equal 1
  double identity_residual = 0.0;  // |identity_sum - 1|
  double identity_bound = 0.0;     // analytic tail + rounding bound
  double expansion_residual = 0.0; // worst |1/P - expansion| at sample points

  Complex expansion(Complex z) const;
};

PartialFraction partial_fraction(const RootClassification& cls, const PFunction& P,
                                 std::uint64_t sample_seed = 0x1d2f3e4cULL);

double verify_residue_identity(const PartialFraction& pf);

// Adjusts entry `adjust` of a finite family (its weight b) so that P acquires
// a double root near rho_seed: 2-dimensional Newton on (P(rho), P'(rho)).
struct TunedFamily {
  SlitFamily family;
  double rho0 = 0.0;
  double b_adjusted = 0.0;
};

TunedFamily tune_double_root(const SlitFamily& base, std::size_t adjust,
                             double rho_seed);

}  // namespace loewner
