#pragma once

#include <cstddef>
#include <vector>

#include "loewner/common.hpp"
#include "loewner/flow.hpp"
#include "loewner/koenigs.hpp"
#include "loewner/roots.hpp"

namespace loewner {

enum class ApproachVerdict {
  Spiral,         // unbounded winding about an interior limit
  Radial,         // degenerate spiral: interior limit reached along a fixed direction
  NonTangential,  // meets the axis at an interior angle
  Tangential,     // meets the axis at angle 0 or pi
  Orthogonal,     // meets the axis at angle pi/2
};

const char* verdict_name(ApproachVerdict v);

struct ApproachReport {
  std::size_t slit_index = 0;
  ApproachVerdict verdict = ApproachVerdict::NonTangential;
  // Limiting angle of arg(gamma - limit): against the positive real axis for
  // boundary limits, the approach direction for interior (radial) limits.
  // NaN for a spiral verdict, which has no limiting angle.
  double fitted_angle = 0.0;
  // Heuristic half-width for fitted_angle (spread of the extrapolation
  // stages plus fit residual); not a rigorous bound.
  double confidence = 0.0;
  // Total unwrapped increase of arg(gamma - limit) over the trace.
  double winding = 0.0;
  std::size_t tail_samples = 0;  // samples entering the fit
};

// Extrapolates the tail of arg(gamma - limit) in log(1-t) and classifies the
// approach. The verdict bands use delta = 0.05 rad: an angle inside
// [delta, pi - delta] is non-tangential, outside with a stable trend is
// tangential, and an interior limit yields spiral (winding beyond one full
// turn) or radial. With the optional map the fit uses the known contraction
// rate of the image action, which is considerably sharper than the
// data-driven fallback; pass it whenever available.
//
// Throws EvalError when fewer than 20 tail samples are usable and
// ConvergenceError when the tail does not settle (no angle is guessed).
ApproachReport approach_angle(const Trajectory& traj, Complex limit,
                              const KoenigsMap* map = nullptr);

// omega(z, [a,b], H): harmonic measure of the boundary interval [a,b] seen
// from z in the upper half-plane, (1/pi) arg((z-b)/(z-a)). Always in (0,1).
double harmonic_measure_halfplane(Complex z, double a, double b);

// Harmonic measure of the ray arg w = alpha within the sector
// alpha < arg w < beta, seen from z inside it: (beta - arg z)/(beta - alpha).
// The two edge measures are complementary. Throws EvalError when no branch
// of arg z lies inside the sector.
double harmonic_measure_sector(Complex z, double alpha, double beta);

// Closed-form geometry of the image of h, cross-checked against samples of
// the boundary curve. The closed forms come from the expansion coefficients;
// the measured values re-derive them from the scanned boundary samples plus
// interior probes of h itself, so a coefficient bug upstream surfaces here
// as a discrepancy instead of agreeing with itself.
struct SectorReport {
  RootCase kind = RootCase::ComplexPair;

  // Closed forms. amplitude holds the case-specific headline quantity:
  // the spiral-sector amplitude (conjugate pair), theta1 - theta2 (distinct
  // real), or the slit-free strip width pi (collapse cases).
  double amplitude = 0.0;
  double theta1 = 0.0, theta2 = 0.0;  // bounding ray arguments, distinct real
  double tip_bound = 0.0;             // Q, uniform bound on |Im h(k_n)|
  std::vector<double> im_levels;      // collapse plateau levels, left to right

  // Sample-side measurements of the same quantities.
  double measured_amplitude = 0.0;
  std::vector<double> measured_im_levels;
  double level_discrepancy = 0.0;  // worst |measured - closed| plateau level
  double plateau_spread = 0.0;     // worst within-plateau spread over samples
  double probe_discrepancy = 0.0;  // worst interior h-probe deviation
  bool consistent = false;
};

SectorReport sector_report(const KoenigsMap& map, const RootClassification& cls);

}  // namespace loewner
