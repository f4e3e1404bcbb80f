#pragma once

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "loewner/koenigs.hpp"

namespace loewner {

struct TrajectorySample {
  double t = 0.0;
  Complex gamma{0.0, 0.0};  // f(k sqrt(1-t), t)
  double dist_to_limit = 0.0;
};

struct Trajectory {
  std::size_t slit_index = 0;
  double k = 0.0;
  Complex limit{0.0, 0.0};  // attracting point from the classification
  std::vector<TrajectorySample> samples;
  // Continuation failures keep the samples already traced and record why.
  bool complete = true;
  std::string failure;
};

// The flow f(z,t) = h^{-1}(action_t(h((1-t)^{-1/2} z))), where action_t is
// the linear action conjugated to the flow by h: multiplication by
// (1-t)^{P'(beta)/2} (conjugate pair), by (1-t)^{-P'(rho1)/2} (distinct
// real), or translation by (1/2) log(1-t) (collapse cases). At t=0 the
// action is the identity.
class FlowEvaluator {
 public:
  explicit FlowEvaluator(const KoenigsMap& map);

  const KoenigsMap& map() const { return *map_; }

  Complex action(Complex s, double t) const;

  // Newton inversion of h: damped steps, each accepted step must shrink the
  // residual and stay in the closed upper half-plane. Optional waypoints are
  // solved in order before the final target; seed approximately solves the
  // first. Residual target 1e-10 * (1 + |w|). Throws ConvergenceError on
  // step collapse, EvalError when the target sits on the image boundary.
  Complex invert_h(Complex w, Complex seed,
                   const std::vector<Complex>& path = {}) const;

  // Continuation from t'=0 (where f is the identity) along increasing t.
  Complex eval_f(Complex z, double t) const;

  // Tip trajectory gamma_n(t) = f(k_n sqrt(1-t), t), traced by continuing
  // the h-inversion along the image path action_t(h(k_n)). The first grid
  // point must be 0; continuation auto-refines between grid points up to a
  // fixed depth and then reports failure.
  Trajectory trace_tip(std::size_t n, const std::vector<double>& t_grid) const;

  // t_k = 1 - 2^{-k/8} capped at t_max (default cap 1 - 1e-6), prefixed
  // with 0. All asymptotics live at t -> 1^-.
  static std::vector<double> default_t_grid(double t_max = 1.0 - 1e-6);

 private:
  struct Iterate {
    Complex x;
    Complex hx;
    double r;
  };

  Complex newton(Complex seed, Complex w) const;
  Complex continue_w(Complex x, Complex from, Complex to, int depth) const;
  Complex continue_tip(Complex x, Complex s0, double t_from, double t_to,
                       int depth) const;
  Complex eval_f_stage(Complex x, Complex z, double t_from, double t_to,
                       int depth) const;
  Complex tip_entry(Complex s0, double k, double b, Complex q, double t,
                    int depth) const;

  const KoenigsMap* map_;
  Complex exponent_{0.0, 0.0};  // power-action exponent (cases 1-2)
};

struct OdeResult {
  Complex w{0.0, 0.0};
  bool absorbed = false;
  double absorption_time = 0.0;
  std::size_t steps = 0;
};

// Direct adaptive integration of dw/dt = sum 2 b_n / (w - k_n sqrt(1-t))
// from t_start to t_end: embedded Dormand-Prince 5(4) pair with the step
// additionally capped by the distance to the moving driving points.
// Absorption is declared when the trajectory reaches the driving set (the
// step controller stalls within 10*tol of a driving point); a stall away
// from the driving set is a ConvergenceError naming the nearest point.
// truncation 0 means the family default.
OdeResult ode_oracle(const SlitFamily& family, Complex z, double t_end,
                     double tol = 1e-10, double t_start = 0.0,
                     std::size_t truncation = 0);

struct FlowCheckRow {
  Complex z{0.0, 0.0};
  double t = 0.0;
  double value = 0.0;  // measured deviation
  double bound = 0.0;  // acceptance bound it was held to
  bool pass = false;
};

// Cross-validation of the conjugation formula against direct numerics:
// (a) round trip: integrate the ODE from f(z,t) over [0,t], compare to z,
//     bound tol;
// (b) PDE residual d_t f + d_z f * sum 2 b_n/(z - k_n sqrt(1-t)) by central
//     finite differences, bound 1e-5 (finite-difference floor);
// (c) hydrodynamic rows: |w(iy, 0.9) - iy| < 4 sum(b)/y * 1.5 for
//     y in {10, 100, 1000}.
struct FlowReport {
  std::vector<FlowCheckRow> round_trip;
  std::vector<FlowCheckRow> pde_residual;
  std::vector<FlowCheckRow> hydrodynamic;
  double worst_round_trip = 0.0;
  double worst_pde_residual = 0.0;
  bool pass = false;
};

FlowReport validate_flow(const FlowEvaluator& flow,
                         const std::vector<std::pair<Complex, double>>& sample,
                         double tol);

}  // namespace loewner
