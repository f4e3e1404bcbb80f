#include "loewner/flow.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace loewner {

namespace {

std::string describe(Complex z) {
  return "(" + std::to_string(z.real()) + ", " + std::to_string(z.imag()) + ")";
}

}  // namespace

FlowEvaluator::FlowEvaluator(const KoenigsMap& map) : map_(&map) {
  switch (map_->kind()) {
    case RootCase::ComplexPair:
      // P'(beta)/2, complex in general; the real part is positive for
      // admissible families so the action contracts toward h(beta) = 0.
      exponent_ = 0.5 / map_->pf().residue_beta;
      break;
    case RootCase::DistinctReal:
      // -P'(rho1)/2 < 0: the action expands toward the pole of h at rho1.
      exponent_ = Complex(-0.5 / map_->pf().residue_rho1, 0.0);
      break;
    default:
      exponent_ = Complex(0.0, 0.0);
      break;
  }
}

Complex FlowEvaluator::action(Complex s, double t) const {
  if (!(t >= 0.0 && t < 1.0)) throw ConfigError("action time must lie in [0,1)");
  if (t == 0.0) return s;
  const double u = std::log1p(-t);
  if (map_->kind() == RootCase::DoubleRoot || map_->kind() == RootCase::TripleRoot)
    return s + Complex(0.5 * u, 0.0);
  return s * std::exp(exponent_ * u);
}

Complex FlowEvaluator::newton(Complex seed, Complex w, double accept) const {
  const double target = 1e-10 * (1.0 + std::abs(w));
  Iterate cur;
  cur.x = from_upper(seed);
  cur.hx = map_->eval_h(cur.x).value;
  cur.r = std::abs(cur.hx - w);
  for (int it = 0; it < 96 && cur.r > target; ++it) {
    const Complex dh = map_->eval_h_prime(cur.x);
    const double scale = std::max(1.0, std::abs(cur.x));
    if (!(std::abs(dh) > 0.0))
      throw ConvergenceError("h' vanished during inversion near " + describe(cur.x));
    const Complex full = -(cur.hx - w) / dh;
    double alpha = 1.0;
    bool moved = false;
    while (alpha * std::abs(full) >= 1e-14 * scale) {
      const Complex xn = cur.x + alpha * full;
      if (xn.imag() >= 0.0) {
        try {
          const Complex hn = map_->eval_h(from_upper(xn)).value;
          const double rn = std::abs(hn - w);
          if (rn < cur.r) {
            cur = Iterate{from_upper(xn), hn, rn};
            moved = true;
            break;
          }
        } catch (const EvalError&) {
          // step landed on a guarded singularity; damp further
        }
      }
      alpha *= 0.5;
    }
    if (!moved) {
      if (cur.x.imag() <= 1e-12 * scale)
        throw EvalError("inversion ran into the image boundary near " + describe(cur.x));
      throw ConvergenceError("h inversion stalled at " + describe(cur.x));
    }
  }
  if (cur.r > target)
    throw ConvergenceError("h inversion did not converge at target " + describe(w));
  return cur.x;
}

Complex FlowEvaluator::continue_w(Complex x, Complex from, Complex to, int depth) const {
  try {
    return newton(x, to);
  } catch (const ConvergenceError&) {
    if (depth >= 24) throw;
    const Complex mid = 0.5 * (from + to);
    const Complex xm = continue_w(x, from, mid, depth + 1);
    return continue_w(xm, mid, to, depth + 1);
  }
}

Complex FlowEvaluator::invert_h(Complex w, Complex seed,
                                const std::vector<Complex>& path) const {
  Complex x = from_upper(seed);
  Complex from = map_->eval_h(x).value;
  for (const Complex& target : path) {
    x = continue_w(x, from, target, 0);
    from = target;
  }
  return continue_w(x, from, w, 0);
}

Complex FlowEvaluator::eval_f_stage(Complex x, Complex z, double t_from,
                                    double t_to, int depth) const {
  const Complex u = z / std::sqrt(1.0 - t_to);
  const Complex target = action(map_->eval_h(u).value, t_to);
  try {
    return newton(x, target);
  } catch (const ConvergenceError&) {
    if (depth >= 24) throw;
    const double t_mid = 1.0 - std::sqrt((1.0 - t_from) * (1.0 - t_to));
    const Complex xm = eval_f_stage(x, z, t_from, t_mid, depth + 1);
    return eval_f_stage(xm, z, t_mid, t_to, depth + 1);
  }
}

Complex FlowEvaluator::eval_f(Complex z, double t) const {
  if (!(t >= 0.0 && t < 1.0)) throw ConfigError("flow time must lie in [0,1)");
  Complex x = from_upper(z);
  if (t == 0.0) {
    map_->eval_h(x);  // domain check only; f(.,0) is the identity
    return x;
  }
  // Continuation from the identity at t=0, geometric stages in 1-t so the
  // late-time contraction is split evenly on the log scale.
  constexpr int kStages = 16;
  double t_prev = 0.0;
  for (int j = 1; j <= kStages; ++j) {
    const double tj =
        (j == kStages) ? t : 1.0 - std::pow(1.0 - t, double(j) / kStages);
    x = eval_f_stage(x, z, t_prev, tj, 0);
    t_prev = tj;
  }
  return x;
}

Complex FlowEvaluator::continue_tip(Complex x, Complex s0, double t_from,
                                    double t_to, int depth) const {
  const Complex target = action(s0, t_to);
  try {
    return newton(x, target);
  } catch (const ConvergenceError&) {
    if (depth >= 24) throw;
    const double t_mid = 1.0 - std::sqrt((1.0 - t_from) * (1.0 - t_to));
    const Complex xm = continue_tip(x, s0, t_from, t_mid, depth + 1);
    return continue_tip(xm, s0, t_mid, t_to, depth + 1);
  }
}

Complex FlowEvaluator::tip_entry(Complex s0, double k, double b, Complex q,
                                 double t, int depth) const {
  // Local model at the tip: h(z) = s0 + q (z-k)^2 / (8 b) + ..., valid while
  // the displacement stays small against the pole gap. The Im > 0 branch is
  // the one entering the half-plane.
  const Complex w = action(s0, t);
  Complex dz = std::sqrt(8.0 * b * (w - s0) / q);
  if (dz.imag() < 0.0) dz = -dz;
  // Microscopic weights put the model displacement inside the pole guard of
  // P, where h' cannot be evaluated. The Newton target w does not depend on
  // the seed, so lift it to a safe height; the solve then walks wherever
  // the preimage actually is (for such tips, along the boundary).
  const double seed_floor = 1e-10 * std::max(1.0, std::abs(k));
  if (std::abs(dz) < seed_floor) dz = Complex(0.0, seed_floor);
  const double safe = 0.05 * std::min(1.0, map_->P().gap());
  if (std::abs(dz) > safe && depth < 24) {
    const double t_mid = 1.0 - std::sqrt(1.0 - t);
    const Complex xm = tip_entry(s0, k, b, q, t_mid, depth + 1);
    return continue_tip(xm, s0, t_mid, t, 0);
  }
  try {
    return newton(Complex(k, 0.0) + dz, w);
  } catch (const ConvergenceError&) {
    if (depth >= 24) throw;
    const double t_mid = 1.0 - std::sqrt(1.0 - t);
    const Complex xm = tip_entry(s0, k, b, q, t_mid, depth + 1);
    return continue_tip(xm, s0, t_mid, t, 0);
  }
}

Trajectory FlowEvaluator::trace_tip(std::size_t n,
                                    const std::vector<double>& t_grid) const {
  const auto& entries = map_->P().entries();
  if (n >= entries.size()) throw ConfigError("tip index out of range");
  if (t_grid.empty() || t_grid.front() != 0.0)
    throw ConfigError("tip grid must start at t = 0");
  for (std::size_t i = 1; i < t_grid.size(); ++i)
    if (!(t_grid[i] > t_grid[i - 1] && t_grid[i] < 1.0))
      throw ConfigError("tip grid must increase within [0,1)");

  const double k = entries[n].k;
  const double b = entries[n].b;
  const Complex start(k, 0.0);
  const Complex s0 = map_->eval_h(start).value;

  Trajectory traj;
  traj.slit_index = n;
  traj.k = k;
  traj.limit = map_->limit_point();
  traj.samples.push_back({0.0, start, std::abs(start - traj.limit)});

  Complex q;
  switch (map_->kind()) {
    case RootCase::ComplexPair:
      q = s0 / map_->pf().residue_beta;
      break;
    case RootCase::DistinctReal:
      q = -s0 / map_->pf().residue_rho1;
      break;
    default:
      q = Complex(1.0, 0.0);
      break;
  }

  Complex x = start;
  bool interior = false;
  double t_prev = 0.0;
  for (std::size_t j = 1; j < t_grid.size(); ++j) {
    const double t = t_grid[j];
    try {
      x = interior ? continue_tip(x, s0, t_prev, t, 0)
                   : tip_entry(s0, k, b, q, t, 0);
    } catch (const ConvergenceError& e) {
      traj.complete = false;
      traj.failure = e.what();
      break;
    } catch (const EvalError& e) {
      traj.complete = false;
      traj.failure = e.what();
      break;
    }
    interior = true;
    t_prev = t;
    traj.samples.push_back({t, x, std::abs(x - traj.limit)});
  }
  return traj;
}

std::vector<double> FlowEvaluator::default_t_grid(double t_max) {
  if (!(t_max > 0.0 && t_max < 1.0))
    throw ConfigError("t_max must lie in (0,1)");
  std::vector<double> grid{0.0};
  for (int kk = 1;; ++kk) {
    const double t = 1.0 - std::exp2(-kk / 8.0);
    if (t >= t_max) break;
    grid.push_back(t);
  }
  if (grid.back() < t_max) grid.push_back(t_max);
  return grid;
}

namespace {

struct OdeSystem {
  std::vector<SlitEntry> entries;
  double k_abs_max = 0.0;

  Complex rhs(double t, Complex w) const {
    const double root = std::sqrt(1.0 - t);
    KahanComplex sum;
    for (const auto& e : entries) sum.add(2.0 * e.b / (w - e.k * root));
    return sum.value();
  }

  double driving_distance(double t, Complex w) const {
    const double root = std::sqrt(1.0 - t);
    double d = std::numeric_limits<double>::infinity();
    for (const auto& e : entries) d = std::min(d, std::abs(w - e.k * root));
    return d;
  }

  Complex nearest_driving(double t, Complex w) const {
    const double root = std::sqrt(1.0 - t);
    Complex best(0.0, 0.0);
    double d = std::numeric_limits<double>::infinity();
    for (const auto& e : entries) {
      const double dd = std::abs(w - e.k * root);
      if (dd < d) {
        d = dd;
        best = Complex(e.k * root, 0.0);
      }
    }
    return best;
  }
};

}  // namespace

OdeResult ode_oracle(const SlitFamily& family, Complex z, double t_end,
                     double tol, double t_start, std::size_t truncation) {
  if (!(tol > 0.0)) throw ConfigError("ode_oracle: tol must be positive");
  if (!(t_start >= 0.0 && t_end >= t_start && t_end < 1.0))
    throw ConfigError("ode_oracle: need 0 <= t_start <= t_end < 1");
  Complex w = from_upper(z);
  if (w.imag() < 0.0) throw EvalError("ode_oracle: start point below the axis");

  OdeSystem sys;
  sys.entries = family.materialize(truncation == 0 ? family.default_truncation()
                                                   : truncation);
  for (const auto& e : sys.entries)
    sys.k_abs_max = std::max(sys.k_abs_max, std::abs(e.k));

  OdeResult out;
  out.w = w;
  if (t_end == t_start) return out;

  // Dormand-Prince 5(4) tableau.
  static const double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
  static const double a21 = 1.0 / 5;
  static const double a31 = 3.0 / 40, a32 = 9.0 / 40;
  static const double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
  static const double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187,
                      a53 = 64448.0 / 6561, a54 = -212.0 / 729;
  static const double a61 = 9017.0 / 3168, a62 = -355.0 / 33,
                      a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                      a65 = -5103.0 / 18656;
  static const double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192,
                      b5 = -2187.0 / 6784, b6 = 11.0 / 84;
  // y5 - y4 weights of the embedded pair.
  static const double d1 = 71.0 / 57600, d3 = -71.0 / 16695, d4 = 71.0 / 1920,
                      d5 = -17253.0 / 339200, d6 = 22.0 / 525, d7 = -1.0 / 40;

  // Driving points move at |k| / (2 sqrt(1-t)); bounded on [0, t_end].
  const double v_drive = sys.k_abs_max / (2.0 * std::sqrt(1.0 - t_end)) + 1e-30;
  // Interior points are repelled from the driving set (velocity 2b/(w-l)
  // points away from l), so only absorbed trajectories ever reach this
  // radius. It sits above the pole-cap stall scale sqrt(8 * h_floor).
  const double absorb_radius = std::max(10.0 * tol, 1e-7);

  double t = t_start;
  double h = std::min(1e-2, (t_end - t_start) / 4.0);
  const std::size_t max_steps = 500000;

  while (t < t_end) {
    if (out.steps++ > max_steps)
      throw ConvergenceError("ode_oracle: step budget exhausted");

    const double dist = sys.driving_distance(t, w);
    if (dist < absorb_radius) {
      out.absorbed = true;
      out.absorption_time = t;
      out.w = w;
      return out;
    }
    const Complex k1 = sys.rhs(t, w);
    const double speed = std::abs(k1) + v_drive;
    h = std::min({h, t_end - t, 0.25 * dist / speed});
    if (h < 1e-16 * std::max(1.0, t_end)) {
      // Controller stalled away from the driving set: genuine failure.
      throw ConvergenceError(
          "ode_oracle: step collapse at t = " + std::to_string(t) +
          " away from driving set, nearest point " +
          describe(sys.nearest_driving(t, w)));
    }

    const Complex k2 = sys.rhs(t + c2 * h, w + h * (a21 * k1));
    const Complex k3 = sys.rhs(t + c3 * h, w + h * (a31 * k1 + a32 * k2));
    const Complex k4 =
        sys.rhs(t + c4 * h, w + h * (a41 * k1 + a42 * k2 + a43 * k3));
    const Complex k5 = sys.rhs(
        t + c5 * h, w + h * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4));
    const Complex k6 = sys.rhs(
        t + h, w + h * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5));
    const Complex y5 =
        w + h * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
    const Complex k7 = sys.rhs(t + h, y5);
    const Complex err_c =
        h * (d1 * k1 + d3 * k3 + d4 * k4 + d5 * k5 + d6 * k6 + d7 * k7);

    const double tol_step = tol * (1.0 + std::abs(w));
    const double err = std::abs(err_c);
    if (err <= tol_step) {
      t += h;
      w = y5;
      const double grow =
          err > 0.0 ? 0.9 * std::pow(tol_step / err, 0.2) : 5.0;
      h *= std::clamp(grow, 1.0, 5.0);
    } else {
      h *= std::clamp(0.9 * std::pow(tol_step / err, 0.2), 0.1, 0.9);
    }
  }
  out.w = w;
  return out;
}

FlowReport validate_flow(const FlowEvaluator& flow,
                         const std::vector<std::pair<Complex, double>>& sample,
                         double tol) {
  FlowReport rep;
  const PFunction& P = flow.map().P();
  const SlitFamily fam = SlitFamily::finite(P.entries());
  const double weight_sum = P.weight_sum4() / 4.0;

  for (const auto& [z, t] : sample) {
    const Complex fz = flow.eval_f(z, t);

    FlowCheckRow row{z, t, 0.0, tol, false};
    if (t == 0.0) {
      row.value = std::abs(fz - z);
    } else {
      const OdeResult back =
          ode_oracle(fam, fz, t, std::min(tol * 1e-2, 1e-10));
      row.value = back.absorbed ? std::numeric_limits<double>::infinity()
                                : std::abs(back.w - z);
    }
    row.pass = row.value <= row.bound;
    rep.worst_round_trip = std::max(rep.worst_round_trip, row.value);
    rep.round_trip.push_back(row);

    const double dt = std::min({1e-5, t / 2.0, (1.0 - t) / 2.0});
    if (dt > 1e-9) {
      const Complex df_dt =
          (flow.eval_f(z, t + dt) - flow.eval_f(z, t - dt)) / (2.0 * dt);
      const double dx = 1e-5 * std::max(1.0, std::abs(z));
      const Complex df_dz =
          (flow.eval_f(z + dx, t) - flow.eval_f(z - dx, t)) / (2.0 * dx);
      const double root = std::sqrt(1.0 - t);
      KahanComplex drive;
      for (const auto& e : P.entries())
        drive.add(2.0 * e.b / (z - e.k * root));
      FlowCheckRow prow{z, t, std::abs(df_dt + df_dz * drive.value()), 1e-5,
                        false};
      prow.pass = prow.value <= prow.bound;
      rep.worst_pde_residual = std::max(rep.worst_pde_residual, prow.value);
      rep.pde_residual.push_back(prow);
    }
  }

  for (const double y : {10.0, 100.0, 1000.0}) {
    const Complex start(0.0, y);
    const OdeResult fwd = ode_oracle(fam, start, 0.9, 1e-10);
    FlowCheckRow row{start, 0.9, std::abs(fwd.w - start),
                     4.0 * weight_sum / y * 1.5, false};
    row.pass = row.value <= row.bound;
    rep.hydrodynamic.push_back(row);
  }

  rep.pass = true;
  for (const auto* rows : {&rep.round_trip, &rep.pde_residual, &rep.hydrodynamic})
    for (const auto& r : *rows) rep.pass = rep.pass && r.pass;
  return rep;
}

}  // namespace loewner
