#include "loewner/koenigs.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace loewner {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Principal log of the normalized factor (z - s)/(z0 - s). Both numerator
// and denominator have Arg in [0, pi] (z closed upper, z0 interior), so the
// difference of principal logs equals the principal log of the ratio and
// never wraps.
Complex log_ratio(Complex z, double s, Complex log_at_z0) {
  return std::log(z - s) - log_at_z0;
}

}  // namespace

KoenigsMap::KoenigsMap(const PFunction& P, const RootClassification& cls,
                       const PartialFraction& pf, Complex z0)
    : P_(&P), pf_(pf), z0_(z0) {
  if (!(z0.imag() > 0.0)) {
    throw ConfigError("base point must lie in the open upper half-plane");
  }
  if (cls.kind != pf_.kind) {
    throw ConfigError("classification and expansion disagree on the case");
  }

  lambdas_.reserve(pf_.standard_roots.size());
  for (std::size_t i = 0; i < pf_.standard_roots.size(); ++i) {
    LambdaTerm t;
    t.lambda = pf_.standard_roots[i].lambda;
    switch (pf_.kind) {
      case RootCase::ComplexPair:
        t.coeff = pf_.alpha[i];
        break;
      case RootCase::DistinctReal:
        t.coeff = pf_.exponent_a[i];
        break;
      default:
        t.coeff = pf_.residues[i];
        break;
    }
    t.log_at_z0 = std::log(z0_ - t.lambda);
    lambdas_.push_back(t);
  }
  // Two kinds of term are dropped with a certified remainder. Residue
  // weights below 1e-20 cannot move any log above rounding noise:
  // |log(z - lambda)| plus its z0 normalization stays below ~7.5e2 over
  // the whole representable range, so such a term shifts log h by under
  // 8e2 |coeff|. And a root whose distance to its pole is inside the
  // rounding width of that pole describes a slit no evaluation can see;
  // its coefficient scales with that same distance, so it is equally
  // negligible. Dropping both keeps the formula clear of branch points
  // that would block evaluating the pole itself as a tip.
  {
    const double eps = std::numeric_limits<double>::epsilon();
    double dropped = 0.0;
    std::erase_if(lambdas_, [&](const LambdaTerm& t) {
      bool drop = std::abs(t.coeff) <= 1e-20;
      if (!drop) {
        for (const auto& e : P.entries()) {
          if (std::abs(t.lambda - e.k) <
              128.0 * eps * std::max(1.0, std::abs(t.lambda))) {
            drop = true;
            break;
          }
        }
      }
      if (drop) dropped += 8e2 * std::abs(t.coeff);
      return drop;
    });
    dropped_bound_ = dropped;
  }

  // Accumulation order ascending |lambda|, matching the tail bound
  // derivation of the infinite product.
  std::stable_sort(lambdas_.begin(), lambdas_.end(),
                   [](const LambdaTerm& a, const LambdaTerm& b) {
                     return std::abs(a.lambda) < std::abs(b.lambda);
                   });

  switch (pf_.kind) {
    case RootCase::ComplexPair: {
      e_ipsi_ = std::polar(1.0, pf_.psi);
      e_2ipsi_ = std::polar(1.0, 2.0 * pf_.psi);
      log_beta_at_z0_ = std::log(z0_ - pf_.beta);
      log_betabar_at_z0_ = std::log(z0_ - std::conj(pf_.beta));
      p_prime_beta_ = 1.0 / pf_.residue_beta;
      break;
    }
    case RootCase::DistinctReal: {
      b_coeff_ = pf_.exponent_b;
      // Gauge: rotate so the boundary argument midway between the two
      // distinguished roots is pi. That places every slit ray inside the
      // upper half-plane and makes the two arg limits straddle it.
      const double x_ref = 0.5 * (pf_.rho1 + pf_.rho2);
      canonical_factor_ = std::polar(1.0, kPi - boundary_log(x_ref).imag());
      break;
    }
    case RootCase::DoubleRoot:
    case RootCase::TripleRoot: {
      Kahan asum;
      for (const auto& t : lambdas_) asum.add(t.coeff);
      a_sum_ = asum.value();
      if (pf_.kind == RootCase::DoubleRoot) {
        b_coeff_ = -pf_.lead2;
        c_coeff_ = 0.0;
      } else {
        b_coeff_ = -pf_.coef2;
        c_coeff_ = -0.5 * pf_.lead3;
      }
      // Gauge: cancel the z0-normalization of the lambda terms so the
      // boundary Im plateaus telescope from pi on the far left to 0 on the
      // far right.
      Kahan shift;
      for (const auto& t : lambdas_) {
        shift.add(t.coeff * t.log_at_z0.imag());
      }
      canonical_shift_ = Complex(0.0, shift.value());
      break;
    }
  }
}

Complex KoenigsMap::limit_point() const {
  switch (pf_.kind) {
    case RootCase::ComplexPair:
      return pf_.beta;
    case RootCase::DistinctReal:
      return Complex(pf_.rho1, 0.0);
    default:
      return Complex(pf_.rho0, 0.0);
  }
}

void KoenigsMap::guard_formula_singularities(Complex z) const {
  const double guard = 1e-12 * std::max(1.0, std::abs(z));
  switch (pf_.kind) {
    case RootCase::ComplexPair:
      break;
    case RootCase::DistinctReal:
      if (std::abs(z - pf_.rho1) < guard) {
        throw EvalError("h has a pole at the expanding root");
      }
      break;
    default:
      if (std::abs(z - pf_.rho0) < guard) {
        throw EvalError("h is singular at the collapse point");
      }
      break;
  }
  if (z.imag() == 0.0) {
    // Log branch points are mild: the value only turns meaningless once the
    // distance is mostly rounding error. A tight radius here matters because
    // a root can sit legitimately close to its pole, and the pole itself
    // must stay evaluable as a tip.
    const double log_guard =
        64.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(z));
    for (const auto& t : lambdas_) {
      if (std::abs(z.real() - t.lambda) < log_guard) {
        throw EvalError("branch point on the boundary");
      }
    }
  }
}

double KoenigsMap::eval_tail_bound(Complex z) const {
  const double rb = P_->tail_root_residue_bound();
  if (rb == 0.0) return 0.0;
  if (!std::isfinite(rb)) return kInf;
  double scale = 1.0;
  if (pf_.kind == RootCase::ComplexPair) {
    scale = std::abs(p_prime_beta_);
  } else if (pf_.kind == RootCase::DistinctReal) {
    scale = 1.0 / pf_.residue_rho1;
  }
  // Dropped roots interlace the dropped poles, so they clear z and z0 by at
  // least the pole clearance minus one gap.
  const double d =
      std::min(P_->tail_pole_distance(z), P_->tail_pole_distance(z0_)) -
      P_->gap();
  if (!(d > 0.0)) return kInf;
  const double u = std::abs(z - z0_) / d;
  // |Log((z-l)/(z0-l))| <= 2u when u <= 1/2, else log(1+u) + pi.
  const double factor = (u <= 0.5) ? 2.0 * u : std::log1p(u) + kPi;
  return scale * rb * factor;
}

HEvaluation KoenigsMap::eval_h(Complex z) const {
  z = from_upper(z);
  if (z.imag() < 0.0) {
    throw EvalError("evaluation point below the real axis");
  }
  guard_formula_singularities(z);

  HEvaluation out;
  out.tail_bound = eval_tail_bound(z) + dropped_bound_;

  KahanComplex s;
  for (const auto& t : lambdas_) {
    s.add(t.coeff * log_ratio(z, t.lambda, t.log_at_z0));
  }

  switch (pf_.kind) {
    case RootCase::ComplexPair: {
      const Complex expo =
          e_2ipsi_ * (std::log(z - std::conj(pf_.beta)) - log_betabar_at_z0_) -
          e_ipsi_ * s.value();
      out.value = (z - pf_.beta) / (z0_ - pf_.beta) * std::exp(expo);
      break;
    }
    case RootCase::DistinctReal: {
      const Complex expo = b_coeff_ * std::log(z - pf_.rho2) + s.value();
      out.value = std::exp(expo) / (z - pf_.rho1);
      break;
    }
    default: {
      const Complex u = 1.0 / (z - pf_.rho0);
      s.add((1.0 - a_sum_) * std::log(z - pf_.rho0));
      s.add(b_coeff_ * u);
      if (c_coeff_ != 0.0) s.add(c_coeff_ * u * u);
      out.value = s.value();
      break;
    }
  }
  return out;
}

Complex KoenigsMap::eval_h_prime(Complex z) const {
  z = from_upper(z);
  if (z.imag() < 0.0) {
    throw EvalError("evaluation point below the real axis");
  }
  guard_formula_singularities(z);
  switch (pf_.kind) {
    case RootCase::ComplexPair: {
      // Product rule on (z - beta) E(z): stays regular at the critical zero
      // beta, where the log-derivative identity h P'(beta)/P degenerates to
      // 0/0 (h and P vanish together there).
      KahanComplex s, ds;
      for (const auto& t : lambdas_) {
        s.add(t.coeff * log_ratio(z, t.lambda, t.log_at_z0));
        ds.add(t.coeff / (z - t.lambda));
      }
      const Complex expo =
          e_2ipsi_ * (std::log(z - std::conj(pf_.beta)) - log_betabar_at_z0_) -
          e_ipsi_ * s.value();
      const Complex dexpo =
          e_2ipsi_ / (z - std::conj(pf_.beta)) - e_ipsi_ * ds.value();
      return std::exp(expo) / (z0_ - pf_.beta) *
             (1.0 + (z - pf_.beta) * dexpo);
    }
    case RootCase::DistinctReal:
      return -eval_h(z).value * (1.0 / pf_.residue_rho1) / P_->value(z);
    default:
      return 1.0 / P_->value(z);
  }
}

Complex KoenigsMap::to_canonical(Complex raw_h) const {
  if (pf_.kind == RootCase::DoubleRoot || pf_.kind == RootCase::TripleRoot) {
    return raw_h + canonical_shift_;
  }
  return canonical_factor_ * raw_h;
}

// Boundary evaluation at real x with the exact plateau Arg pattern
// Arg(x - s) in {0, pi}. Distinct-real case: returns log h = (log|h|, arg h)
// with the arg assembled from exact pi steps, so plateau values carry no
// wrap ambiguity. Collapse cases: returns h itself (the formula is already
// additive). Conjugate-pair case: principal log of eval_h.
Complex KoenigsMap::boundary_log(double x) const {
  const Complex zb = from_upper(Complex(x, 0.0));
  guard_formula_singularities(zb);
  switch (pf_.kind) {
    case RootCase::ComplexPair: {
      return std::log(eval_h(zb).value);
    }
    case RootCase::DistinctReal: {
      Kahan re, im;
      re.add(b_coeff_ * std::log(std::abs(x - pf_.rho2)));
      im.add(x < pf_.rho2 ? b_coeff_ * kPi : 0.0);
      re.add(-std::log(std::abs(x - pf_.rho1)));
      im.add(x < pf_.rho1 ? -kPi : 0.0);
      for (const auto& t : lambdas_) {
        re.add(t.coeff *
               (std::log(std::abs(x - t.lambda)) - t.log_at_z0.real()));
        im.add(t.coeff *
               ((x < t.lambda ? kPi : 0.0) - t.log_at_z0.imag()));
      }
      return Complex(re.value(), im.value());
    }
    default: {
      Kahan re, im;
      for (const auto& t : lambdas_) {
        re.add(t.coeff *
               (std::log(std::abs(x - t.lambda)) - t.log_at_z0.real()));
        im.add(t.coeff *
               ((x < t.lambda ? kPi : 0.0) - t.log_at_z0.imag()));
      }
      re.add((1.0 - a_sum_) * std::log(std::abs(x - pf_.rho0)));
      im.add(x < pf_.rho0 ? (1.0 - a_sum_) * kPi : 0.0);
      const double u = 1.0 / (x - pf_.rho0);
      re.add(b_coeff_ * u);
      if (c_coeff_ != 0.0) re.add(c_coeff_ * u * u);
      return Complex(re.value(), im.value());
    }
  }
}

std::vector<TipPoint> KoenigsMap::tip_points() const {
  std::vector<TipPoint> tips;
  const auto& entries = P_->entries();
  const bool truncated = P_->tail_weight() > 0.0;
  tips.reserve(entries.size());
  for (std::size_t i = 0; i < entries.size(); ++i) {
    TipPoint tp;
    tp.index = i;
    tp.k = entries[i].k;
    tp.truncation_artifact = truncated && (i == 0 || i + 1 == entries.size());
    switch (pf_.kind) {
      case RootCase::ComplexPair:
        tp.h = eval_h(Complex(tp.k, 0.0)).value;
        break;
      case RootCase::DistinctReal: {
        const Complex lg = boundary_log(tp.k);
        tp.h = std::polar(std::exp(lg.real()),
                          lg.imag() + std::arg(canonical_factor_));
        break;
      }
      default:
        tp.h = boundary_log(tp.k) + canonical_shift_;
        break;
    }
    tips.push_back(tp);
  }
  return tips;
}

double KoenigsMap::spirallike_margin(const std::vector<Complex>& sample) const {
  if (pf_.kind != RootCase::ComplexPair) {
    throw EvalError("spiral margin is defined for the conjugate-pair case");
  }
  double m = kInf;
  const Complex emi = std::conj(e_ipsi_);
  for (Complex z : sample) {
    z = from_upper(z);
    const Complex q = emi * (z - pf_.beta) * (z - std::conj(pf_.beta)) *
                      p_prime_beta_ / P_->value(z);
    m = std::min(m, q.imag());
  }
  return m;
}

std::vector<double> KoenigsMap::structural_points() const {
  std::vector<double> s;
  for (const auto& t : lambdas_) s.push_back(t.lambda);
  switch (pf_.kind) {
    case RootCase::ComplexPair:
      break;
    case RootCase::DistinctReal:
      s.push_back(pf_.rho1);
      s.push_back(pf_.rho2);
      break;
    default:
      s.push_back(pf_.rho0);
      break;
  }
  std::sort(s.begin(), s.end());
  return s;
}

ScanReport KoenigsMap::image_boundary_scan(std::size_t grid_points) const {
  ScanReport rep;
  rep.kind = pf_.kind;

  const std::vector<double> structure = structural_points();
  std::vector<double> avoid = structure;
  for (const auto& e : P_->entries()) avoid.push_back(e.k);
  std::sort(avoid.begin(), avoid.end());

  double lo = P_->k_min(), hi = P_->k_max();
  if (!structure.empty()) {
    lo = std::min(lo, structure.front());
    hi = std::max(hi, structure.back());
  }
  const double pad = 1.0 + 0.25 * (hi - lo);
  lo -= pad;
  hi += pad;

  if (grid_points < 2) grid_points = 2;
  std::vector<double> xs;
  xs.reserve(grid_points + 10 * avoid.size());
  for (std::size_t i = 0; i < grid_points; ++i) {
    xs.push_back(lo + (hi - lo) * static_cast<double>(i) /
                          static_cast<double>(grid_points - 1));
  }
  // Cluster extra samples around every structural point so plateau edges
  // and tip neighborhoods are resolved regardless of grid size.
  for (double s : avoid) {
    for (double d : {1e-8, 1e-6, 1e-4, 1e-2, 1e-1}) {
      xs.push_back(s - d);
      xs.push_back(s + d);
    }
  }
  std::sort(xs.begin(), xs.end());

  const double keepout = 1e-9;
  rep.samples.reserve(xs.size());
  double last = -kInf;
  for (double x : xs) {
    if (x - last < 1e-12) continue;
    bool blocked = false;
    for (double s : avoid) {
      if (std::abs(x - s) <= keepout) {
        blocked = true;
        break;
      }
    }
    if (blocked) continue;
    last = x;

    ScanSample sample;
    sample.x = x;
    int above = 0;
    for (double s : structure) {
      if (s > x) ++above;
    }
    sample.branch_flags = above;
    switch (pf_.kind) {
      case RootCase::ComplexPair:
        sample.h = eval_h(Complex(x, 0.0)).value;
        break;
      case RootCase::DistinctReal: {
        const Complex lg = boundary_log(x);
        sample.h = std::polar(std::exp(lg.real()),
                              lg.imag() + std::arg(canonical_factor_));
        break;
      }
      default:
        sample.h = boundary_log(x) + canonical_shift_;
        break;
    }
    rep.samples.push_back(sample);
  }

  switch (pf_.kind) {
    case RootCase::ComplexPair: {
      Kahan asum;
      for (const auto& t : lambdas_) asum.add(t.coeff);
      rep.spiral_amplitude = kPi * asum.value() / std::cos(pf_.psi);
      break;
    }
    case RootCase::DistinctReal: {
      Kahan raw_arg_inf;  // boundary arg limit as x -> +inf, raw gauge
      for (const auto& t : lambdas_) {
        raw_arg_inf.add(-t.coeff * t.log_at_z0.imag());
      }
      rep.theta1 = raw_arg_inf.value() + std::arg(canonical_factor_);
      Kahan amp;  // 1 - b - sum a_n, the certified P'(rho1) surrogate
      amp.add(1.0);
      amp.add(-b_coeff_);
      for (const auto& t : lambdas_) amp.add(-t.coeff);
      rep.amplitude = kPi * amp.value();
      rep.theta2 = rep.theta1 - rep.amplitude;
      break;
    }
    default: {
      // Plateau levels between consecutive branch points, canonical gauge:
      // exact pi combinations, walked left to right.
      double c = 1.0;  // sum A_n + (1 - sum A_n), everything still to the right
      rep.im_levels.push_back(kPi * c);
      for (double s : structure) {
        if (s == pf_.rho0) {
          c -= 1.0 - a_sum_;
        } else {
          for (const auto& t : lambdas_) {
            if (t.lambda == s) {
              c -= t.coeff;
              break;
            }
          }
        }
        rep.im_levels.push_back(kPi * c);
      }
      rep.strip_width = kPi;
      double q = 0.0;
      for (double lv : rep.im_levels) q = std::max(q, std::abs(lv));
      rep.tip_bound = q;
      break;
    }
  }
  return rep;
}

}  // namespace loewner
