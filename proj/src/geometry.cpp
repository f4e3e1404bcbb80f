#include "loewner/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <utility>
#include <vector>

namespace loewner {

namespace {

constexpr double kBand = 0.05;       // verdict band in radians
constexpr double kRadialPsi = 0.01;  // below this |psi| a spiral degenerates
constexpr int kStride = 8;           // elimination stride over tail samples

// Trajectory tail prepared for fitting: angles about the limit unwrapped
// along the trace, u = |(1/2) log(1-t)|, distances recomputed against the
// limit actually passed in (which may differ from traj.limit).
struct AngleTail {
  std::vector<double> t;
  std::vector<double> angle;
  std::vector<double> u;
  std::vector<double> dist;
  double winding = 0.0;  // over the full trace, t = 0 included
};

AngleTail collect_tail(const Trajectory& traj, Complex limit) {
  AngleTail tail;
  tail.t.reserve(traj.samples.size());
  tail.angle.reserve(traj.samples.size());
  bool have = false;
  double prev = 0.0, first = 0.0;
  for (const auto& s : traj.samples) {
    const Complex d = s.gamma - limit;
    if (std::abs(d) == 0.0) continue;
    double a = std::arg(d);
    if (have) a = prev + std::remainder(a - prev, 2.0 * kPi);
    if (!have) first = a;
    have = true;
    prev = a;
    if (s.t > 0.0) {
      tail.t.push_back(s.t);
      tail.angle.push_back(a);
      tail.u.push_back(std::abs(0.5 * std::log1p(-s.t)));
      tail.dist.push_back(std::abs(d));
    }
  }
  tail.winding = have ? prev - first : 0.0;
  return tail;
}

void require_settling(const AngleTail& tail) {
  if (tail.angle.size() < 20) {
    throw EvalError(
        "insufficient tail: need at least 20 trajectory samples past t = 0");
  }
  if (!(tail.dist.back() < 0.9 * tail.dist.front())) {
    throw ConvergenceError(
        "non-convergent angle: the tail is not approaching the limit");
  }
}

// Maximal suffix of the sample nodes with a constant (1-t) step ratio. The
// default grid is geometric except for the final appended t_max node, which
// the trim drops.
struct GeoWindow {
  std::size_t start = 0, end = 0;
  double ratio = 0.0;
  bool ok = false;
};

GeoWindow geometric_window(const AngleTail& tail) {
  GeoWindow w;
  const std::size_t n = tail.t.size();
  if (n < 3) return w;
  const auto ratio = [&](std::size_t i) {
    return (1.0 - tail.t[i + 1]) / (1.0 - tail.t[i]);
  };
  std::size_t end = n;
  while (end >= 3 &&
         std::abs(ratio(end - 2) / ratio(end - 3) - 1.0) > 1e-9) {
    --end;
  }
  if (end < 3) return w;
  const double r = ratio(end - 2);
  std::size_t start = end - 2;
  while (start > 0 && std::abs(ratio(start - 1) / r - 1.0) <= 1e-9) --start;
  w.start = start;
  w.end = end;
  w.ratio = r;
  w.ok = r > 0.0 && r < 1.0;
  return w;
}

struct StageFit {
  double value = 0.0;
  double confidence = 0.0;
  std::size_t used = 0;
  bool ok = false;
};

// Strided elimination of the correction modes m*p on a constant-ratio tail:
// mode m decays by R = q^(m*kStride) per stride, and
// a_k -> (a_{k+stride} - R a_k)/(1 - R) cancels it exactly on geometric
// nodes. Removing an absent mode amplifies the surviving spectrum, so the
// caller passes the modes actually present (even modes only for
// mirror-symmetric families).
StageFit eliminate_modes(std::vector<double> a, double q,
                         const std::vector<int>& modes) {
  StageFit fit;
  fit.used = a.size();
  std::vector<double> stages{a.back()};
  for (int m : modes) {
    const double R = std::pow(q, double(m) * double(kStride));
    if (!(R > 0.0) || !(R < 0.99999) || a.size() <= std::size_t(kStride)) {
      break;
    }
    std::vector<double> next;
    next.reserve(a.size() - kStride);
    for (std::size_t k = 0; k + std::size_t(kStride) < a.size(); ++k) {
      next.push_back((a[k + kStride] - R * a[k]) / (1.0 - R));
    }
    if (next.empty()) break;
    a = std::move(next);
    stages.push_back(a.back());
  }
  fit.value = stages.back();
  fit.confidence =
      stages.size() >= 2
          ? std::abs(stages.back() - stages[stages.size() - 2]) + 1e-12
          : std::abs(a.back() - a.front());
  fit.ok = true;
  return fit;
}

// Known-rate fit: the image action contracts corrections like (1-t)^(m p),
// so on the geometric suffix each mode has the exact per-stride ratio.
StageFit fit_power_tail(const AngleTail& tail, double p,
                        const std::vector<int>& modes) {
  const GeoWindow w = geometric_window(tail);
  if (!w.ok || w.end - w.start < std::size_t(kStride) + 2 || !(p > 0.0)) {
    // no usable constant-ratio run: report the raw tail angle with a width
    // covering its recent drift
    StageFit fit;
    fit.value = tail.angle.back();
    const std::size_t back =
        std::min<std::size_t>(kStride, tail.angle.size() - 1);
    fit.confidence =
        std::abs(tail.angle.back() - tail.angle[tail.angle.size() - 1 - back]) +
        1e-12;
    fit.used = back + 1;
    fit.ok = true;
    return fit;
  }
  const std::size_t K = std::min<std::size_t>(32, w.end - w.start);
  const double q = std::pow(w.ratio, p);
  std::vector<double> window(tail.angle.begin() + (w.end - K),
                             tail.angle.begin() + w.end);
  return eliminate_modes(std::move(window), q, modes);
}

// No classification available: measure the dominant contraction ratio from
// strided differences and eliminate it, up to three stages. Fails (ok =
// false) when the differences are not geometric, which routes the caller to
// the logarithmic models.
StageFit fit_power_tail_empirical(const AngleTail& tail) {
  StageFit fit;
  const GeoWindow w = geometric_window(tail);
  if (!w.ok || w.end - w.start < 20) return fit;
  const std::size_t K = std::min<std::size_t>(32, w.end - w.start);
  std::vector<double> a(tail.angle.begin() + (w.end - K),
                        tail.angle.begin() + w.end);
  fit.used = a.size();
  std::vector<double> stages{a.back()};
  bool flat = false;
  double dmax = 0.0;
  for (int stage = 0; stage < 3; ++stage) {
    if (a.size() <= 2 * std::size_t(kStride)) break;
    std::vector<double> diff;
    diff.reserve(a.size() - kStride);
    for (std::size_t k = 0; k + std::size_t(kStride) < a.size(); ++k) {
      diff.push_back(a[k + kStride] - a[k]);
    }
    dmax = 0.0;
    for (double d : diff) dmax = std::max(dmax, std::abs(d));
    if (dmax < 1e-9) {
      flat = true;
      break;
    }
    std::vector<double> rho;
    for (std::size_t k = 0; k + std::size_t(kStride) < diff.size(); ++k) {
      if (std::abs(diff[k]) > 1e-14) rho.push_back(diff[k + kStride] / diff[k]);
    }
    if (rho.size() < 2) break;
    std::nth_element(rho.begin(), rho.begin() + rho.size() / 2, rho.end());
    const double q = rho[rho.size() / 2];
    if (!(q > 1e-6) || !(q < 0.99)) break;
    double spread = 0.0;
    for (double r : rho) spread = std::max(spread, std::abs(r / q - 1.0));
    if (spread > 0.25) break;
    std::vector<double> next;
    next.reserve(a.size() - kStride);
    for (std::size_t k = 0; k + std::size_t(kStride) < a.size(); ++k) {
      next.push_back((a[k + kStride] - q * a[k]) / (1.0 - q));
    }
    a = std::move(next);
    stages.push_back(a.back());
  }
  if (stages.size() < 2 && !flat) return fit;
  fit.value = stages.back();
  fit.confidence =
      stages.size() >= 2
          ? std::abs(stages.back() - stages[stages.size() - 2]) + 1e-12
          : dmax + 1e-12;
  fit.ok = true;
  return fit;
}

// Tangential approach: the angle defect eps obeys 1/eps ~ alpha|u| + lower
// order with u = (1/2) log(1-t), so a reciprocal fit over {|u|, log|u|, 1}
// must come out with positive leading slope and a small relative residual
// before the limit 0 or pi is accepted.
struct TangentialFit {
  double slope = 0.0;
  double rel_rss = 1.0;
  double eps_end = 0.0;
  bool ok = false;
};

TangentialFit fit_tangential(const AngleTail& tail, bool from_left) {
  TangentialFit fit;
  const std::size_t n = tail.angle.size();
  const std::size_t K = std::min<std::size_t>(64, n);
  std::vector<double> us(K), ys(K);
  for (std::size_t j = 0; j < K; ++j) {
    const std::size_t i = n - K + j;
    const double eps = from_left ? kPi - tail.angle[i] : tail.angle[i];
    if (!(eps > 0.0)) return fit;  // wrong side of the axis for this model
    us[j] = tail.u[i];
    ys[j] = 1.0 / eps;
  }
  double g[3][4] = {};
  for (std::size_t j = 0; j < K; ++j) {
    const double c[3] = {us[j], std::log(us[j]), 1.0};
    for (int r = 0; r < 3; ++r) {
      for (int cc = 0; cc < 3; ++cc) g[r][cc] += c[r] * c[cc];
      g[r][3] += c[r] * ys[j];
    }
  }
  for (int col = 0; col < 3; ++col) {
    int piv = col;
    for (int r = col + 1; r < 3; ++r) {
      if (std::abs(g[r][col]) > std::abs(g[piv][col])) piv = r;
    }
    if (g[piv][col] == 0.0) return fit;
    for (int cc = 0; cc < 4; ++cc) std::swap(g[col][cc], g[piv][cc]);
    for (int r = 0; r < 3; ++r) {
      if (r == col) continue;
      const double f = g[r][col] / g[col][col];
      for (int cc = 0; cc < 4; ++cc) g[r][cc] -= f * g[col][cc];
    }
  }
  const double coef[3] = {g[0][3] / g[0][0], g[1][3] / g[1][1],
                          g[2][3] / g[2][2]};
  double rss = 0.0, tss = 0.0, mean = 0.0;
  for (std::size_t j = 0; j < K; ++j) mean += ys[j];
  mean /= double(K);
  for (std::size_t j = 0; j < K; ++j) {
    const double pred = coef[0] * us[j] + coef[1] * std::log(us[j]) + coef[2];
    rss += sq(ys[j] - pred);
    tss += sq(ys[j] - mean);
  }
  fit.slope = coef[0];
  fit.rel_rss = tss > 0.0 ? rss / tss : 1.0;
  fit.eps_end = 1.0 / ys.back();
  fit.ok = coef[0] > 0.0 && fit.rel_rss < 1e-3;
  return fit;
}

// Orthogonal approach: angle = pi/2 + c/u + O(1/u^2); a linear fit in 1/u
// recovers the intercept.
struct LinearFit {
  double intercept = 0.0;
  double slope = 0.0;
  double rms = 0.0;
  double x_end = 0.0;
  bool ok = false;
};

LinearFit fit_in_reciprocal_u(const AngleTail& tail) {
  LinearFit fit;
  const std::size_t n = tail.angle.size();
  const std::size_t K = std::min<std::size_t>(32, n);
  double sx = 0.0, sxx = 0.0, sy = 0.0, sxy = 0.0;
  for (std::size_t j = n - K; j < n; ++j) {
    const double x = 1.0 / tail.u[j];
    sx += x;
    sxx += x * x;
    sy += tail.angle[j];
    sxy += x * tail.angle[j];
  }
  const double det = double(K) * sxx - sx * sx;
  if (det == 0.0) return fit;
  fit.slope = (double(K) * sxy - sx * sy) / det;
  fit.intercept = (sy - fit.slope * sx) / double(K);
  double rss = 0.0;
  for (std::size_t j = n - K; j < n; ++j) {
    const double x = 1.0 / tail.u[j];
    rss += sq(tail.angle[j] - fit.intercept - fit.slope * x);
  }
  fit.rms = std::sqrt(rss / double(K));
  fit.x_end = 1.0 / tail.u.back();
  fit.ok = true;
  return fit;
}

ApproachVerdict band_verdict(double angle) {
  return (angle >= kBand && angle <= kPi - kBand)
             ? ApproachVerdict::NonTangential
             : ApproachVerdict::Tangential;
}

bool mirror_symmetric(const std::vector<SlitEntry>& entries) {
  for (const auto& e : entries) {
    bool matched = false;
    for (const auto& o : entries) {
      if (std::abs(o.k + e.k) <= 1e-12 * std::max(1.0, std::abs(e.k)) &&
          std::abs(o.b - e.b) <= 1e-12 * e.b) {
        matched = true;
        break;
      }
    }
    if (!matched) return false;
  }
  return true;
}

}  // namespace

const char* verdict_name(ApproachVerdict v) {
  switch (v) {
    case ApproachVerdict::Spiral:
      return "spiral";
    case ApproachVerdict::Radial:
      return "radial (degenerate spiral)";
    case ApproachVerdict::NonTangential:
      return "non-tangential";
    case ApproachVerdict::Tangential:
      return "tangential";
    case ApproachVerdict::Orthogonal:
      return "orthogonal";
  }
  return "unknown";
}

ApproachReport approach_angle(const Trajectory& traj, Complex limit,
                              const KoenigsMap* map) {
  const AngleTail tail = collect_tail(traj, limit);
  require_settling(tail);

  ApproachReport rep;
  rep.slit_index = traj.slit_index;
  rep.winding = tail.winding;
  rep.tail_samples = tail.angle.size();

  if (map) {
    switch (map->kind()) {
      case RootCase::ComplexPair: {
        if (std::abs(map->pf().psi) < kRadialPsi) {
          const double p = 0.5 * (1.0 / map->pf().residue_beta).real();
          const StageFit fit = fit_power_tail(tail, p, {1, 2, 3});
          rep.verdict = ApproachVerdict::Radial;
          rep.fitted_angle = fit.value;
          rep.confidence = fit.confidence;
          rep.tail_samples = fit.used;
        } else if (std::abs(tail.winding) > 2.0 * kPi) {
          rep.verdict = ApproachVerdict::Spiral;
          rep.fitted_angle = std::numeric_limits<double>::quiet_NaN();
          rep.confidence = std::numeric_limits<double>::quiet_NaN();
        } else {
          throw ConvergenceError(
              "non-convergent angle: spiral winding below one full turn; "
              "trace closer to t = 1");
        }
        return rep;
      }
      case RootCase::DistinctReal: {
        const double p = 0.5 / map->pf().residue_rho1;
        const bool sym = mirror_symmetric(map->P().entries());
        const StageFit fit = fit_power_tail(
            tail, p,
            sym ? std::vector<int>{2, 4, 6} : std::vector<int>{1, 2, 3});
        rep.verdict = band_verdict(fit.value);
        rep.fitted_angle = fit.value;
        rep.confidence = fit.confidence;
        rep.tail_samples = fit.used;
        return rep;
      }
      case RootCase::DoubleRoot: {
        // Re h -> -inf forces the approach side: the B/(z - rho0) term
        // dominates, so B > 0 puts every trajectory on the left of rho0.
        const bool from_left = -map->pf().lead2 > 0.0;
        const TangentialFit fit = fit_tangential(tail, from_left);
        if (!fit.ok) {
          throw ConvergenceError(
              "non-convergent angle: the tangential defect does not follow "
              "its reciprocal-logarithmic decay");
        }
        rep.verdict = ApproachVerdict::Tangential;
        rep.fitted_angle = from_left ? kPi : 0.0;
        rep.confidence = fit.eps_end * std::sqrt(fit.rel_rss) + 1e-9;
        rep.tail_samples = std::min<std::size_t>(64, tail.angle.size());
        return rep;
      }
      case RootCase::TripleRoot: {
        const LinearFit fit = fit_in_reciprocal_u(tail);
        if (!fit.ok) {
          throw ConvergenceError(
              "non-convergent angle: degenerate tail for the orthogonal fit");
        }
        rep.fitted_angle = fit.intercept;
        rep.confidence = std::abs(fit.slope) * fit.x_end + 2.0 * fit.rms;
        rep.tail_samples = std::min<std::size_t>(32, tail.angle.size());
        rep.verdict = std::abs(fit.intercept - 0.5 * kPi) <= kBand
                          ? ApproachVerdict::Orthogonal
                          : band_verdict(fit.intercept);
        return rep;
      }
    }
  }

  // No classification: infer the decay law from the data alone.
  const bool interior = limit.imag() > 1e-12 * std::max(1.0, std::abs(limit));
  if (interior) {
    if (std::abs(tail.winding) > 2.0 * kPi) {
      rep.verdict = ApproachVerdict::Spiral;
      rep.fitted_angle = std::numeric_limits<double>::quiet_NaN();
      rep.confidence = std::numeric_limits<double>::quiet_NaN();
      return rep;
    }
    const StageFit fit = fit_power_tail_empirical(tail);
    if (!fit.ok) {
      throw ConvergenceError(
          "non-convergent angle: interior approach is neither settled nor "
          "winding");
    }
    rep.verdict = ApproachVerdict::Radial;
    rep.fitted_angle = fit.value;
    rep.confidence = fit.confidence;
    rep.tail_samples = fit.used;
    return rep;
  }

  const StageFit fit = fit_power_tail_empirical(tail);
  if (fit.ok) {
    rep.fitted_angle = fit.value;
    rep.confidence = fit.confidence;
    rep.tail_samples = fit.used;
    // without a classification, an extrapolated angle this close to pi/2 is
    // indistinguishable from an orthogonal approach
    rep.verdict = std::abs(fit.value - 0.5 * kPi) <= kBand
                      ? ApproachVerdict::Orthogonal
                      : band_verdict(fit.value);
    return rep;
  }
  const bool from_left = tail.angle.back() > 0.5 * kPi;
  const TangentialFit tan = fit_tangential(tail, from_left);
  if (tan.ok) {
    rep.verdict = ApproachVerdict::Tangential;
    rep.fitted_angle = from_left ? kPi : 0.0;
    rep.confidence = tan.eps_end * std::sqrt(tan.rel_rss) + 1e-9;
    rep.tail_samples = std::min<std::size_t>(64, tail.angle.size());
    return rep;
  }
  const LinearFit lf = fit_in_reciprocal_u(tail);
  if (lf.ok && std::abs(lf.intercept - 0.5 * kPi) <= kBand && lf.rms < 1e-2) {
    rep.verdict = ApproachVerdict::Orthogonal;
    rep.fitted_angle = lf.intercept;
    rep.confidence = std::abs(lf.slope) * lf.x_end + 2.0 * lf.rms;
    rep.tail_samples = std::min<std::size_t>(32, tail.angle.size());
    return rep;
  }
  throw ConvergenceError(
      "non-convergent angle: the tail fits neither a power-law nor a "
      "logarithmic decay model");
}

double harmonic_measure_halfplane(Complex z, double a, double b) {
  if (!(a < b)) throw ConfigError("interval must satisfy a < b");
  if (!(z.imag() > 0.0)) {
    throw ConfigError("harmonic measure needs z in the open upper half-plane");
  }
  return std::arg((z - b) / (z - a)) / kPi;
}

double harmonic_measure_sector(Complex z, double alpha, double beta) {
  if (!(alpha < beta)) throw ConfigError("sector requires alpha < beta");
  if (std::abs(z) == 0.0) {
    throw EvalError("harmonic measure undefined at the sector vertex");
  }
  double theta = std::arg(z);
  // smallest branch of arg z at or above alpha
  theta += 2.0 * kPi * std::ceil((alpha - theta) / (2.0 * kPi));
  if (!(theta > alpha && theta < beta)) {
    throw EvalError("point lies outside the sector");
  }
  return (beta - theta) / (beta - alpha);
}

namespace {

double median_of(std::vector<double> v) {
  std::nth_element(v.begin(), v.begin() + v.size() / 2, v.end());
  return v[v.size() / 2];
}

double arg_in_upper_window(Complex h) {
  // plateau arguments live around pi in the canonical gauge; a [0, 2pi)
  // window keeps them clear of the principal-branch cut
  const double a = std::arg(h);
  return a < 0.0 ? a + 2.0 * kPi : a;
}

}  // namespace

SectorReport sector_report(const KoenigsMap& map,
                           const RootClassification& cls) {
  if (cls.kind != map.kind()) {
    throw InconsistencyError("classification case does not match the map");
  }
  SectorReport rep;
  rep.kind = map.kind();
  const ScanReport scan = map.image_boundary_scan();

  // group boundary samples by plateau: equal branch_flags = same maximal
  // interval between structural points, ascending x within each group
  int max_flags = 0;
  for (const auto& s : scan.samples) {
    max_flags = std::max(max_flags, s.branch_flags);
  }
  std::vector<std::vector<const ScanSample*>> classes(
      std::size_t(max_flags) + 1);
  for (const auto& s : scan.samples) {
    classes[std::size_t(s.branch_flags)].push_back(&s);
  }
  const auto probe_point = [](const std::vector<const ScanSample*>& cl) {
    const double x = cl[cl.size() / 2]->x;
    return Complex(x, 1e-6 * std::max(1.0, std::abs(x)));
  };

  switch (rep.kind) {
    case RootCase::ComplexPair: {
      const double cpsi = std::cos(cls.psi), spsi = std::sin(cls.psi);
      Kahan asum;
      for (double a : map.pf().alpha) asum.add(a);
      rep.amplitude = kPi * asum.value() / cpsi;
      // Im(e^{-i psi} log h) is constant on each interval; unwrap the arg
      // along the sample walk because the slit spirals wind
      std::vector<double> medians;
      for (const auto& cl : classes) {
        if (cl.empty()) continue;
        std::vector<double> kap;
        kap.reserve(cl.size());
        bool have = false;
        double prev = 0.0;
        for (const ScanSample* s : cl) {
          double a = std::arg(s->h);
          if (have) a = prev + std::remainder(a - prev, 2.0 * kPi);
          have = true;
          prev = a;
          kap.push_back(cpsi * a - spsi * std::log(std::abs(s->h)));
        }
        const auto [lo, hi] = std::minmax_element(kap.begin(), kap.end());
        rep.plateau_spread = std::max(rep.plateau_spread, *hi - *lo);
        medians.push_back(median_of(std::move(kap)));
      }
      if (!medians.empty()) {
        const auto [lo, hi] = std::minmax_element(medians.begin(),
                                                  medians.end());
        rep.measured_amplitude = (*hi - *lo) / cpsi;
      }
      rep.consistent =
          rep.plateau_spread <= 1e-6 &&
          std::abs(rep.measured_amplitude - rep.amplitude) <=
              1e-6 * (1.0 + std::abs(rep.amplitude));
      break;
    }
    case RootCase::DistinctReal: {
      rep.amplitude = kPi * cls.p_prime_rho1;  // slit-free sector
      rep.theta1 = scan.theta1;
      rep.theta2 = scan.theta2;
      std::vector<double> medians(classes.size(),
                                  std::numeric_limits<double>::quiet_NaN());
      for (std::size_t f = 0; f < classes.size(); ++f) {
        const auto& cl = classes[f];
        if (cl.empty()) continue;
        std::vector<double> args;
        args.reserve(cl.size());
        for (const ScanSample* s : cl) {
          args.push_back(arg_in_upper_window(s->h));
        }
        const auto [lo, hi] = std::minmax_element(args.begin(), args.end());
        rep.plateau_spread = std::max(rep.plateau_spread, *hi - *lo);
        medians[f] = median_of(std::move(args));
      }
      // flags 0 = rightmost plateau (theta1 side), max flags = leftmost
      rep.measured_amplitude = medians.front() - medians.back();
      rep.level_discrepancy =
          std::max({std::abs(medians.front() - rep.theta1),
                    std::abs(medians.back() - rep.theta2),
                    std::abs(rep.amplitude - scan.amplitude)});
      for (std::size_t f : {std::size_t(0), classes.size() - 1}) {
        if (classes[f].empty()) continue;
        const Complex hp =
            map.to_canonical(map.eval_h(probe_point(classes[f])).value);
        const double diff = std::abs(std::remainder(
            arg_in_upper_window(hp) - medians[f], 2.0 * kPi));
        rep.probe_discrepancy = std::max(rep.probe_discrepancy, diff);
      }
      rep.consistent =
          rep.plateau_spread <= 1e-9 && rep.level_discrepancy <= 1e-9 &&
          rep.probe_discrepancy <= 1e-4 &&
          std::abs(rep.measured_amplitude - rep.amplitude) <=
              1e-9 * (1.0 + std::abs(rep.amplitude));
      break;
    }
    default: {
      rep.amplitude = scan.strip_width;
      rep.tip_bound = scan.tip_bound;
      rep.im_levels = scan.im_levels;
      rep.measured_im_levels.assign(
          rep.im_levels.size(), std::numeric_limits<double>::quiet_NaN());
      for (std::size_t f = 0; f < classes.size(); ++f) {
        const auto& cl = classes[f];
        if (cl.empty()) continue;
        std::vector<double> ims;
        ims.reserve(cl.size());
        for (const ScanSample* s : cl) ims.push_back(s->h.imag());
        const auto [lo, hi] = std::minmax_element(ims.begin(), ims.end());
        rep.plateau_spread = std::max(rep.plateau_spread, *hi - *lo);
        const double med = median_of(std::move(ims));
        // plateau index from the left; flags counts structure to the right
        const std::size_t idx = std::size_t(max_flags) - f;
        if (idx < rep.measured_im_levels.size()) {
          rep.measured_im_levels[idx] = med;
          rep.level_discrepancy = std::max(
              rep.level_discrepancy, std::abs(med - rep.im_levels[idx]));
        }
        const Complex hp =
            map.to_canonical(map.eval_h(probe_point(cl)).value);
        rep.probe_discrepancy =
            std::max(rep.probe_discrepancy, std::abs(hp.imag() - med));
      }
      // the walk telescopes across all plateaus to exactly pi, so the
      // far-field levels bound the strip; interior slit levels may leave
      // [0, pi] when a standard root carries a negative coefficient
      rep.measured_amplitude =
          rep.measured_im_levels.front() - rep.measured_im_levels.back();
      rep.consistent =
          rep.plateau_spread <= 1e-9 && rep.level_discrepancy <= 1e-9 &&
          rep.probe_discrepancy <= 1e-4 &&
          std::abs(rep.measured_amplitude - rep.amplitude) <= 1e-9;
      break;
    }
  }
  return rep;
}

}  // namespace loewner
