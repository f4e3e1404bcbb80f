#include <cmath>
#include <complex>
#include <random>

#include "doctest.h"
#include "helpers.hpp"
#include "loewner/koenigs.hpp"
#include "loewner/roots.hpp"

using namespace loewner;
using loewner::testing::balanced_pair;
using loewner::testing::cdist;

namespace {

struct MapSetup {
  SlitFamily family;
  PFunction P;
  RootClassification cls;
  PartialFraction pf;
  KoenigsMap map;

  explicit MapSetup(SlitFamily f, Complex z0 = Complex(0.0, 1.0))
      : family(f),
        P(family, family.default_truncation()),
        cls(classify(P, build_intervals(family, family.default_truncation()))),
        pf(partial_fraction(cls, P)),
        map(P, cls, pf, z0) {}
};

Complex h_of(const MapSetup& s, Complex z) { return s.map.eval_h(z).value; }

const Complex kI(0.0, 1.0);

}  // namespace

TEST_CASE("symmetric single slit gives the quadratic map") {
  MapSetup s(SlitFamily::finite({{0.0, 1.0}}));
  REQUIRE(s.cls.kind == RootCase::ComplexPair);
  // empty product, psi = 0: h(z) = (z - 2i)(z + 2i) / ((i-2i)(i+2i)) = (z^2+4)/3
  CHECK(cdist(h_of(s, kI), Complex(1.0, 0.0)) < 1e-13);
  CHECK(cdist(h_of(s, Complex(1.0, 2.0)), Complex(1.0, 4.0) / 3.0) < 1e-13);
  CHECK(cdist(h_of(s, Complex(0.0, 0.0)), Complex(4.0 / 3.0, 0.0)) < 1e-13);
  CHECK(cdist(h_of(s, Complex(0.0, 3.0)), Complex(-5.0 / 3.0, 0.0)) < 1e-13);
  // the conjugate root is a regular point and maps to 0
  CHECK(std::abs(h_of(s, s.pf.beta)) < 1e-13);
  CHECK(cdist(s.map.eval_h_prime(Complex(1.0, 2.0)), Complex(2.0, 4.0) / 3.0) <
        1e-12);
  CHECK(s.map.eval_h(kI).tail_bound == 0.0);
  CHECK(cdist(s.map.limit_point(), Complex(0.0, 2.0)) < 1e-10);
}

TEST_CASE("conjugate-pair map fixes h(z0) = 1 and carries the root factor") {
  MapSetup s(SlitFamily::finite({{-1.0, 1.0}, {1.0, 1.0}}));
  REQUIRE(s.cls.kind == RootCase::ComplexPair);
  REQUIRE(s.pf.alpha.size() == 1);
  CHECK(s.pf.alpha[0] == doctest::Approx(0.25).epsilon(1e-12));

  // every factor is normalized at z0
  CHECK(cdist(h_of(s, kI), Complex(1.0, 0.0)) < 1e-13);

  // h(z) = (z^2+7)/6 * (z/i)^{-1/4}
  auto expected = [](Complex z) {
    return (z * z + 7.0) / 6.0 * std::exp(-0.25 * std::log(z / kI));
  };
  for (Complex z : {Complex(1.0, 1.0), Complex(-2.0, 3.0), Complex(0.5, 0.25),
                    Complex(2.0, 0.0)}) {
    CAPTURE(z.real());
    CAPTURE(z.imag());
    CHECK(cdist(h_of(s, z), expected(z)) < 1e-12);
  }
  // tips: h(+-1) = (4/3) e^{+-i pi/8}
  auto tips = s.map.tip_points();
  REQUIRE(tips.size() == 2);
  CHECK(tips[0].k == -1.0);
  CHECK(cdist(tips[0].h, std::polar(4.0 / 3.0, -kPi / 8.0)) < 1e-12);
  CHECK(cdist(tips[1].h, std::polar(4.0 / 3.0, kPi / 8.0)) < 1e-12);
  CHECK_FALSE(tips[0].truncation_artifact);
}

TEST_CASE("distinct-real map matches the closed product form") {
  MapSetup s(SlitFamily::finite({{-3.0, 1.0}, {3.0, 1.0}}));
  REQUIRE(s.cls.kind == RootCase::DistinctReal);
  CHECK(s.pf.exponent_b == doctest::Approx(4.0 / 9.0).epsilon(1e-10));
  REQUIRE(s.pf.exponent_a.size() == 1);
  CHECK(s.pf.exponent_a[0] == doctest::Approx(4.0 / 9.0).epsilon(1e-10));

  // lambda factor is 1 at z0, so h(z0) = (z0-1)^{4/9} / z0
  Complex expected = std::exp(4.0 / 9.0 * std::log(kI - 1.0)) / kI;
  CHECK(cdist(h_of(s, kI), expected) < 1e-12);

  // 1 - b - sum a_n is the derivative at the expanding root
  double reported = 1.0 - s.pf.exponent_b - s.pf.exponent_a[0];
  CHECK(reported == doctest::Approx(1.0 / 9.0).epsilon(1e-9));
  CHECK(reported > 0.0);
  CHECK(s.P.deriv_real(s.pf.rho1) == doctest::Approx(1.0 / 9.0).epsilon(1e-10));
}

TEST_CASE("distinct-real tips straddle the slit-free sector") {
  MapSetup s(SlitFamily::finite({{-3.0, 1.0}, {3.0, 1.0}}));
  auto tips = s.map.tip_points();
  REQUIRE(tips.size() == 2);
  // canonical gauge: boundary argument midway between the roots is pi
  CHECK(std::arg(tips[0].h) == doctest::Approx(4.0 * kPi / 9.0).epsilon(1e-10));
  CHECK(std::arg(tips[1].h) == doctest::Approx(5.0 * kPi / 9.0).epsilon(1e-10));
  CHECK(std::arg(tips[0].h) + std::arg(tips[1].h) ==
        doctest::Approx(kPi).epsilon(1e-12));
  CHECK(tips[0].h.imag() > 0.0);
  CHECK(tips[1].h.imag() > 0.0);
  // symmetric family: equal tip moduli, closed form 2^{10/9}/3
  CHECK(std::abs(tips[0].h) == doctest::Approx(std::abs(tips[1].h)).epsilon(1e-12));
  CHECK(std::abs(tips[0].h) ==
        doctest::Approx(std::pow(2.0, 10.0 / 9.0) / 3.0).epsilon(1e-10));
}

TEST_CASE("double-root map is the log plus simple pole") {
  MapSetup s(SlitFamily::finite({{4.0, 1.0}}));
  REQUIRE(s.cls.kind == RootCase::DoubleRoot);
  // h(z) = log(z-2) + 2/(z-2); h' = 1/P forces the +2 coefficient
  CHECK(s.pf.lead2 == doctest::Approx(-2.0).epsilon(1e-9));
  CHECK(cdist(h_of(s, Complex(4.0, 0.0)),
              Complex(std::log(2.0) + 1.0, 0.0)) < 1e-12);
  CHECK(h_of(s, Complex(3.0, 0.0)).imag() == 0.0);
  CHECK(cdist(h_of(s, Complex(0.0, 0.0)),
              Complex(std::log(2.0) - 1.0, kPi)) < 1e-12);
  Complex z(1.0, 1.0);
  CHECK(cdist(h_of(s, z), std::log(z - 2.0) + 2.0 / (z - 2.0)) < 1e-13);
  // h'(2i) = 1/P(2i) = (z-4)/(z-2)^2
  Complex w(0.0, 2.0);
  CHECK(cdist(s.map.eval_h_prime(w), (w - 4.0) / ((w - 2.0) * (w - 2.0))) <
        1e-12);
  CHECK(cdist(s.map.limit_point(), Complex(2.0, 0.0)) < 1e-10);
}

TEST_CASE("triple-root map adds the inverse-square term") {
  MapSetup s(balanced_pair(2.0 * std::sqrt(2.0)));
  REQUIRE(s.cls.kind == RootCase::TripleRoot);
  // P = z^3/(z^2-8): h(z) = log z + 4/z^2 (B = 0 by symmetry, C = 4)
  CHECK(std::abs(s.pf.coef2) < 1e-9);
  CHECK(s.pf.lead3 == doctest::Approx(-8.0).epsilon(1e-9));
  Complex z(1.0, 1.0);
  CHECK(cdist(h_of(s, z), std::log(z) + 4.0 / (z * z)) < 1e-12);
  double k = 2.0 * std::sqrt(2.0);
  CHECK(cdist(h_of(s, Complex(k, 0.0)),
              Complex(std::log(k) + 0.5, 0.0)) < 1e-12);
  CHECK(cdist(h_of(s, Complex(-k, 0.0)),
              Complex(std::log(k) + 0.5, kPi)) < 1e-12);
  CHECK(cdist(s.map.eval_h_prime(z), 1.0 / s.P.value(z)) < 1e-13);
}

TEST_CASE("derivative agrees with a central finite difference") {
  std::vector<SlitFamily> families = {
      SlitFamily::finite({{-1.0, 1.0}, {1.0, 1.0}}),
      SlitFamily::finite({{-3.0, 1.0}, {3.0, 1.0}}),
      SlitFamily::finite({{4.0, 1.0}}),
      balanced_pair(2.0 * std::sqrt(2.0)),
  };
  for (std::size_t i = 0; i < families.size(); ++i) {
    CAPTURE(i);
    MapSetup s(families[i]);
    for (Complex z : {Complex(0.0, 2.0), Complex(1.0, 2.0)}) {
      CAPTURE(z.real());
      const double step = 1e-5;
      Complex fd = (h_of(s, z + step) - h_of(s, z - step)) / (2.0 * step);
      Complex an = s.map.eval_h_prime(z);
      CHECK(cdist(fd, an) < 1e-7 * std::max(1.0, std::abs(an)));
    }
  }
}

TEST_CASE("logarithmic derivative identity holds on random samples") {
  std::mt19937_64 rng(0x9e3779b97f4a7c15ULL);
  std::uniform_real_distribution<double> xd(-4.0, 4.0);
  std::uniform_real_distribution<double> yd(0.5, 4.0);

  MapSetup pair(SlitFamily::finite({{-1.0, 1.0}, {1.0, 1.0}}));
  MapSetup real2(SlitFamily::finite({{-3.0, 1.0}, {3.0, 1.0}}));
  MapSetup coll(SlitFamily::finite({{4.0, 1.0}}));
  const Complex c_pair = 1.0 / pair.pf.residue_beta;
  const double c_real2 = -1.0 / real2.pf.residue_rho1;

  for (int i = 0; i < 20; ++i) {
    Complex z(xd(rng), yd(rng));
    CAPTURE(z.real());
    CAPTURE(z.imag());
    Complex hp = pair.map.eval_h_prime(z) * pair.P.value(z) -
                 c_pair * h_of(pair, z);
    CHECK(std::abs(hp) < 1e-9 * std::max(1.0, std::abs(h_of(pair, z))));
    Complex hr = real2.map.eval_h_prime(z) * real2.P.value(z) -
                 c_real2 * h_of(real2, z);
    CHECK(std::abs(hr) < 1e-9 * std::max(1.0, std::abs(h_of(real2, z))));
    Complex hc = coll.map.eval_h_prime(z) * coll.P.value(z) - 1.0;
    CHECK(std::abs(hc) < 1e-9);
  }
}

TEST_CASE("changing the base point shifts the map by one constant") {
  const Complex other(0.5, 2.0);
  std::vector<Complex> probes;
  for (int j = 0; j < 10; ++j) {
    probes.push_back(Complex(-1.5 + 0.35 * j, 0.4 + 0.2 * j));
  }

  SUBCASE("multiplicative for the product cases") {
    for (SlitFamily f : {SlitFamily::finite({{-1.0, 1.0}, {1.0, 1.0}}),
                         SlitFamily::finite({{-3.0, 1.0}, {3.0, 1.0}})}) {
      MapSetup a(f, kI);
      MapSetup b(f, other);
      Complex ratio = h_of(a, probes[0]) / h_of(b, probes[0]);
      for (Complex z : probes) {
        CAPTURE(z.real());
        Complex r = h_of(a, z) / h_of(b, z);
        CHECK(cdist(r, ratio) < 1e-9 * std::abs(ratio));
      }
    }
  }

  SUBCASE("additive for the collapse cases") {
    for (SlitFamily f :
         {SlitFamily::finite({{4.0, 1.0}}), balanced_pair(2.0 * std::sqrt(2.0)),
          SlitFamily::finite({{-6.0, 1.0}, {-2.0, 0.7}, {4.0, 1.1}})}) {
      MapSetup a(f, kI);
      if (a.cls.kind != RootCase::DoubleRoot &&
          a.cls.kind != RootCase::TripleRoot) {
        continue;  // only the collapse members of the list
      }
      MapSetup b(f, other);
      Complex diff = h_of(a, probes[0]) - h_of(b, probes[0]);
      for (Complex z : probes) {
        CAPTURE(z.real());
        CHECK(cdist(h_of(a, z) - h_of(b, z), diff) < 1e-9);
      }
    }
  }
}

TEST_CASE("collapse boundary values are real right of all structure") {
  MapSetup s(SlitFamily::finite({{4.0, 1.0}}));
  CHECK(h_of(s, Complex(5.0, 0.0)).imag() == 0.0);
  CHECK(h_of(s, Complex(3.5, 0.0)).imag() == 0.0);
  MapSetup t(balanced_pair(2.0 * std::sqrt(2.0)));
  CHECK(h_of(t, Complex(4.0, 0.0)).imag() == 0.0);
}

TEST_CASE("sampled univalence across the cases") {
  std::mt19937_64 rng(0x51a2b3c4d5e6f708ULL);
  std::uniform_real_distribution<double> xd(-3.0, 3.0);
  std::uniform_real_distribution<double> yd(0.1, 3.0);
  for (SlitFamily f : {SlitFamily::finite({{-1.0, 1.0}, {1.0, 1.0}}),
                       SlitFamily::finite({{-3.0, 1.0}, {3.0, 1.0}}),
                       balanced_pair(2.0 * std::sqrt(2.0))}) {
    MapSetup s(f);
    double min_gap = 1e300;
    for (int i = 0; i < 1000; ++i) {
      Complex z(xd(rng), yd(rng));
      Complex w(xd(rng), yd(rng));
      if (std::abs(z - w) < 1e-6) continue;
      min_gap = std::min(min_gap, std::abs(h_of(s, z) - h_of(s, w)));
    }
    CAPTURE(static_cast<int>(s.cls.kind));
    CHECK(min_gap > 1e-10);
  }
}

TEST_CASE("spiral margin is positive where the theorem demands it") {
  MapSetup s(SlitFamily::finite({{0.0, 1.0}}));
  // closed form: the test expression reduces to Im(2z) on this family
  double m = s.map.spirallike_margin(
      {kI, Complex(1.0, 1.0), Complex(-2.0, 3.0)});
  CHECK(m > 0.0);
  CHECK(m == doctest::Approx(2.0).epsilon(1e-10));

  MapSetup a(SlitFamily::finite({{0.0, 1.0}, {1.0, 1.0}}));
  REQUIRE(a.cls.kind == RootCase::ComplexPair);
  CHECK(std::abs(a.cls.psi) > 1e-6);  // genuinely rotated pair
  std::mt19937_64 rng(0xfeedfacecafeULL);
  std::uniform_real_distribution<double> xd(-3.0, 3.0);
  std::uniform_real_distribution<double> yd(0.05, 3.0);
  std::vector<Complex> sample;
  for (int i = 0; i < 100; ++i) sample.push_back(Complex(xd(rng), yd(rng)));
  CHECK(a.map.spirallike_margin(sample) > 0.0);
}

TEST_CASE("boundary scan reports the case geometry") {
  SUBCASE("conjugate pair: spiral sector amplitude") {
    MapSetup s(SlitFamily::finite({{-1.0, 1.0}, {1.0, 1.0}}));
    ScanReport rep = s.map.image_boundary_scan(256);
    CHECK(rep.kind == RootCase::ComplexPair);
    CHECK(rep.spiral_amplitude == doctest::Approx(kPi / 4.0).epsilon(1e-12));
    CHECK(rep.samples.size() > 200);
  }

  SUBCASE("distinct real: arg limits and plateau rays") {
    MapSetup s(SlitFamily::finite({{-3.0, 1.0}, {3.0, 1.0}}));
    ScanReport rep = s.map.image_boundary_scan(256);
    CHECK(rep.theta1 == doctest::Approx(5.0 * kPi / 9.0).epsilon(1e-10));
    CHECK(rep.theta2 == doctest::Approx(4.0 * kPi / 9.0).epsilon(1e-10));
    CHECK(rep.amplitude == doctest::Approx(kPi / 9.0).epsilon(1e-9));
    // boundary args take only the four plateau values
    for (const auto& smp : rep.samples) {
      double a = std::arg(smp.h);
      if (a < -1e-9) a += 2.0 * kPi;
      double best = 1e300;
      for (double p : {0.0, kPi, 4.0 * kPi / 9.0, 5.0 * kPi / 9.0}) {
        best = std::min(best, std::abs(a - p));
      }
      CHECK(best < 1e-9);
    }
  }

  SUBCASE("double root: levels pi then 0") {
    MapSetup s(SlitFamily::finite({{4.0, 1.0}}));
    ScanReport rep = s.map.image_boundary_scan(256);
    REQUIRE(rep.im_levels.size() == 2);
    CHECK(rep.im_levels[0] == doctest::Approx(kPi).epsilon(1e-12));
    CHECK(std::abs(rep.im_levels[1]) < 1e-12);
    CHECK(rep.strip_width == doctest::Approx(kPi));
    CHECK(rep.tip_bound == doctest::Approx(kPi));
    for (const auto& smp : rep.samples) {
      CAPTURE(smp.x);
      if (smp.x < 2.0) {
        CHECK(smp.h.imag() == doctest::Approx(kPi).epsilon(1e-12));
        CHECK(smp.branch_flags == 1);
      } else {
        CHECK(std::abs(smp.h.imag()) < 1e-12);
        CHECK(smp.branch_flags == 0);
      }
      CHECK(std::abs(smp.x - 2.0) > 1e-9);
      CHECK(std::abs(smp.x - 4.0) > 1e-9);
    }
  }

  SUBCASE("triple root: same strip, quadratic tip term included") {
    MapSetup s(balanced_pair(2.0 * std::sqrt(2.0)));
    ScanReport rep = s.map.image_boundary_scan(256);
    REQUIRE(rep.im_levels.size() == 2);
    CHECK(rep.im_levels[0] == doctest::Approx(kPi));
    CHECK(std::abs(rep.im_levels[1]) < 1e-12);
    CHECK(rep.tip_bound == doctest::Approx(kPi));
    auto tips = s.map.tip_points();
    for (const auto& tp : tips) {
      CHECK(std::abs(tp.h.imag()) <= rep.tip_bound + 1e-12);
    }
  }
}

TEST_CASE("excluded points are refused") {
  MapSetup real2(SlitFamily::finite({{-3.0, 1.0}, {3.0, 1.0}}));
  CHECK_THROWS_AS((void)real2.map.eval_h(Complex(0.0, 0.0)), EvalError);   // rho1
  CHECK_THROWS_AS((void)real2.map.eval_h(Complex(-1.0, 0.0)), EvalError);  // lambda
  MapSetup coll(SlitFamily::finite({{4.0, 1.0}}));
  CHECK_THROWS_AS((void)coll.map.eval_h(Complex(2.0, 0.0)), EvalError);
  CHECK_THROWS_AS((void)coll.map.eval_h(Complex(1.0, -1.0)), EvalError);
  CHECK_THROWS_AS(MapSetup(SlitFamily::finite({{0.0, 1.0}}), Complex(0.5, 0.0)),
                  ConfigError);
}

TEST_CASE("truncated lattice carries a tail certificate") {
  SlitFamily lat = SlitFamily::geometric_lattice({1.0, 0.1, 0.5}, 16);
  MapSetup s(lat);
  CHECK(s.cls.kind == RootCase::DistinctReal);
  HEvaluation hv = s.map.eval_h(Complex(0.3, 1.2));
  CHECK(std::isfinite(hv.value.real()));
  CHECK(hv.tail_bound > 0.0);
  CHECK(hv.tail_bound < 1e-6);
  auto tips = s.map.tip_points();
  REQUIRE(tips.size() == 32);
  CHECK(tips.front().truncation_artifact);
  CHECK(tips.back().truncation_artifact);
  CHECK_FALSE(tips[5].truncation_artifact);
}
