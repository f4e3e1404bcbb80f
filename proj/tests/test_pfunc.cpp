#include <cmath>
#include <random>

#include "doctest.h"
#include "helpers.hpp"
#include "loewner/pfunc.hpp"

using namespace loewner;
using loewner::testing::cdist;
using loewner::testing::random_family;

namespace {

PFunction make(const SlitFamily& f) { return PFunction(f, f.default_truncation()); }

}  // namespace

TEST_CASE("P matches hand values on small families") {
  PFunction p0 = make(SlitFamily::finite({{0.0, 1.0}}));
  CHECK(cdist(p0.value(Complex(0, 1)), Complex(0, -3)) < 1e-15);
  CHECK(cdist(p0.value(Complex(0, 2)), Complex(0, 0)) < 1e-15);

  PFunction p1 = make(SlitFamily::finite({{-3.0, 1.0}, {3.0, 1.0}}));
  CHECK(p1.deriv_real(0.0, 1) == doctest::Approx(1.0 / 9.0).epsilon(1e-14));

  PFunction p2 = make(SlitFamily::finite({{4.0, 1.0}}));
  CHECK(p2.deriv_real(2.0, 3) == doctest::Approx(-1.5).epsilon(1e-14));
}

TEST_CASE("derivatives agree with central differences") {
  std::mt19937_64 rng(0x5eed0001ULL);
  SlitFamily fam = random_family(rng);
  PFunction P = make(fam);
  const Complex zs[] = {Complex(0.3, 1.1), Complex(-2.0, 0.7), Complex(5.0, 2.5)};
  for (Complex z : zs) {
    for (int m = 1; m <= 5; ++m) {
      const double h = 1e-5 * (1.0 + std::abs(z));
      Complex num =
          (P.deriv(z + h, m - 1) - P.deriv(z - h, m - 1)) / (2.0 * h);
      Complex an = P.deriv(z, m);
      CHECK(cdist(num, an) < 1e-4 * (1.0 + std::abs(an)));
    }
  }
}

TEST_CASE("evaluation at a pole is rejected") {
  PFunction P = make(SlitFamily::finite({{1.0, 1.0}}));
  CHECK_THROWS_AS(P.value(Complex(1.0, 0.0)), EvalError);
  CHECK_THROWS_AS(P.value(Complex(1.0 + 1e-14, 0.0)), EvalError);
  CHECK_NOTHROW(P.value(Complex(1.0, 1e-6)));
}

TEST_CASE("quotient decompositions agree away from the singular set") {
  PFunction single = make(SlitFamily::finite({{4.0, 1.0}}));
  Complex g = single.G_direct(Complex(0, 1), Complex(2, 0));
  CHECK(cdist(g, Complex(-4.0 / 17.0, -1.0 / 17.0)) < 1e-15);
  CHECK(cdist(g, single.G_decomposed(Complex(0, 1), Complex(2, 0))) < 1e-15);

  std::mt19937_64 rng(0x5eed0002ULL);
  SlitFamily fam = random_family(rng);
  PFunction P = make(fam);
  std::uniform_real_distribution<double> ux(-8.0, 8.0), uy(0.3, 3.0);
  for (int i = 0; i < 25; ++i) {
    Complex z(ux(rng), uy(rng));
    Complex w(ux(rng), uy(rng));
    Complex l1(ux(rng), 0.0), l2(ux(rng), 0.0);
    if (std::abs(z - w) < 0.1 || std::abs(l1 - l2) < 0.1) continue;
    if (P.pole_distance(z) < 0.1 || P.pole_distance(w) < 0.1 ||
        P.pole_distance(l1) < 0.1 || P.pole_distance(l2) < 0.1) {
      continue;
    }
    Complex fd = P.F_direct(z, w);
    CHECK(cdist(fd, P.F_decomposed(z, w)) < 1e-11 * (1.0 + std::abs(fd)));
    Complex hd = P.H_direct(z, l1, l2);
    CHECK(cdist(hd, P.H_decomposed(z, l1, l2)) < 1e-11 * (1.0 + std::abs(hd)));
    if (std::abs(z - l1) > 0.1) {
      Complex gd = P.G_direct(z, l1);
      CHECK(cdist(gd, P.G_decomposed(z, l1)) < 1e-11 * (1.0 + std::abs(gd)));
    }
  }
}

TEST_CASE("lattice evaluations carry certified tail bounds") {
  SlitFamily lat = SlitFamily::geometric_lattice(GeometricLattice{}, 64);
  PFunction P64(lat, 64);
  PFunction P80(lat, 80);

  PEvaluation e = P64.eval(Complex(0, 1));
  CHECK(e.tail_bound > 0.0);
  CHECK(e.tail_bound < 1e-20);
  CHECK(cdist(P64.value(Complex(0, 1)), P80.value(Complex(0, 1))) < 1e-18);

  // finite families are complete: no tail
  PFunction fin = make(SlitFamily::finite({{0.0, 1.0}}));
  CHECK(fin.eval(Complex(0, 1)).tail_bound == 0.0);
  CHECK(fin.tail_root_residue_bound() == 0.0);

  double rb = P64.tail_root_residue_bound();
  CHECK(rb > 0.0);
  CHECK(rb < 1e-16);
}
