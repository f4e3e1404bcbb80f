#include <cmath>

#include "doctest.h"
#include "loewner/family.hpp"

using namespace loewner;

TEST_CASE("finite family entries are validated") {
  CHECK_THROWS_AS(SlitFamily::finite({}), ConfigError);
  CHECK_THROWS_AS(SlitFamily::finite({{0.0, 0.0}}), ConfigError);
  CHECK_THROWS_AS(SlitFamily::finite({{0.0, -1.0}}), ConfigError);
  CHECK_THROWS_AS(SlitFamily::finite({{1.0, 1.0}, {1.0, 2.0}}), ConfigError);
  CHECK_THROWS_AS(SlitFamily::finite({{std::nan(""), 1.0}}), ConfigError);
}

TEST_CASE("finite entries materialize sorted with the minimal gap recorded") {
  SlitFamily fam = SlitFamily::finite({{3.0, 1.0}, {-1.0, 0.5}, {0.0, 0.2}});
  auto entries = fam.materialize(fam.default_truncation());
  REQUIRE(entries.size() == 3);
  CHECK(entries[0].k == -1.0);
  CHECK(entries[1].k == 0.0);
  CHECK(entries[2].k == 3.0);
  CHECK(fam.gap() == doctest::Approx(1.0));
  CHECK_THROWS_AS(fam.materialize(2), ConfigError);
}

TEST_CASE("geometric lattice enumerates shells in alternating-sign order") {
  SlitFamily fam = SlitFamily::geometric_lattice(GeometricLattice{}, 64);
  auto first = fam.enumerate(2);
  REQUIRE(first.size() == 4);
  CHECK(first[0].k == doctest::Approx(1.0));
  CHECK(first[1].k == doctest::Approx(-1.0));
  CHECK(first[2].k == doctest::Approx(2.0));
  CHECK(first[3].k == doctest::Approx(-2.0));
  CHECK(first[0].b == doctest::Approx(0.05));
  CHECK(first[2].b == doctest::Approx(0.025));

  SUBCASE("prefix stability") {
    auto eight = fam.enumerate(4);
    for (std::size_t i = 0; i < first.size(); ++i) {
      CHECK(eight[i].k == first[i].k);
      CHECK(eight[i].b == first[i].b);
    }
  }
}

TEST_CASE("lattice tail weight follows the geometric series") {
  SlitFamily fam = SlitFamily::geometric_lattice(GeometricLattice{}, 64);
  const double expected = 2.0 * std::pow(2.0, -50.0) / 10.0;
  CHECK(fam.tail_weight(50) == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("lattice truncated at 50 shells yields 99 bounded intervals") {
  SlitFamily fam = SlitFamily::geometric_lattice(GeometricLattice{}, 64);
  IntervalStructure is = build_intervals(fam, 50);
  CHECK(is.bounded.size() == 99);
  CHECK(is.left_unbounded.truncation_artifact);
  CHECK(is.right_unbounded.truncation_artifact);

  SlitFamily fin = SlitFamily::finite({{0.0, 1.0}, {1.0, 1.0}});
  IntervalStructure fs = build_intervals(fin, fin.default_truncation());
  CHECK(fs.bounded.size() == 1);
  CHECK_FALSE(fs.left_unbounded.truncation_artifact);
  CHECK_FALSE(fs.right_unbounded.truncation_artifact);
}

TEST_CASE("family configuration round-trips through serialization") {
  SlitFamily fin = SlitFamily::finite({{-2.5, 0.7}, {1.25, 1.5}});
  SlitFamily back = load_family(serialize_family(fin));
  auto a = fin.materialize(2), b = back.materialize(2);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].k == b[i].k);
    CHECK(a[i].b == b[i].b);
  }

  SlitFamily lat = SlitFamily::geometric_lattice({2.0, 0.3, 0.25}, 32);
  SlitFamily lback = load_family(serialize_family(lat));
  CHECK(lback.kind() == FamilyKind::Parametric);
  CHECK(lback.default_truncation() == 32);
  CHECK(lback.tail_weight(10) == doctest::Approx(lat.tail_weight(10)));
}

TEST_CASE("unknown parametric rules are rejected, not approximated") {
  const char* text = R"({"slits": {"kind": "parametric", "rule": "harmonic",
                         "params": {}, "N": 8}})";
  CHECK_THROWS_AS(load_family(text), ConfigError);
}

TEST_CASE("lattice parameters outside the admissible ranges are rejected") {
  auto reject = [](const char* text) {
    CHECK_THROWS_AS(load_family(text), ConfigError);
  };
  reject(R"({"slits": {"kind": "parametric", "rule": "geometric_lattice",
             "params": {"spacing": 1.0, "b0": 0.1, "ratio": 0.0}, "N": 8}})");
  reject(R"({"slits": {"kind": "parametric", "rule": "geometric_lattice",
             "params": {"spacing": 1.0, "b0": 0.1, "ratio": 1.0}, "N": 8}})");
  reject(R"({"slits": {"kind": "parametric", "rule": "geometric_lattice",
             "params": {"spacing": 0.0, "b0": 0.1, "ratio": 0.5}, "N": 8}})");
  reject(R"({"slits": {"kind": "parametric", "rule": "geometric_lattice",
             "params": {"spacing": 1.0, "b0": -0.1, "ratio": 0.5}, "N": 8}})");
}
