#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "loewner/common.hpp"

namespace loewner {

// One slit seed: driving function k * sqrt(1-t) with weight b > 0.
struct SlitEntry {
  double k = 0.0;
  double b = 0.0;
};

enum class FamilyKind { Finite, Parametric };

// Parameters of the built-in parametric rule "geometric_lattice":
//   k_n = spacing * n for n = +-1, +-2, ...,   b_n = b0 * ratio^|n|.
// Truncation parameter N materializes shells |n| <= N (2N entries); the tail
// weight beyond N shells is 2 * b0 * ratio^(N+1) / (1 - ratio), exact.
struct GeometricLattice {
  double spacing = 1.0;
  double b0 = 0.1;
  double ratio = 0.5;
};

// A family of square-root driving functions. Entries are pairwise distinct in
// k, every weight is positive, and the pole gap d = inf of distances between
// consecutive k is positive (singleton: d = +infinity). For parametric
// families the truncation parameter is rule-defined (shells for the lattice);
// for finite families it is the entry count and callers must not truncate
// below it.
class SlitFamily {
 public:
  static SlitFamily finite(std::vector<SlitEntry> entries);
  static SlitFamily geometric_lattice(const GeometricLattice& params, std::size_t n);

  FamilyKind kind() const { return kind_; }
  std::size_t default_truncation() const { return default_truncation_; }

  // Entries of the first `n` truncation steps in canonical enumeration order
  // (finite: ascending k; lattice: +1,-1,+2,-2,...). Prefix-stable in n.
  std::vector<SlitEntry> enumerate(std::size_t n) const;

  // Same entries sorted ascending by k. Throws ConfigError if a finite family
  // would be truncated below its entry count.
  std::vector<SlitEntry> materialize(std::size_t n) const;

  std::size_t materialized_size(std::size_t n) const;

  // Pole gap d of the full family; 1 for a single slit, which has no
  // adjacent pair to measure.
  double gap() const;

  // Upper bound on the sum of b over entries beyond truncation n. Exact for
  // both kinds; nonincreasing in n; zero for fully-materialized finite input.
  double tail_weight(std::size_t n) const;

  // Sum of b over the entire family.
  double total_weight() const;

  const std::optional<GeometricLattice>& lattice() const { return lattice_; }

 private:
  SlitFamily() = default;

  FamilyKind kind_ = FamilyKind::Finite;
  std::vector<SlitEntry> entries_;  // finite kind only, sorted by k
  std::optional<GeometricLattice> lattice_;
  std::size_t default_truncation_ = 0;
};

// JSON front end. Accepts either the family object itself or a document with
// a top-level "slits" key. See README for the schema.
SlitFamily load_family(const std::string& json_text);
SlitFamily load_family_file(const std::string& path);
std::string serialize_family(const SlitFamily& family);

// Open interval between adjacent materialized poles (or a half-line).
struct Interval {
  double left;   // -infinity for the left-unbounded interval
  double right;  // +infinity for the right-unbounded interval
  // Indices into the sorted materialization; -1 marks the missing side.
  int left_pole = -1;
  int right_pole = -1;
  // True when the half-line exists only because a parametric family was
  // truncated (the full lattice has poles accumulating at both infinities).
  bool truncation_artifact = false;
};

struct IntervalStructure {
  std::vector<SlitEntry> entries;  // sorted by k, the materialization used
  std::vector<Interval> bounded;   // ascending; entries.size()-1 of them
  Interval left_unbounded;
  Interval right_unbounded;
  double gap = 0.0;  // min length over bounded intervals (+inf if none)
};

IntervalStructure build_intervals(const SlitFamily& family, std::size_t n);

}  // namespace loewner
