#include "loewner/family.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "json.hpp"

namespace loewner {

namespace {

void validate_entries(const std::vector<SlitEntry>& entries) {
  if (entries.empty()) throw ConfigError("slit family must contain at least one entry");
  for (const auto& e : entries) {
    if (!std::isfinite(e.k)) throw ConfigError("slit position k must be finite");
    if (!(e.b > 0.0) || !std::isfinite(e.b)) {
      throw ConfigError("slit weight b must be finite and positive");
    }
  }
}

}  // namespace

SlitFamily SlitFamily::finite(std::vector<SlitEntry> entries) {
  validate_entries(entries);
  std::sort(entries.begin(), entries.end(),
            [](const SlitEntry& a, const SlitEntry& b) { return a.k < b.k; });
  for (std::size_t i = 1; i < entries.size(); ++i) {
    if (!(entries[i - 1].k < entries[i].k)) {
      throw ConfigError("slit positions must be pairwise distinct");
    }
  }
  SlitFamily fam;
  fam.kind_ = FamilyKind::Finite;
  fam.entries_ = std::move(entries);
  fam.default_truncation_ = fam.entries_.size();
  return fam;
}

SlitFamily SlitFamily::geometric_lattice(const GeometricLattice& params, std::size_t n) {
  if (!(params.spacing > 0.0)) throw ConfigError("geometric_lattice: spacing must be positive");
  if (!(params.b0 > 0.0)) throw ConfigError("geometric_lattice: b0 must be positive");
  if (!(params.ratio > 0.0 && params.ratio < 1.0)) {
    throw ConfigError("geometric_lattice: ratio must lie in (0,1)");
  }
  if (n == 0) throw ConfigError("geometric_lattice: truncation must be at least 1");
  SlitFamily fam;
  fam.kind_ = FamilyKind::Parametric;
  fam.lattice_ = params;
  fam.default_truncation_ = n;
  return fam;
}

std::vector<SlitEntry> SlitFamily::enumerate(std::size_t n) const {
  if (kind_ == FamilyKind::Finite) {
    std::vector<SlitEntry> out(entries_.begin(),
                               entries_.begin() + std::min(n, entries_.size()));
    return out;
  }
  const auto& lat = *lattice_;
  std::vector<SlitEntry> out;
  out.reserve(2 * n);
  double b = lat.b0;
  for (std::size_t j = 1; j <= n; ++j) {
    b *= lat.ratio;
    double k = lat.spacing * static_cast<double>(j);
    out.push_back({k, b});
    out.push_back({-k, b});
  }
  return out;
}

std::vector<SlitEntry> SlitFamily::materialize(std::size_t n) const {
  if (kind_ == FamilyKind::Finite && n < entries_.size()) {
    throw ConfigError("finite family cannot be truncated below its entry count");
  }
  auto out = enumerate(n);
  std::sort(out.begin(), out.end(),
            [](const SlitEntry& a, const SlitEntry& b) { return a.k < b.k; });
  return out;
}

std::size_t SlitFamily::materialized_size(std::size_t n) const {
  if (kind_ == FamilyKind::Finite) return entries_.size();
  return 2 * n;
}

double SlitFamily::gap() const {
  if (kind_ == FamilyKind::Parametric) return lattice_->spacing;
  // A lone slit has no adjacent pair; report a unit spacing so callers that
  // derive step sizes from the gap stay finite.
  if (entries_.size() < 2) return 1.0;
  double d = std::numeric_limits<double>::infinity();
  for (std::size_t i = 1; i < entries_.size(); ++i) {
    d = std::min(d, entries_[i].k - entries_[i - 1].k);
  }
  return d;
}

double SlitFamily::tail_weight(std::size_t n) const {
  if (kind_ == FamilyKind::Finite) {
    if (n >= entries_.size()) return 0.0;
    Kahan acc;
    for (std::size_t i = n; i < entries_.size(); ++i) acc.add(entries_[i].b);
    return acc.value();
  }
  const auto& lat = *lattice_;
  // sum over |m| > n of b0 * ratio^|m|, both signs.
  return 2.0 * lat.b0 * std::pow(lat.ratio, static_cast<double>(n) + 1.0) /
         (1.0 - lat.ratio);
}

double SlitFamily::total_weight() const {
  if (kind_ == FamilyKind::Finite) {
    Kahan acc;
    for (const auto& e : entries_) acc.add(e.b);
    return acc.value();
  }
  return tail_weight(0);
}

namespace {

using nlohmann::json;

SlitFamily family_from_json(const json& spec) {
  if (!spec.is_object()) throw ConfigError("family description must be a JSON object");
  const std::string kind = spec.value("kind", "finite");
  if (kind == "finite") {
    if (!spec.contains("entries") || !spec["entries"].is_array()) {
      throw ConfigError("finite family requires an \"entries\" array");
    }
    std::vector<SlitEntry> entries;
    for (const auto& item : spec["entries"]) {
      if (!item.contains("k") || !item.contains("b")) {
        throw ConfigError("each entry needs numeric fields \"k\" and \"b\"");
      }
      entries.push_back({item["k"].get<double>(), item["b"].get<double>()});
    }
    return SlitFamily::finite(std::move(entries));
  }
  if (kind == "parametric") {
    const std::string rule = spec.value("rule", "");
    if (rule != "geometric_lattice") {
      throw ConfigError("unknown parametric rule \"" + rule +
                        "\" (no certified tail bound available)");
    }
    GeometricLattice params;
    if (spec.contains("params")) {
      const auto& p = spec["params"];
      params.spacing = p.value("spacing", params.spacing);
      params.b0 = p.value("b0", params.b0);
      params.ratio = p.value("ratio", params.ratio);
    }
    std::size_t n = spec.value("N", std::size_t{64});
    return SlitFamily::geometric_lattice(params, n);
  }
  throw ConfigError("family kind must be \"finite\" or \"parametric\"");
}

}  // namespace

SlitFamily load_family(const std::string& json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  if (doc.is_object() && doc.contains("slits")) return family_from_json(doc["slits"]);
  return family_from_json(doc);
}

SlitFamily load_family_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return load_family(buf.str());
}

std::string serialize_family(const SlitFamily& family) {
  json spec;
  if (family.kind() == FamilyKind::Finite) {
    spec["kind"] = "finite";
    json entries = json::array();
    for (const auto& e : family.enumerate(family.default_truncation())) {
      entries.push_back({{"k", e.k}, {"b", e.b}});
    }
    spec["entries"] = std::move(entries);
  } else {
    const auto& lat = *family.lattice();
    spec["kind"] = "parametric";
    spec["rule"] = "geometric_lattice";
    spec["params"] = {{"spacing", lat.spacing}, {"b0", lat.b0}, {"ratio", lat.ratio}};
    spec["N"] = family.default_truncation();
  }
  json doc;
  doc["slits"] = std::move(spec);
  return doc.dump(2);
}

IntervalStructure build_intervals(const SlitFamily& family, std::size_t n) {
  IntervalStructure out;
  out.entries = family.materialize(n);
  const bool artifact = family.kind() == FamilyKind::Parametric;
  const double inf = std::numeric_limits<double>::infinity();
  const int m = static_cast<int>(out.entries.size());

  out.gap = inf;
  for (int i = 0; i + 1 < m; ++i) {
    Interval iv;
    iv.left = out.entries[i].k;
    iv.right = out.entries[i + 1].k;
    iv.left_pole = i;
    iv.right_pole = i + 1;
    out.gap = std::min(out.gap, iv.right - iv.left);
    out.bounded.push_back(iv);
  }
  out.left_unbounded = {-inf, out.entries.front().k, -1, 0, artifact};
  out.right_unbounded = {out.entries.back().k, inf, m - 1, -1, artifact};
  return out;
}

}  // namespace loewner
