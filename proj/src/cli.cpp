#include "loewner/cli.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>
#include <limits>
#include <mutex>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "CLI11.hpp"
#include "loewner/family.hpp"
#include "loewner/flow.hpp"
#include "loewner/geometry.hpp"
#include "loewner/koenigs.hpp"
#include "loewner/pfunc.hpp"
#include "loewner/roots.hpp"

namespace loewner {

namespace {

namespace fs = std::filesystem;

constexpr double kInfD = std::numeric_limits<double>::infinity();

std::string fmt_e(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2e", x);
  return buf;
}

std::string fmt_short(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", x);
  return buf;
}

// JSON number: g17, with non-finite values mapped to null.
std::string jnum(double x) {
  if (!std::isfinite(x)) return "null";
  return format_g17(x);
}

std::string jstr(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    switch (c) {
      case '"': out += "\\\""; break;
      case '\\': out += "\\\\"; break;
      case '\n': out += "\\n"; break;
      case '\r': out += "\\r"; break;
      case '\t': out += "\\t"; break;
      default:
        if (static_cast<unsigned char>(c) < 0x20) {
          char buf[8];
          std::snprintf(buf, sizeof buf, "\\u%04x", c);
          out += buf;
        } else {
          out += c;
        }
    }
  }
  out += '"';
  return out;
}

std::string jbool(bool b) { return b ? "true" : "false"; }

std::string out_path(const RunManifest& m, const std::string& name) {
  return (fs::path(m.out_dir) / name).string();
}

// Effective manifest echo embedded in every structured document.
void append_manifest(std::ostream& os, const RunManifest& m) {
  os << "\"manifest\": {\"command\": " << jstr(m.command)
     << ", \"config\": " << jstr(m.config_path)
     << ", \"truncation\": " << m.truncation << ", \"t_max\": " << jnum(m.t_max)
     << ", \"grid_points\": " << m.grid_points << ", \"tol\": "
     << (m.tol ? jnum(*m.tol) : std::string("null"))
     << ", \"out\": " << jstr(m.out_dir) << ", \"slits\": [";
  for (std::size_t i = 0; i < m.slits.size(); ++i) {
    if (i) os << ", ";
    os << m.slits[i];
  }
  os << "], \"seed\": " << m.seed << "}";
}

// Everything every command needs, built once. KoenigsMap and FlowEvaluator
// hold pointers into this struct, so it is neither copied nor moved.
struct Pipeline {
  SlitFamily family;
  std::size_t n;
  PFunction P;
  IntervalStructure intervals;
  RootClassification cls;
  PartialFraction pf;

  Pipeline(const RunManifest& m, double classify_tol)
      : family(load_family_file(m.config_path)),
        n(m.truncation ? m.truncation : family.default_truncation()),
        P(family, n),
        intervals(build_intervals(family, n)),
        cls(classify(P, intervals, classify_tol)),
        pf(partial_fraction(cls, P)) {}

  Pipeline(const Pipeline&) = delete;
};

struct MapPipeline : Pipeline {
  KoenigsMap map;
  FlowEvaluator flow;

  explicit MapPipeline(const RunManifest& m)
      : Pipeline(m, 1e-12), map(P, cls, pf), flow(map) {}
};

// Time grid for tracing: the dyadic default, or (with --grid-points) a grid
// uniform in log(1-t) so the samples keep resolving the approach to t = 1.
std::vector<double> trace_grid(const RunManifest& m) {
  if (!(m.t_max > 0.0 && m.t_max < 1.0))
    throw ConfigError("--t-max must lie in (0,1)");
  if (m.grid_points == 0) return FlowEvaluator::default_t_grid(m.t_max);
  if (m.grid_points < 2) throw ConfigError("--grid-points needs at least 2");
  std::vector<double> grid(m.grid_points);
  const double span = 1.0 - m.t_max;
  for (std::size_t j = 0; j < m.grid_points; ++j) {
    grid[j] = 1.0 - std::pow(span, double(j) / double(m.grid_points - 1));
  }
  grid.front() = 0.0;
  grid.back() = m.t_max;
  for (std::size_t j = 1; j < grid.size(); ++j) {
    if (!(grid[j] > grid[j - 1]))
      throw ConfigError("grid points collapse; reduce --grid-points");
  }
  return grid;
}

// Index-sharded parallel loop honoring LOEWNER_THREADS. Results must be
// written to per-index slots so the schedule cannot affect the output.
template <typename Fn>
void parallel_for(std::size_t count, Fn&& fn) {
  const std::size_t cap = thread_cap();
  const std::size_t workers = std::min(cap, count == 0 ? std::size_t{1} : count);
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr first_error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      try {
        for (std::size_t i = next.fetch_add(1); i < count;
             i = next.fetch_add(1)) {
          fn(i);
        }
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  if (first_error) std::rethrow_exception(first_error);
}

std::string trajectory_csv(const Trajectory& tr) {
  std::ostringstream os;
  os << "t,re,im,dist_to_limit\n";
  for (const auto& s : tr.samples) {
    os << format_g17(s.t) << ',' << format_g17(s.gamma.real()) << ','
       << format_g17(s.gamma.imag()) << ',' << format_g17(s.dist_to_limit)
       << '\n';
  }
  return os.str();
}

std::string family_kind_name(const SlitFamily& fam) {
  return fam.kind() == FamilyKind::Finite ? "finite"
                                          : "parametric (geometric lattice)";
}

void append_standard_roots(std::ostream& os,
                           const std::vector<StandardRoot>& roots) {
  os << "\"standard_roots\": [";
  for (std::size_t i = 0; i < roots.size(); ++i) {
    if (i) os << ", ";
    os << "{\"interval\": " << roots[i].interval
       << ", \"lambda\": " << jnum(roots[i].lambda)
       << ", \"p_prime\": " << jnum(roots[i].p_prime) << "}";
  }
  os << "]";
}

void append_case_parameters(std::ostream& os, const RootClassification& cls,
                            const PartialFraction& pf) {
  os << "\"parameters\": {";
  switch (cls.kind) {
    case RootCase::ComplexPair: {
      os << "\"beta_re\": " << jnum(cls.beta.real())
         << ", \"beta_im\": " << jnum(cls.beta.imag())
         << ", \"psi\": " << jnum(cls.psi)
         << ", \"residue_beta_re\": " << jnum(pf.residue_beta.real())
         << ", \"residue_beta_im\": " << jnum(pf.residue_beta.imag())
         << ", \"alpha\": [";
      for (std::size_t i = 0; i < pf.alpha.size(); ++i) {
        if (i) os << ", ";
        os << jnum(pf.alpha[i]);
      }
      os << "]";
      break;
    }
    case RootCase::DistinctReal: {
      os << "\"rho1\": " << jnum(cls.rho1) << ", \"rho2\": " << jnum(cls.rho2)
         << ", \"p_prime_rho1\": " << jnum(cls.p_prime_rho1)
         << ", \"p_prime_rho2\": " << jnum(cls.p_prime_rho2)
         << ", \"residue_rho1\": " << jnum(pf.residue_rho1)
         << ", \"residue_rho2\": " << jnum(pf.residue_rho2)
         << ", \"exponent_b\": " << jnum(pf.exponent_b) << ", \"exponent_a\": [";
      for (std::size_t i = 0; i < pf.exponent_a.size(); ++i) {
        if (i) os << ", ";
        os << jnum(pf.exponent_a[i]);
      }
      os << "]";
      break;
    }
    case RootCase::DoubleRoot: {
      os << "\"rho0\": " << jnum(cls.rho0) << ", \"lead2\": " << jnum(pf.lead2)
         << ", \"residue_rho0\": " << jnum(pf.residue_rho0);
      break;
    }
    case RootCase::TripleRoot: {
      os << "\"rho0\": " << jnum(cls.rho0) << ", \"lead3\": " << jnum(pf.lead3)
         << ", \"coef2\": " << jnum(pf.coef2)
         << ", \"residue_rho0\": " << jnum(pf.residue_rho0)
         << ", \"coinciding_interval\": " << cls.coinciding_interval;
      break;
    }
  }
  os << "}";
}

}  // namespace

std::string format_g17(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

void write_file_atomic(const std::string& path, const std::string& content) {
  const fs::path target(path);
  if (target.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(target.parent_path(), ec);
    if (ec) {
      throw ConfigError("cannot create output directory " +
                        target.parent_path().string() + ": " + ec.message());
    }
  }
  fs::path tmp = target;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw ConfigError("cannot open " + tmp.string() + " for writing");
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    out.flush();
    if (!out) throw ConfigError("write failed for " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, target, ec);
  if (ec) {
    throw ConfigError("cannot move " + tmp.string() + " into place: " +
                      ec.message());
  }
}

std::size_t thread_cap() {
  const char* env = std::getenv("LOEWNER_THREADS");
  if (env == nullptr || *env == '\0') return 1;
  char* end = nullptr;
  const long v = std::strtol(env, &end, 10);
  if (end == env || *end != '\0' || v < 1) {
    throw ConfigError("LOEWNER_THREADS must be a positive integer");
  }
  return static_cast<std::size_t>(v);
}

int cmd_classify(const RunManifest& m, std::ostream& out) {
  Pipeline p(m, m.tol.value_or(1e-12));
  RunManifest eff = m;
  eff.truncation = p.n;

  out << "config: " << m.config_path << '\n';
  out << "family: " << family_kind_name(p.family) << ", "
      << p.P.entries().size() << " materialized entries, truncation " << p.n;
  if (p.P.tail_weight() > 0.0)
    out << ", tail weight " << fmt_e(p.P.tail_weight());
  out << '\n';
  out << "case: " << to_string(p.cls.kind) << '\n';
  switch (p.cls.kind) {
    case RootCase::ComplexPair:
      out << "beta: " << fmt_short(p.cls.beta.real()) << " + "
          << fmt_short(p.cls.beta.imag()) << "i\n";
      out << "psi (twist angle): " << fmt_short(p.cls.psi) << '\n';
      break;
    case RootCase::DistinctReal:
      out << "rho1 (attracting): " << fmt_short(p.cls.rho1)
          << ", P'(rho1): " << fmt_short(p.cls.p_prime_rho1) << '\n';
      out << "rho2: " << fmt_short(p.cls.rho2)
          << ", P'(rho2): " << fmt_short(p.cls.p_prime_rho2) << '\n';
      break;
    case RootCase::DoubleRoot:
      out << "rho0 (collapse point): " << fmt_short(p.cls.rho0) << '\n';
      out << "expansion head: " << fmt_short(p.pf.lead2) << "/(z-rho0)^2 + "
          << fmt_short(p.pf.residue_rho0) << "/(z-rho0)\n";
      break;
    case RootCase::TripleRoot:
      out << "rho0 (collapse point): " << fmt_short(p.cls.rho0) << '\n';
      out << "expansion head: " << fmt_short(p.pf.lead3) << "/(z-rho0)^3 + "
          << fmt_short(p.pf.coef2) << "/(z-rho0)^2 + "
          << fmt_short(p.pf.residue_rho0) << "/(z-rho0)\n";
      break;
  }
  out << "standard roots: " << p.cls.standard_roots.size() << '\n';
  const std::size_t shown = std::min<std::size_t>(p.cls.standard_roots.size(), 8);
  for (std::size_t i = 0; i < shown; ++i) {
    const auto& r = p.cls.standard_roots[i];
    out << "  interval " << r.interval << ": lambda "
        << fmt_short(r.lambda) << ", P' " << fmt_short(r.p_prime) << '\n';
  }
  if (shown < p.cls.standard_roots.size()) {
    out << "  ... (" << (p.cls.standard_roots.size() - shown)
        << " more in classification.json)\n";
  }
  out << "margin: " << fmt_e(p.cls.margin) << '\n';
  out << "near-degenerate: "
      << (p.cls.near_degenerate ? "yes (alternative: " + p.cls.alternative + ")"
                                : std::string("no"))
      << '\n';
  out << "upper-half-plane zero count: " << p.cls.upper_zero_count << '\n';
  out << "residue identity: sum " << format_g17(p.pf.identity_sum)
      << ", residual " << fmt_e(p.pf.identity_residual) << ", bound "
      << fmt_e(p.pf.identity_bound) << '\n';
  out << "expansion residual: " << fmt_e(p.pf.expansion_residual) << '\n';

  std::ostringstream doc;
  doc << "{";
  append_manifest(doc, eff);
  doc << ",\n\"family\": {\"kind\": " << jstr(family_kind_name(p.family))
      << ", \"materialized\": " << p.P.entries().size()
      << ", \"truncation\": " << p.n
      << ", \"gap\": " << jnum(p.family.gap())
      << ", \"tail_weight\": " << jnum(p.P.tail_weight()) << "}";
  doc << ",\n\"case\": " << jstr(to_string(p.cls.kind));
  doc << ",\n\"near_degenerate\": " << jbool(p.cls.near_degenerate);
  doc << ",\n\"alternative\": " << jstr(p.cls.alternative);
  doc << ",\n\"margin\": " << jnum(p.cls.margin);
  doc << ",\n\"upper_zero_count\": " << p.cls.upper_zero_count;
  doc << ",\n";
  append_standard_roots(doc, p.cls.standard_roots);
  doc << ",\n";
  append_case_parameters(doc, p.cls, p.pf);
  doc << ",\n\"residue_identity\": {\"sum\": " << jnum(p.pf.identity_sum)
      << ", \"residual\": " << jnum(p.pf.identity_residual)
      << ", \"bound\": " << jnum(p.pf.identity_bound) << "}";
  doc << ",\n\"expansion_residual\": " << jnum(p.pf.expansion_residual);
  doc << "\n}\n";
  const std::string path = out_path(m, "classification.json");
  write_file_atomic(path, doc.str());
  out << "wrote " << path << '\n';

  return p.cls.near_degenerate ? kExitNearDegenerate : kExitOk;
}

int cmd_trace(const RunManifest& m, std::ostream& out) {
  MapPipeline p(m);
  const std::vector<double> grid = trace_grid(m);

  std::vector<std::size_t> indices = m.slits;
  const std::size_t count = p.P.entries().size();
  if (indices.empty()) {
    indices.resize(count);
    for (std::size_t i = 0; i < count; ++i) indices[i] = i;
  } else {
    for (std::size_t i : indices) {
      if (i >= count) {
        throw ConfigError("slit index " + std::to_string(i) +
                          " out of range (family has " +
                          std::to_string(count) + " materialized slits)");
      }
    }
  }
  RunManifest eff = m;
  eff.truncation = p.n;
  eff.grid_points = grid.size();
  eff.slits = indices;

  int exit_code = kExitOk;
  for (std::size_t n : indices) {
    const Trajectory tr = p.flow.trace_tip(n, grid);
    const std::string csv_name = "trace_slit" + std::to_string(n) + ".csv";
    write_file_atomic(out_path(m, csv_name), trajectory_csv(tr));

    std::ostringstream side;
    side << "{";
    append_manifest(side, eff);
    side << ",\n\"slit_index\": " << tr.slit_index
         << ", \"k\": " << jnum(tr.k)
         << ", \"limit_re\": " << jnum(tr.limit.real())
         << ", \"limit_im\": " << jnum(tr.limit.imag())
         << ", \"samples\": " << tr.samples.size()
         << ", \"t_reached\": " << jnum(tr.samples.back().t)
         << ", \"complete\": " << jbool(tr.complete)
         << ", \"failure\": " << jstr(tr.failure);
    side << ",\n\"approach\": ";

    std::string text_verdict;
    if (!tr.complete) {
      side << "{\"verdict\": \"unresolved\", \"reason\": "
           << jstr("trace incomplete: " + tr.failure) << "}";
      text_verdict = "unresolved (trace incomplete)";
      exit_code = kExitIncomplete;
    } else {
      try {
        const ApproachReport rep = approach_angle(tr, tr.limit, &p.map);
        side << "{\"verdict\": " << jstr(verdict_name(rep.verdict))
             << ", \"fitted_angle\": " << jnum(rep.fitted_angle)
             << ", \"confidence\": " << jnum(rep.confidence)
             << ", \"winding\": " << jnum(rep.winding)
             << ", \"tail_samples\": " << rep.tail_samples << "}";
        text_verdict = verdict_name(rep.verdict);
        if (std::isfinite(rep.fitted_angle)) {
          text_verdict += ", angle " + fmt_short(rep.fitted_angle) +
                          ", confidence " + fmt_e(rep.confidence);
        } else {
          text_verdict += ", winding " + fmt_short(rep.winding);
        }
      } catch (const std::exception& e) {
        side << "{\"verdict\": \"unresolved\", \"reason\": " << jstr(e.what())
             << "}";
        text_verdict = std::string("unresolved (") + e.what() + ")";
      }
    }
    side << "\n}\n";
    const std::string side_name =
        "trace_slit" + std::to_string(n) + "_angle.json";
    write_file_atomic(out_path(m, side_name), side.str());

    out << "slit " << n << ": k=" << fmt_short(tr.k) << ", "
        << tr.samples.size() << " samples to t=" << fmt_short(tr.samples.back().t)
        << (tr.complete ? "" : " (incomplete: " + tr.failure + ")") << ", "
        << text_verdict << ", wrote " << csv_name << '\n';
  }
  return exit_code;
}

int cmd_export_image(const RunManifest& m, std::ostream& out) {
  MapPipeline p(m);
  const std::size_t grid = m.grid_points ? m.grid_points : 4096;
  const ScanReport rep = p.map.image_boundary_scan(grid);
  RunManifest eff = m;
  eff.truncation = p.n;
  eff.grid_points = grid;

  std::ostringstream csv;
  csv << "x,re_h,im_h,branch_flags\n";
  for (const auto& s : rep.samples) {
    csv << format_g17(s.x) << ',' << format_g17(s.h.real()) << ','
        << format_g17(s.h.imag()) << ',' << s.branch_flags << '\n';
  }
  const std::string csv_path = out_path(m, "image.csv");
  write_file_atomic(csv_path, csv.str());

  std::ostringstream doc;
  doc << "{";
  append_manifest(doc, eff);
  doc << ",\n\"case\": " << jstr(to_string(rep.kind));
  doc << ", \"samples\": " << rep.samples.size();
  doc << ",\n\"summary\": {";
  switch (rep.kind) {
    case RootCase::ComplexPair:
      doc << "\"spiral_amplitude\": " << jnum(rep.spiral_amplitude);
      break;
    case RootCase::DistinctReal:
      doc << "\"theta1\": " << jnum(rep.theta1)
          << ", \"theta2\": " << jnum(rep.theta2)
          << ", \"amplitude\": " << jnum(rep.amplitude);
      break;
    default:
      doc << "\"im_levels\": [";
      for (std::size_t i = 0; i < rep.im_levels.size(); ++i) {
        if (i) doc << ", ";
        doc << jnum(rep.im_levels[i]);
      }
      doc << "], \"strip_width\": " << jnum(rep.strip_width)
          << ", \"tip_bound\": " << jnum(rep.tip_bound);
      break;
  }
  doc << "}";
  doc << ",\n\"tips\": [";
  const auto tips = p.map.tip_points();
  for (std::size_t i = 0; i < tips.size(); ++i) {
    if (i) doc << ", ";
    doc << "{\"index\": " << tips[i].index << ", \"k\": " << jnum(tips[i].k)
        << ", \"h_re\": " << jnum(tips[i].h.real())
        << ", \"h_im\": " << jnum(tips[i].h.imag())
        << ", \"truncation_artifact\": " << jbool(tips[i].truncation_artifact)
        << "}";
  }
  doc << "]\n}\n";
  write_file_atomic(out_path(m, "image_summary.json"), doc.str());

  out << "case: " << to_string(rep.kind) << ", " << rep.samples.size()
      << " boundary samples, wrote image.csv and image_summary.json\n";
  switch (rep.kind) {
    case RootCase::ComplexPair:
      out << "sector amplitude: " << fmt_short(rep.spiral_amplitude) << '\n';
      break;
    case RootCase::DistinctReal:
      out << "slit-free sector: [" << fmt_short(rep.theta2) << ", "
          << fmt_short(rep.theta1) << "], amplitude "
          << fmt_short(rep.amplitude) << '\n';
      break;
    default:
      out << "strip width: " << fmt_short(rep.strip_width)
          << ", tip bound: " << fmt_short(rep.tip_bound) << '\n';
      break;
  }
  return kExitOk;
}

namespace {

struct CheckRow {
  std::string name;
  double worst = 0.0;
  double bound = 0.0;
  bool greater_is_pass = false;
  bool pass = false;
  std::string note;
};

void add_check(std::vector<CheckRow>& rows, std::string name, double worst,
               double bound, bool greater_is_pass, std::string note = "") {
  bool pass = greater_is_pass ? (worst > bound) : (worst <= bound);
  if (!std::isfinite(worst)) pass = false;
  rows.push_back({std::move(name), worst, bound, greater_is_pass, pass,
                  std::move(note)});
}

Complex draw_interior(std::mt19937_64& rng, const PFunction& P, double im_lo) {
  std::uniform_real_distribution<double> ux(P.k_min() - 2.0, P.k_max() + 2.0);
  std::uniform_real_distribution<double> uy(im_lo, 3.0);
  for (int tries = 0; tries < 400; ++tries) {
    const Complex z(ux(rng), uy(rng));
    if (P.pole_distance(z) >= 0.05) return z;
  }
  throw ConvergenceError("interior sampler exhausted its draw budget");
}

// Fault hook: corrupts one expansion coefficient and the derived identity
// fields exactly the way a real defect in the expansion would surface.
PartialFraction corrupt_residue(const PartialFraction& pf) {
  PartialFraction bad = pf;
  const double bump = 1e-4;
  if (!bad.residues.empty()) {
    bad.residues[0] += bump;
    bad.identity_sum += bump;
  } else {
    switch (bad.kind) {
      case RootCase::ComplexPair: {
        const double before = 2.0 * std::cos(bad.psi) * std::abs(bad.residue_beta);
        bad.residue_beta += bump;
        const double after = 2.0 * std::cos(bad.psi) * std::abs(bad.residue_beta);
        bad.identity_sum += after - before;
        break;
      }
      case RootCase::DistinctReal:
        bad.residue_rho1 += bump;
        bad.identity_sum += bump;
        break;
      default:
        bad.residue_rho0 += bump;
        bad.identity_sum += bump;
        break;
    }
  }
  bad.identity_residual = std::abs(bad.identity_sum - 1.0);
  return bad;
}

}  // namespace

int cmd_validate(const RunManifest& m, std::ostream& out) {
  MapPipeline p(m);
  RunManifest eff = m;
  eff.truncation = p.n;
  std::mt19937_64 rng(m.seed);
  std::vector<CheckRow> rows;

  // 1. quotient decompositions at random admissible points
  {
    double worst = 0.0;
    int accepted = 0;
    std::uniform_real_distribution<double> ux(p.P.k_min() - 2.0,
                                              p.P.k_max() + 2.0);
    std::uniform_real_distribution<double> uy(0.3, 3.0);
    int guard = 0;
    while (accepted < 20 && guard++ < 4000) {
      const Complex z(ux(rng), uy(rng));
      const Complex w(ux(rng), uy(rng));
      const Complex l1(ux(rng), 0.0), l2(ux(rng), 0.0);
      if (std::abs(z - w) < 0.1 || std::abs(l1 - l2) < 0.1) continue;
      if (p.P.pole_distance(z) < 0.1 || p.P.pole_distance(w) < 0.1 ||
          p.P.pole_distance(l1) < 0.1 || p.P.pole_distance(l2) < 0.1 ||
          std::abs(z - l1) < 0.1) {
        continue;
      }
      const Complex fd = p.P.F_direct(z, w);
      worst = std::max(worst, std::abs(fd - p.P.F_decomposed(z, w)) /
                                  (1.0 + std::abs(fd)));
      const Complex hd = p.P.H_direct(z, l1, l2);
      worst = std::max(worst, std::abs(hd - p.P.H_decomposed(z, l1, l2)) /
                                  (1.0 + std::abs(hd)));
      const Complex gd = p.P.G_direct(z, l1);
      worst = std::max(worst, std::abs(gd - p.P.G_decomposed(z, l1)) /
                                  (1.0 + std::abs(gd)));
      ++accepted;
    }
    add_check(rows, "pole decomposition agreement", worst, 1e-10, false,
              accepted < 20 ? "sampler starved" : "");
    if (accepted < 20) rows.back().pass = false;
  }

  // 2. residue identity (optionally with the injected fault)
  {
    const PartialFraction* pf = &p.pf;
    PartialFraction bad;
    std::string note;
    if (m.inject_residue_error) {
      bad = corrupt_residue(p.pf);
      pf = &bad;
      note = "fault injected";
    }
    const double bound = std::max(1e-10, pf->identity_bound);
    add_check(rows, "residue identity", verify_residue_identity(*pf), bound,
              false, note);
  }

  // 3. univalence: distinct points must keep distinct h-values
  {
    const std::size_t pairs = 1000;
    std::vector<Complex> pts(2 * pairs);
    for (auto& z : pts) z = draw_interior(rng, p.P, 0.05);
    std::vector<double> sep(pairs, kInfD);
    parallel_for(pairs, [&](std::size_t i) {
      const Complex z1 = pts[2 * i], z2 = pts[2 * i + 1];
      if (std::abs(z1 - z2) < 1e-6) return;  // skip near-coincident draws
      const Complex h1 = p.map.eval_h(z1).value;
      const Complex h2 = p.map.eval_h(z2).value;
      sep[i] = std::abs(h1 - h2) / (1.0 + std::abs(h1) + std::abs(h2));
    });
    const double worst = *std::min_element(sep.begin(), sep.end());
    add_check(rows, "univalence separation", worst, 1e-12, true);
  }

  // 4. spiral invariance margin (conjugate-pair images only)
  if (p.cls.kind == RootCase::ComplexPair) {
    std::vector<Complex> sample(100);
    for (auto& z : sample) z = draw_interior(rng, p.P, 0.05);
    add_check(rows, "spirallike margin", p.map.spirallike_margin(sample), 0.0,
              true);
  }

  // 5./6. the base point only shifts the gauge: h changes by one constant
  // factor (or offset), the flow not at all
  {
    const bool multiplicative = p.cls.kind == RootCase::ComplexPair ||
                                p.cls.kind == RootCase::DistinctReal;
    const Complex alts[4] = {{0.0, 2.0}, {1.0, 1.5}, {-1.3, 0.8}, {0.4, 2.2}};
    std::vector<Complex> probes;
    while (probes.size() < 4) {
      const Complex z = draw_interior(rng, p.P, 0.3);
      if (std::abs(p.map.eval_h(z).value) >= 1e-3) probes.push_back(z);
    }
    const double ts[2] = {0.35, 0.8};
    Complex base_f[4];
    for (int j = 0; j < 4; ++j) {
      base_f[j] = p.flow.eval_f(probes[j % 2], ts[j / 2]);
    }
    double worst_gauge = 0.0;
    double worst_flow = 0.0;
    for (const Complex& z0 : alts) {
      const KoenigsMap alt(p.P, p.cls, p.pf, z0);
      Complex c0{0.0, 0.0};
      for (std::size_t j = 0; j < probes.size(); ++j) {
        const Complex hb = p.map.eval_h(probes[j]).value;
        const Complex ha = alt.eval_h(probes[j]).value;
        const Complex c = multiplicative ? ha / hb : ha - hb;
        if (j == 0) {
          c0 = c;
        } else {
          const double scale = multiplicative ? std::abs(c0) : 1.0 + std::abs(c0);
          worst_gauge = std::max(worst_gauge, std::abs(c - c0) / scale);
        }
      }
      const FlowEvaluator aflow(alt);
      for (int j = 0; j < 4; ++j) {
        const Complex fa = aflow.eval_f(probes[j % 2], ts[j / 2]);
        worst_flow = std::max(worst_flow, std::abs(fa - base_f[j]) /
                                              (1.0 + std::abs(base_f[j])));
      }
    }
    add_check(rows, "gauge constancy across base points", worst_gauge, 1e-9,
              false);
    add_check(rows, "flow invariance across base points", worst_flow, 1e-8,
              false);
  }

  // 7./8./9. conjugation formula vs direct numerics
  {
    const double round_tol = m.tol.value_or(1e-6);
    const double ts[4] = {0.3, 0.55, 0.8, 0.92};
    std::vector<std::pair<Complex, double>> sample;
    for (int i = 0; i < 8; ++i) {
      sample.emplace_back(draw_interior(rng, p.P, 0.3), ts[i % 4]);
    }
    const FlowReport fr = validate_flow(p.flow, sample, round_tol);
    add_check(rows, "flow round trip", fr.worst_round_trip, round_tol, false);
    add_check(rows, "flow pde residual", fr.worst_pde_residual, 1e-5, false);
    double hydro_ratio = 0.0;
    bool hydro_ok = true;
    for (const auto& row : fr.hydrodynamic) {
      hydro_ratio = std::max(hydro_ratio, row.value / row.bound);
      hydro_ok = hydro_ok && row.pass;
    }
    add_check(rows, "hydrodynamic decay ratio", hydro_ratio, 1.0, false);
    if (!hydro_ok) rows.back().pass = false;
  }

  // 10. every traced tip must land in the verdict class of its case
  {
    const auto tips = p.map.tip_points();
    std::vector<std::size_t> tip_idx;
    if (tips.size() <= 16) {
      for (std::size_t i = 0; i < tips.size(); ++i) tip_idx.push_back(i);
    } else {
      // deterministic spread: ends plus every eighth interior tip
      for (std::size_t i = 0; i < 4; ++i) tip_idx.push_back(i);
      for (std::size_t i = 8; i + 4 < tips.size(); i += 8) tip_idx.push_back(i);
      for (std::size_t i = tips.size() - 4; i < tips.size(); ++i)
        tip_idx.push_back(i);
    }
    const std::vector<double> grid = FlowEvaluator::default_t_grid(m.t_max);
    std::vector<double> dev(tip_idx.size(), kInfD);
    std::vector<double> side(tip_idx.size(), 0.0);
    std::vector<std::string> notes(tip_idx.size());
    parallel_for(tip_idx.size(), [&](std::size_t j) {
      const std::size_t n = tip_idx[j];
      const Trajectory tr = p.flow.trace_tip(n, grid);
      if (!tr.complete) {
        notes[j] = "slit " + std::to_string(n) + ": trace incomplete";
        return;
      }
      ApproachReport rep;
      try {
        rep = approach_angle(tr, tr.limit, &p.map);
      } catch (const std::exception& e) {
        notes[j] = "slit " + std::to_string(n) + ": " + e.what();
        return;
      }
      switch (p.cls.kind) {
        case RootCase::ComplexPair:
          if (rep.verdict == ApproachVerdict::Spiral ||
              rep.verdict == ApproachVerdict::Radial) {
            dev[j] = 0.0;
          }
          break;
        case RootCase::DistinctReal:
          if (rep.verdict == ApproachVerdict::NonTangential) {
            dev[j] = std::abs(rep.fitted_angle -
                              (kPi - std::arg(tips[n].h)));
          }
          break;
        case RootCase::DoubleRoot:
          if (rep.verdict == ApproachVerdict::Tangential) {
            dev[j] = 0.0;
            side[j] = rep.fitted_angle;
          }
          break;
        case RootCase::TripleRoot:
          if (rep.verdict == ApproachVerdict::Orthogonal) {
            dev[j] = std::abs(rep.fitted_angle - 0.5 * kPi);
          }
          break;
      }
      if (!std::isfinite(dev[j])) {
        notes[j] = "slit " + std::to_string(n) + ": verdict " +
                   verdict_name(rep.verdict) + " outside the expected class";
      }
    });
    double worst = 0.0;
    std::string note;
    for (std::size_t j = 0; j < dev.size(); ++j) {
      worst = std::max(worst, dev[j]);
      if (!notes[j].empty() && note.empty()) note = notes[j];
    }
    if (p.cls.kind == RootCase::DoubleRoot) {
      for (std::size_t j = 1; j < side.size(); ++j) {
        if (side[j] != side[0]) {
          worst = kInfD;
          note = "tangential tips land on both sides";
        }
      }
    }
    add_check(rows, "verdict agreement", worst, 0.02, false, note);
  }

  // report
  std::size_t passed = 0;
  for (const auto& r : rows) passed += r.pass ? 1 : 0;
  const bool all_pass = passed == rows.size();

  char line[200];
  std::snprintf(line, sizeof line, "%-36s %11s    %-14s %s", "check",
                "measured", "bound", "result");
  out << line << '\n';
  for (const auto& r : rows) {
    const std::string bound_txt =
        std::string(r.greater_is_pass ? "> " : "<= ") + fmt_e(r.bound);
    std::snprintf(line, sizeof line, "%-36s %11s    %-14s %s",
                  r.name.c_str(), fmt_e(r.worst).c_str(), bound_txt.c_str(),
                  r.pass ? "pass" : "FAIL");
    out << line;
    if (!r.note.empty()) out << "  (" << r.note << ")";
    out << '\n';
  }
  out << "overall: " << (all_pass ? "pass" : "FAIL") << " (" << passed << "/"
      << rows.size() << " checks)\n";

  std::ostringstream doc;
  doc << "{";
  append_manifest(doc, eff);
  doc << ",\n\"case\": " << jstr(to_string(p.cls.kind));
  doc << ",\n\"checks\": [";
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& r = rows[i];
    if (i) doc << ",";
    doc << "\n  {\"name\": " << jstr(r.name) << ", \"worst\": " << jnum(r.worst)
        << ", \"bound\": " << jnum(r.bound) << ", \"comparison\": "
        << jstr(r.greater_is_pass ? "gt" : "le")
        << ", \"pass\": " << jbool(r.pass) << ", \"note\": " << jstr(r.note)
        << "}";
  }
  doc << "\n],\n\"passed\": " << passed << ", \"total\": " << rows.size()
      << ", \"pass\": " << jbool(all_pass) << "\n}\n";
  write_file_atomic(out_path(m, "validation.json"), doc.str());

  return all_pass ? kExitOk : kExitValidation;
}

int run_cli(int argc, const char* const* argv, std::ostream& out,
            std::ostream& err) {
  CLI::App app{"explicit chordal Loewner flows for square-root driving families"};
  app.require_subcommand(1);

  RunManifest m;
  double tol_in = 0.0;
  std::vector<CLI::Option*> tol_opts;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", m.config_path, "slit family JSON file")
        ->required();
    sub->add_option("--n-trunc", m.truncation,
                    "truncation override (0: family default)");
    sub->add_option("--t-max", m.t_max, "upper end of the time grid, in (0,1)");
    sub->add_option("--grid-points", m.grid_points,
                    "grid size (0: per-command default)");
    tol_opts.push_back(sub->add_option(
        "--tol", tol_in,
        "tolerance override (classify: root polish; validate: round trip)"));
    sub->add_option("--out", m.out_dir, "output directory");
    sub->add_option("--seed", m.seed, "seed for randomized sweeps");
  };

  CLI::App* classify =
      app.add_subcommand("classify", "resolve the root case of the family");
  CLI::App* trace = app.add_subcommand(
      "trace", "trace slit trajectories and fit their limit angles");
  trace->add_option("--slits", m.slits, "slit indices (default: all)")
      ->delimiter(',');
  CLI::App* validate =
      app.add_subcommand("validate", "run the cross-validation suite");
  validate->add_flag("--inject-residue-error", m.inject_residue_error)
      ->group("");
  CLI::App* export_image = app.add_subcommand(
      "export-image", "sample the boundary image of the conjugating map");
  for (CLI::App* sub : {classify, trace, validate, export_image}) {
    add_common(sub);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitConfig;
  }
  for (CLI::Option* o : tol_opts) {
    if (o->count() > 0) m.tol = tol_in;
  }
  m.command = app.get_subcommands().front()->get_name();

  try {
    if (m.command == "classify") return cmd_classify(m, out);
    if (m.command == "trace") return cmd_trace(m, out);
    if (m.command == "validate") return cmd_validate(m, out);
    return cmd_export_image(m, out);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitConfig;
  }
}

}  // namespace loewner
