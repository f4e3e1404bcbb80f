#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "loewner/common.hpp"

namespace loewner {

// One fully pinned command run. Identical manifests produce byte-identical
// output files: the seed is fixed, every sum runs in a fixed order, and all
// floats are rendered through the same 17-significant-digit formatter.
struct RunManifest {
  std::string command;
  std::string config_path;
  std::size_t truncation = 0;   // 0: family default
  double t_max = 1.0 - 1e-6;    // upper end of trace grids
  std::size_t grid_points = 0;  // 0: per-command default
  std::optional<double> tol;    // unset: per-command default
  std::string out_dir = ".";
  std::vector<std::size_t> slits;  // trace: empty means every slit
  std::uint64_t seed = 0x5eedbeefULL;
  bool inject_residue_error = false;  // validate: fault hook for the fail path
};

// Process exit codes shared by all commands.
inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 1;          // bad flags, config, evaluation
inline constexpr int kExitNearDegenerate = 2;  // classify: margin below envelope
inline constexpr int kExitValidation = 3;      // validate: some check failed
inline constexpr int kExitIncomplete = 4;      // trace: continuation gave up

// Human-readable report on `out`; structured documents and CSVs under
// m.out_dir. Throws ConfigError and friends on unusable input; run_cli maps
// those to kExitConfig.
int cmd_classify(const RunManifest& m, std::ostream& out);
int cmd_trace(const RunManifest& m, std::ostream& out);
int cmd_validate(const RunManifest& m, std::ostream& out);
int cmd_export_image(const RunManifest& m, std::ostream& out);

// Full argv front end: parses flags, dispatches, converts errors to exit
// codes and diagnostics on `err`.
int run_cli(int argc, const char* const* argv, std::ostream& out,
            std::ostream& err);

// Round-trip-exact decimal rendering used for every float written to CSV or
// JSON (17 significant digits; "null" for non-finite values in JSON).
std::string format_g17(double x);

// Writes content through a temp file plus rename so a reader can never
// observe a partially written file. Creates missing parent directories.
void write_file_atomic(const std::string& path, const std::string& content);

// Worker cap from LOEWNER_THREADS; 1 when unset. Throws ConfigError on a
// value that is not a positive integer.
std::size_t thread_cap();

}  // namespace loewner
