#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>

#include "mapcover/config.hpp"

namespace mapcover {

struct RunOptions {
  std::optional<std::uint64_t> seed;        // overrides micro.seed
  std::optional<std::filesystem::path> out; // exact run directory
  int threads = 1;
};

struct Manifest {
  std::string version;
  int format = 0;
  std::uint64_t seed = 0;
  std::string config_hash;
  std::map<std::string, std::string> checksums;  // file name -> fnv1a-64 hex

  std::string to_json() const;
};

struct PipelineResult {
  std::filesystem::path run_dir;
  Manifest manifest;
};

// FNV-1a 64-bit over raw bytes, lowercase hex. Used for config hashes and the
// per-file checksums recorded in the manifest.
std::string fnv1a_hex(const std::string& bytes);
std::string file_checksum(const std::filesystem::path& path);

// Runs the stages enabled by the config (mapping / coverage / microscopic
// validation), writes all artifacts plus manifest.json into a fresh run
// directory (default: output.dir/run-<confighash>-<timestamp>, or opts.out,
// which must not already contain files). Fixed seed and thread count do not
// change any checksum.
PipelineResult run_pipeline(const ScenarioConfig& cfg,
                            const RunOptions& opts = {});

// Microscopic ensemble under the mapping sweep only (no inverse solve):
// event log, empirical cumulative counts, final-position density and optional
// trajectories. Requires [mapping] and [micro].
PipelineResult run_simulate(const ScenarioConfig& cfg,
                            const RunOptions& opts = {});

}  // namespace mapcover
