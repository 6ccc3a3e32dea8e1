#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>

#include "basis/eval.hpp"

namespace basis {

// Distinct error families so callers can map failures onto process exit codes.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct InputFileError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ExpertConfig {
  double temperature = 1.0;  // demonstrator softmax temperature
  int demo_count = 1000;
  uint64_t seed = 0;
  void validate() const;
};

// One document drives a whole run. Sections: [env], [pretrain], [irl],
// [eval], [expert]; the global `seed` key fans out to any section whose own
// seed was not set explicitly.
struct RunConfig {
  uint64_t seed = 0;
  long enumeration_cap = 400000;
  EnvConfig env;
  PretrainConfig pretrain;
  IRLConfig irl;
  EvalConfig eval;
  ExpertConfig expert;
  void validate() const;  // throws ConfigError
};

// Parses the INI text; unknown sections or keys are rejected. Sections whose
// seed key is absent get one derived from the global seed by named stream.
RunConfig parse_run_config(const std::string& text);
RunConfig load_run_config(const std::filesystem::path& path);

// Overwrites every section seed from the root seed by named stream; the
// --seed override path uses this so one value re-keys the whole run.
void reseed_from_root(RunConfig& config);

// Full resolved echo, parse_run_config(render_run_config(c)) reproduces c.
std::string render_run_config(const RunConfig& config);
void write_run_config(const RunConfig& config, const std::filesystem::path& path);

}  // namespace basis
