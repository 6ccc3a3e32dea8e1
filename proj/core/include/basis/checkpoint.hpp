#pragma once

#include <filesystem>
#include <optional>
#include <stdexcept>

#include "basis/pretrain.hpp"

namespace basis {

// Integrity failures (bad magic, checksum mismatch, block-shape mismatch).
struct CheckpointError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
// Well-formed file written by an incompatible format version.
struct CheckpointVersionError : CheckpointError {
  using CheckpointError::CheckpointError;
};

enum class ModelKind { basis, dqn };

// Binary model snapshot: magic "BASISCKPT1", format version, model kind, the
// architecture spec, named float32 little-endian parameter blocks, and a
// trailing 64-bit checksum of everything before it.
void save_checkpoint(const BasisModel& model, const std::filesystem::path& path);
void save_checkpoint(const DqnModel& model, const std::filesystem::path& path);

struct LoadedCheckpoint {
  ModelKind kind = ModelKind::basis;
  std::optional<BasisModel> basis;
  std::optional<DqnModel> dqn;
};

LoadedCheckpoint load_checkpoint(const std::filesystem::path& path);
BasisModel load_basis_checkpoint(const std::filesystem::path& path);
DqnModel load_dqn_checkpoint(const std::filesystem::path& path);

}  // namespace basis
