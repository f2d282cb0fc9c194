#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "gaitwave/hash.hpp"
#include "gaitwave/nn/optim.hpp"
#include "gaitwave/nn/params.hpp"

namespace gaitwave::nn {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct CheckpointRecord {
  std::string name;
  Shape shape;
  std::vector<float> values;
};

/// Binary layout (little-endian): "WCKP", u32 version, 32-byte config hash,
/// u64 seed, u64 step, then records until end of file. A record is u32 name
/// length, name bytes, u32 rank, rank x u32 dims, numel x f32.
struct Checkpoint {
  Sha256 config_hash{};
  std::uint64_t seed = 0;
  std::uint64_t step = 0;
  std::vector<CheckpointRecord> records;

  const CheckpointRecord* find(const std::string& name) const;
};

std::string encode_checkpoint(const Checkpoint& ckpt);
Checkpoint decode_checkpoint(std::string_view bytes, const std::string& origin);
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Parameters and buffers, then "adam.m.<name>" / "adam.v.<name>" moments
/// when an optimizer is given.
template <typename Real>
Checkpoint capture(const ParamStore<Real>& store, const Adam<Real>* adam, const Sha256& config_hash,
                   std::uint64_t seed);

/// Restores every store entry (and optimizer moments when given); a missing
/// or misshapen record throws ShapeMismatch.
template <typename Real>
void restore(const Checkpoint& ckpt, ParamStore<Real>& store, Adam<Real>* adam);

}  // namespace gaitwave::nn
