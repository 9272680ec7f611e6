#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "rfim/common.hpp"
#include "rfim/sampler.hpp"

namespace rfim {

/// JSON sidecar of a snapshot.
struct SnapshotMeta {
  std::string kind;        ///< "disorder" or "spins"
  Index count = 0;
  double mesh = 0.0;
  std::uint64_t seed = 0;
  std::uint64_t replica = 0;
  std::int64_t sweep = -1;  ///< spins only
  std::string law;          ///< disorder only
};

/// `base`.bin holds little-endian float64 in site order; `base`.json the metadata.
void write_disorder_snapshot(const std::filesystem::path& base, const VectorX& omega, SnapshotMeta meta);
VectorX read_disorder_snapshot(const std::filesystem::path& base, SnapshotMeta* meta = nullptr);

/// `base`.bin packs one bit per site, LSB first, bit set for σ = -1.
void write_spin_snapshot(const std::filesystem::path& base, const SpinVector& spins, SnapshotMeta meta);
SpinVector read_spin_snapshot(const std::filesystem::path& base, SnapshotMeta* meta = nullptr);

/// Writes to a temporary sibling, then renames.
void write_file_atomic(const std::filesystem::path& path, const std::string& content);
std::string read_file(const std::filesystem::path& path);

/// 128-bit content hash as 32 hex digits.
std::string content_hash(const std::string& data);

}  // namespace rfim
