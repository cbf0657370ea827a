#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>

#include "scott/params.hpp"

namespace scott {

/// On-disk checkpoint. Byte layout (all integers little-endian):
///
///   "SCOTTCKP"                      8-byte magic
///   u32 version                     currently 1
///   u64 config digest               FNV-1a 64 of the config text below
///   u32 n, n bytes                  canonical config text
///   u32 m, then m × (str key, str value)   metadata (step, RNG state, ...)
///   u32 t, then t × tensor record
///   u64 checksum                    FNV-1a 64 of every preceding byte
///
/// where str is (u32 length, bytes) and a tensor record is
///   str name, u8 dtype (0 = f32, 1 = f64), u8 ndim, ndim × u64 extent,
///   product(extents) × element, little-endian IEEE-754.
struct Checkpoint {
  std::string config_text;
  std::map<std::string, std::string> meta;
  NamedTensors<float> tensors;

  std::uint64_t config_digest() const;
  /// First tensor with this name; throws CheckpointError if absent.
  const Tensor<float>& tensor(const std::string& name) const;
  /// Tensors whose names start with `prefix`, prefix stripped, in file order.
  NamedTensors<float> group(const std::string& prefix) const;
  void add_group(const std::string& prefix, const NamedTensors<float>& named);
  const std::string& meta_value(const std::string& key) const;
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

/// Written to a temporary file and renamed into place.
void write_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
/// Throws CheckpointError on a missing file, bad magic/version/digest/checksum
/// or truncation.
Checkpoint read_checkpoint(const std::filesystem::path& path);

}  // namespace scott
