#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "advrl/model.hpp"

namespace advrl {

/// File layout, all integers little-endian:
///   "ADVRLB01"                      8 bytes
///   header length                   u64
///   header                          UTF-8 JSON (architecture, metadata,
///                                   tensors: name/shape/offset)
///   payload                         float64 values, tensors back to back
///   CRC32 of every preceding byte   u32
inline constexpr char kCheckpointMagic[] = "ADVRLB01";

class CheckpointError : public std::runtime_error {
 public:
  enum class Kind { Io, BadMagic, Version, Truncated, Checksum, Malformed };
  CheckpointError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

std::vector<unsigned char> encode_checkpoint(const Model& model);
Model decode_checkpoint(const std::vector<unsigned char>& bytes);

void save_checkpoint(const Model& model, const std::filesystem::path& path);
Model load_checkpoint(const std::filesystem::path& path);

}  // namespace advrl
