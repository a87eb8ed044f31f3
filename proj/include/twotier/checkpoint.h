#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "twotier/parameters.h"
#include "twotier/tensor.h"

namespace twotier {

// Binary model file shared by the sentence encoders and the classifier.
//
// Layout (all integers little-endian):
//   "TTCK" magic, u32 format version
//   u32 metadata count, then (u32 length, bytes) key/value pairs
//   u32 block count, then per block: u32 name length, name bytes, u32 rank,
//   u64 extent per axis, row-major IEEE-754 binary64 values
// Values are stored bit for bit, so a write/read cycle is exact.
struct Checkpoint {
  static constexpr std::uint32_t kVersion = 1;

  std::map<std::string, std::string> metadata;
  std::vector<std::pair<std::string, Tensor>> blocks;

  const Tensor& block(const std::string& name) const;
  const std::string& meta(const std::string& key) const;

  void add_parameters(const ParameterSet& params);
  // Copies every block named like a parameter of `params` into it; shapes
  // must match and no parameter may be missing.
  void load_parameters(ParameterSet& params) const;
};

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint);
Checkpoint read_checkpoint(const std::filesystem::path& path);

}  // namespace twotier
