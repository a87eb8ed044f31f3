#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "twotier/harness.h"

namespace twotier {

// Everything a CLI run can be configured with. Built from a flat key=value
// file; every key is checked against a fixed schema before any work starts.
struct RunConfig {
  PipelineConfig pipeline;
  std::uint64_t seed = 1;
  std::size_t repeats = 3;
  // Empty means seed, seed+1, ... (repeats values).
  std::vector<std::uint64_t> seeds;
  // Inputs produced by earlier stages.
  std::optional<std::filesystem::path> corpus;
  std::optional<std::filesystem::path> word_vectors;
  std::optional<std::filesystem::path> sentence_model;
  std::size_t nn_k = 10;

  std::vector<std::uint64_t> harness_seeds() const;
};

// Parses "key = value" lines; '#' starts a comment line. Unknown keys,
// repeated keys and values that do not parse are FormatErrors naming the
// line.
RunConfig parse_run_config(const std::string& text);
RunConfig load_run_config(const std::filesystem::path& path);

// The accepted keys with one-line descriptions, in schema order.
std::vector<std::pair<std::string, std::string>> run_config_keys();

}  // namespace twotier
