#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"
#include "pxmc/param_tree.hpp"
#include "pxmc/sample_set.hpp"

namespace pxmc {

// Checkpoint layout, all integers little-endian:
//   "PXS1" | u32 version | u32 count |
//   count x (u32 name length | name | u32 rank | rank x u64 dim | f64 payload) |
//   u32 CRC-32 of every preceding byte
inline constexpr std::uint32_t kCheckpointVersion = 1;

std::vector<std::uint8_t> encode_tree(const ParamTree& tree);
ParamTree decode_tree(const std::vector<std::uint8_t>& bytes);

void save_tree(const ParamTree& tree, const std::string& path);
ParamTree load_tree(const std::string& path);

// A SampleSet is stored as one tree: for sample m, an entry "s<m>/meta"
// holding (cycle, step, phase) followed by its parameters as "s<m>/<name>".
ParamTree pack_samples(const SampleSet& samples);
SampleSet unpack_samples(const ParamTree& tree);

void save_samples(const SampleSet& samples, const std::string& path);
SampleSet load_samples(const std::string& path);

/// Run metadata next to a checkpoint, at `path + ".json"`.
std::string sidecar_path(const std::string& path);
void write_sidecar(const std::string& path, const nlohmann::ordered_json& meta);
nlohmann::ordered_json read_sidecar(const std::string& path);

}  // namespace pxmc
