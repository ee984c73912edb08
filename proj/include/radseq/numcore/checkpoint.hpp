#pragma once

#include "radseq/numcore/graph.hpp"

#include <json.hpp>

#include <filesystem>
#include <stdexcept>
#include <string>

namespace radseq::num {

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Container layout:
//   8 bytes  magic "RSQCKPT\0"
//   8 bytes  header length n, little-endian u64
//   n bytes  UTF-8 JSON header; "tensors" lists {name, shape} in block order
//   blocks   float64 little-endian values, row-major, one per tensor
inline constexpr char kCheckpointMagic[8] = {'R', 'S', 'Q', 'C', 'K', 'P', 'T', '\0'};

/// `meta` is stored alongside the tensor table and returned by read_checkpoint_header.
void save_checkpoint(const std::filesystem::path& path, const ParameterSet& params,
                     const nlohmann::json& meta);

nlohmann::json read_checkpoint_header(const std::filesystem::path& path);

/// Fills `params` (names and shapes must match exactly) and returns the header.
nlohmann::json load_checkpoint(const std::filesystem::path& path, ParameterSet& params);

/// FNV-1a over the file bytes.
std::uint64_t file_hash(const std::filesystem::path& path);

}  // namespace radseq::num
