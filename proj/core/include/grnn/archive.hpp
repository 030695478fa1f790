#ifndef GRNN_ARCHIVE_HPP
#define GRNN_ARCHIVE_HPP

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "grnn/model.hpp"
#include "grnn/tensor.hpp"

namespace grnn {

// Self-describing binary tensor container (all integers little-endian):
//
//   magic   "GRNN" (4 bytes)
//   u16     format version (currently 1)
//   u32     tensor count
//   per tensor: u16 name length, name (UTF-8), u8 dtype tag (0 = f32),
//               u8 rank (1..4), u32 dims[rank], u64 byte offset into the
//               payload
//   payload: contiguous little-endian f32 data, starting right after the
//            table
//
// Offsets must be in-bounds and non-overlapping, names unique; a load of a
// save is bit-exact.
class WeightArchive {
 public:
  struct Entry {
    std::string name;
    std::vector<uint32_t> dims;  // rank 1..4
    std::vector<float> data;

    uint64_t numel() const {
      uint64_t n = 1;
      for (uint32_t d : dims) n *= d;
      return n;
    }
  };

  static constexpr uint16_t kVersion = 1;

  void add(const std::string& name, std::vector<uint32_t> dims,
           std::vector<float> data);
  const Entry* find(const std::string& name) const;
  const std::vector<Entry>& entries() const { return entries_; }
  size_t size() const { return entries_.size(); }

  void save(const std::filesystem::path& path) const;
  static WeightArchive load(const std::filesystem::path& path);

 private:
  std::vector<Entry> entries_;
};

// Model glue: conv weights stored rank-4, biases rank-1.
WeightArchive weights_to_archive(const GrnnWeights& w, const GrnnConfig& cfg);

// Rebuilds the model config from tensor names/shapes (channel count, block
// count, ghost ratio and kernels, scale) and validates every shape.
std::pair<GrnnWeights, GrnnConfig> weights_from_archive(
    const WeightArchive& ar);

}  // namespace grnn

#endif  // GRNN_ARCHIVE_HPP
