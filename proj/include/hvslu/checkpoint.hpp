#pragma once

#include "hvslu/layers.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

namespace hvslu {

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr const char* kCheckpointMagic = "HVSLU1";

struct TensorRecord {
  std::string name;
  Shape shape;
  std::vector<double> values;

  friend bool operator==(const TensorRecord&, const TensorRecord&) = default;
};

// Layout, all integers little-endian:
//   "HVSLU1\n"
//   u64 manifest length, manifest JSON bytes
//   u64 record count
//   per record: u32 name length, name, u32 rank, rank x u64 dims,
//               numel x f64 values
struct Checkpoint {
  nlohmann::json manifest;
  std::vector<TensorRecord> records;

  void add(const ParamList& params);
  const TensorRecord& find(const std::string& name) const;
  bool contains(const std::string& name) const;
  // Copies stored values into `params`, requiring matching names and shapes.
  void restore(const ParamList& params) const;
};

std::string serialize_checkpoint(const Checkpoint& ckpt);
Checkpoint parse_checkpoint(const std::string& bytes);
void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, const std::string& bytes);

}  // namespace hvslu
