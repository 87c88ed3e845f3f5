#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "ash/optim.hpp"
#include "ash/tensor.hpp"

namespace ash {

/// Versioned container of named parameter arrays plus string metadata.
/// Binary format (little-endian host):
///   "ASHCKPT1"
///   u32 meta count,   { u32 key len, key, u32 value len, value }*
///   u32 tensor count, { u32 name len, name, u32 ndim, i32 dims[], f64 data[] }*
/// Entries keep insertion order, so serialization is deterministic.
class Checkpoint {
 public:
  void set_meta(const std::string& key, const std::string& value);
  std::optional<std::string> get_meta(const std::string& key) const;

  void add(const std::string& name, const Tensor& t);
  const Tensor* find(const std::string& name) const;

  const std::vector<std::pair<std::string, Tensor>>& tensors() const { return tensors_; }
  const std::vector<std::pair<std::string, std::string>>& meta() const { return meta_; }

  std::string serialize() const;
  void save(const std::filesystem::path& path) const;
  static Checkpoint deserialize(const std::string& bytes);
  static Checkpoint load(const std::filesystem::path& path);

  /// FNV-1a over the serialized bytes.
  uint64_t digest() const;

 private:
  std::vector<std::pair<std::string, std::string>> meta_;
  std::vector<std::pair<std::string, Tensor>> tensors_;
};

/// Store a parameter list under its names.
void checkpoint_add_params(Checkpoint& ckpt, const std::vector<NamedParam>& params);
/// Copy data back into live parameters; shapes must match, every name must
/// be present.
void checkpoint_load_params(const Checkpoint& ckpt, std::vector<NamedParam>& params);

}  // namespace ash
