#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace graphuil {

/// Dense row-major matrix of doubles; row-major keeps node rows contiguous.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Named parameter blocks in insertion order.
class ParamSet {
 public:
  struct Block {
    std::string name;
    Matrix value;
  };

  /// Adds a block. Throws std::invalid_argument on a duplicate name.
  Matrix& add(std::string name, Matrix value);

  bool contains(std::string_view name) const { return find(name) != npos; }
  std::size_t index_of(std::string_view name) const;  // throws when absent
  Matrix& at(std::string_view name) { return blocks_[index_of(name)].value; }
  const Matrix& at(std::string_view name) const { return blocks_[index_of(name)].value; }

  std::size_t size() const noexcept { return blocks_.size(); }
  Block& operator[](std::size_t i) { return blocks_[i]; }
  const Block& operator[](std::size_t i) const { return blocks_[i]; }
  auto begin() { return blocks_.begin(); }
  auto end() { return blocks_.end(); }
  auto begin() const { return blocks_.begin(); }
  auto end() const { return blocks_.end(); }

  /// Same names and shapes, all zeros.
  ParamSet zeros_like() const;
  std::size_t scalar_count() const;
  bool same_layout(const ParamSet& other) const;

  /// Copies every block of `other` in with `prefix` prepended to its name.
  void append(const ParamSet& other, std::string_view prefix);
  /// Blocks whose names start with `prefix`, with the prefix stripped.
  ParamSet extract(std::string_view prefix) const;

  friend bool operator==(const ParamSet& a, const ParamSet& b);

 private:
  static constexpr std::size_t npos = static_cast<std::size_t>(-1);
  std::size_t find(std::string_view name) const;

  std::vector<Block> blocks_;
};

// Binary container:
//   magic "GUILPSET", u32 version (=1), u64 block count, then per block
//   u32 name length, name bytes, u64 rows, u64 cols, rows*cols f64 row-major.
// All integers and doubles little-endian.
inline constexpr std::uint32_t kParamFormatVersion = 1;

std::string serialize_params(const ParamSet& params);
ParamSet deserialize_params(const std::string& bytes);
void save_params(const ParamSet& params, const std::filesystem::path& path);
ParamSet load_params(const std::filesystem::path& path);

/// FNV-1a over the serialized bytes; a cheap identity for determinism checks.
std::uint64_t params_checksum(const ParamSet& params);

}  // namespace graphuil
