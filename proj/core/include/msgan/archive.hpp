// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace msgan {

enum class DType { F32, F64 };

struct ArrayEntry {
  std::string name;
  DType dtype = DType::F32;
  std::vector<std::int64_t> shape;
  std::vector<double> values;

  std::size_t byte_size() const { return values.size() * (dtype == DType::F32 ? 4 : 8); }
};

/// Single-file container of named numeric arrays plus a JSON manifest.
///
/// Layout (little-endian):
///   8 bytes   magic "MSGANARC"
///   u32       format version
///   u64       header length H
///   H bytes   JSON header {"metadata": {...}, "entries": [{name, dtype,
///             shape, offset, bytes, sha256}, ...]}
///   payload   entry data, concatenated in entry order
///
/// Every entry carries a SHA-256 of its bytes; reading verifies sizes and
/// digests and reports the first failing entry by name.
class Archive {
 public:
  static constexpr std::uint32_t kFormatVersion = 1;

  nlohmann::json& metadata() { return metadata_; }
  const nlohmann::json& metadata() const { return metadata_; }

  /// F32 entries are rounded to float on insertion so that the in-memory
  /// values always equal what a reader will see.
  void add(std::string name, std::vector<std::int64_t> shape, std::vector<double> values, DType dtype = DType::F32);
  bool contains(const std::string& name) const;
  const ArrayEntry& get(const std::string& name) const;
  const std::vector<ArrayEntry>& entries() const { return entries_; }

  std::vector<std::uint8_t> serialize() const;
  static Archive deserialize(std::span<const std::uint8_t> bytes);

  void write(const std::filesystem::path& path) const;
  static Archive read(const std::filesystem::path& path);

 private:
  nlohmann::json metadata_ = nlohmann::json::object();
  std::vector<ArrayEntry> entries_;
};

std::string sha256_hex(std::span<const std::uint8_t> bytes);
std::string sha256_hex(std::string_view text);
std::string file_sha256(const std::filesystem::path& path);

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

}  // namespace msgan
