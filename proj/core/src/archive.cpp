// SPDX-License-Identifier: Apache-2.0
#include "msgan/archive.hpp"

#include <openssl/evp.h>

#include <bit>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "msgan/errors.hpp"

namespace msgan {
namespace {

static_assert(std::endian::native == std::endian::little, "archive format assumes a little-endian host");

constexpr char kMagic[8] = {'M', 'S', 'G', 'A', 'N', 'A', 'R', 'C'};

const char* dtype_name(DType d) { return d == DType::F32 ? "f32" : "f64"; }

template <class T>
void put(std::vector<std::uint8_t>& out, T value) {
  const auto* p = reinterpret_cast<const std::uint8_t*>(&value);
  out.insert(out.end(), p, p + sizeof(T));
}

template <class T>
T get_at(std::span<const std::uint8_t> bytes, std::size_t offset) {
  T value;
  std::memcpy(&value, bytes.data() + offset, sizeof(T));
  return value;
}

std::vector<std::uint8_t> encode(const ArrayEntry& e) {
  std::vector<std::uint8_t> out(e.byte_size());
  if (e.dtype == DType::F32) {
    for (std::size_t i = 0; i < e.values.size(); ++i) {
      const float f = static_cast<float>(e.values[i]);
      std::memcpy(out.data() + 4 * i, &f, 4);
    }
  } else {
    std::memcpy(out.data(), e.values.data(), out.size());
  }
  return out;
}

}  // namespace

std::string sha256_hex(std::span<const std::uint8_t> bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1)
    throw IntegrityError("sha256 computation failed");
  std::ostringstream os;
  for (unsigned int i = 0; i < len; ++i) os << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(digest[i]);
  return os.str();
}

std::string sha256_hex(std::string_view text) {
  return sha256_hex(std::span<const std::uint8_t>(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), {});
}

void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("short write to " + path.string());
}

std::string file_sha256(const std::filesystem::path& path) { return sha256_hex(read_file(path)); }

void Archive::add(std::string name, std::vector<std::int64_t> shape, std::vector<double> values, DType dtype) {
  if (contains(name)) throw ArgumentError("duplicate archive entry: " + name);
  std::int64_t n = 1;
  for (std::int64_t d : shape) n *= d;
  if (n != static_cast<std::int64_t>(values.size())) throw ShapeError("archive entry " + name + ": shape/value mismatch");
  if (dtype == DType::F32)
    for (double& v : values) v = static_cast<double>(static_cast<float>(v));
  entries_.push_back(ArrayEntry{std::move(name), dtype, std::move(shape), std::move(values)});
}

bool Archive::contains(const std::string& name) const {
  for (const auto& e : entries_)
    if (e.name == name) return true;
  return false;
}

const ArrayEntry& Archive::get(const std::string& name) const {
  for (const auto& e : entries_)
    if (e.name == name) return e;
  throw IntegrityError("archive entry missing: " + name);
}

std::vector<std::uint8_t> Archive::serialize() const {
  nlohmann::json header;
  header["metadata"] = metadata_;
  header["entries"] = nlohmann::json::array();
  std::vector<std::uint8_t> payload;
  for (const auto& e : entries_) {
    const std::vector<std::uint8_t> data = encode(e);
    header["entries"].push_back({{"name", e.name},
                                 {"dtype", dtype_name(e.dtype)},
                                 {"shape", e.shape},
                                 {"offset", payload.size()},
                                 {"bytes", data.size()},
                                 {"sha256", sha256_hex(data)}});
    payload.insert(payload.end(), data.begin(), data.end());
  }
  const std::string text = header.dump();
  std::vector<std::uint8_t> out(kMagic, kMagic + 8);
  put<std::uint32_t>(out, kFormatVersion);
  put<std::uint64_t>(out, text.size());
  out.insert(out.end(), text.begin(), text.end());
  out.insert(out.end(), payload.begin(), payload.end());
  return out;
}

Archive Archive::deserialize(std::span<const std::uint8_t> bytes) {
  constexpr std::size_t kPrefix = 8 + 4 + 8;
  if (bytes.size() < kPrefix || std::memcmp(bytes.data(), kMagic, 8) != 0)
    throw IntegrityError("not a checkpoint archive (bad magic)");
  const auto version = get_at<std::uint32_t>(bytes, 8);
  if (version != kFormatVersion) throw IntegrityError("unsupported archive format version " + std::to_string(version));
  const auto header_len = get_at<std::uint64_t>(bytes, 12);
  if (header_len > bytes.size() - kPrefix) throw IntegrityError("archive header length exceeds file size");

  nlohmann::json header;
  try {
    header = nlohmann::json::parse(bytes.begin() + kPrefix, bytes.begin() + kPrefix + static_cast<std::ptrdiff_t>(header_len));
  } catch (const nlohmann::json::exception& e) {
    throw IntegrityError(std::string("archive manifest is not valid JSON: ") + e.what());
  }
  const std::span<const std::uint8_t> payload = bytes.subspan(kPrefix + header_len);

  Archive ar;
  try {
    ar.metadata_ = header.at("metadata");
    std::size_t expected_offset = 0;
    for (const auto& je : header.at("entries")) {
      const std::string name = je.at("name").get<std::string>();
      const std::string dt = je.at("dtype").get<std::string>();
      if (dt != "f32" && dt != "f64") throw IntegrityError("entry " + name + ": unknown dtype " + dt);
      const DType dtype = dt == "f32" ? DType::F32 : DType::F64;
      const auto shape = je.at("shape").get<std::vector<std::int64_t>>();
      const auto offset = je.at("offset").get<std::size_t>();
      const auto nbytes = je.at("bytes").get<std::size_t>();
      std::int64_t numel = 1;
      for (std::int64_t d : shape) {
        if (d < 0) throw IntegrityError("entry " + name + ": negative dimension");
        numel *= d;
      }
      const std::size_t elem = dtype == DType::F32 ? 4 : 8;
      if (nbytes != static_cast<std::size_t>(numel) * elem)
        throw IntegrityError("entry " + name + ": byte length " + std::to_string(nbytes) + " does not match shape");
      if (offset != expected_offset || offset + nbytes > payload.size())
        throw IntegrityError("entry " + name + ": data lies outside the payload");
      const auto data = payload.subspan(offset, nbytes);
      if (sha256_hex(data) != je.at("sha256").get<std::string>())
        throw IntegrityError("entry " + name + ": checksum mismatch");
      ArrayEntry e{name, dtype, shape, std::vector<double>(static_cast<std::size_t>(numel))};
      for (std::size_t i = 0; i < e.values.size(); ++i) {
        if (dtype == DType::F32) {
          float f;
          std::memcpy(&f, data.data() + 4 * i, 4);
          e.values[i] = f;
        } else {
          std::memcpy(&e.values[i], data.data() + 8 * i, 8);
        }
      }
      if (ar.contains(name)) throw IntegrityError("entry " + name + ": duplicated");
      ar.entries_.push_back(std::move(e));
      expected_offset = offset + nbytes;
    }
    if (expected_offset != payload.size()) throw IntegrityError("archive payload has trailing bytes");
  } catch (const nlohmann::json::exception& e) {
    throw IntegrityError(std::string("archive manifest is malformed: ") + e.what());
  }
  return ar;
}

void Archive::write(const std::filesystem::path& path) const { write_file(path, serialize()); }

Archive Archive::read(const std::filesystem::path& path) { return deserialize(read_file(path)); }

}  // namespace msgan
