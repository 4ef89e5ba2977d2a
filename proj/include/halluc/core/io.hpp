#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <span>
#include <sstream>
#include <string>
#include <system_error>
#include <type_traits>
#include <vector>

#include <json.hpp>

#include "halluc/core/error.hpp"

namespace halluc::io {

namespace fs = std::filesystem;
using json = nlohmann::json;

static_assert(std::endian::native == std::endian::little, "on-disk formats assume a little-endian host");

/// Writes `bytes` to `path` through a sibling temporary file and a rename, so
/// readers never observe a partially written file.
inline void write_file_atomic(const fs::path& path, std::string_view bytes) {
  std::error_code ec;
  if (path.has_parent_path()) fs::create_directories(path.parent_path(), ec);
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + tmp.string() + " for writing");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("write failed: " + tmp.string());
  }
  fs::rename(tmp, path, ec);
  if (ec) throw IoError("rename failed: " + tmp.string() + " -> " + path.string() + ": " + ec.message());
}

inline std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

template <class T>
void write_pod_array(const fs::path& path, std::span<const T> values) {
  static_assert(std::is_trivially_copyable_v<T>);
  write_file_atomic(path, std::string_view(reinterpret_cast<const char*>(values.data()), values.size_bytes()));
}

template <class T>
std::vector<T> read_pod_array(const fs::path& path) {
  static_assert(std::is_trivially_copyable_v<T>);
  const auto bytes = read_file(path);
  if (bytes.size() % sizeof(T) != 0)
    throw FormatError(path.string() + ": size " + std::to_string(bytes.size()) + " is not a multiple of " +
                      std::to_string(sizeof(T)));
  std::vector<T> out(bytes.size() / sizeof(T));
  std::memcpy(out.data(), bytes.data(), bytes.size());
  return out;
}

inline void write_json(const fs::path& path, const json& j) { write_file_atomic(path, j.dump(2) + "\n"); }

inline json read_json(const fs::path& path) {
  try {
    return json::parse(read_file(path));
  } catch (const json::exception& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

/// Replaces directory `dst` with the fully written directory `staging`.
inline void commit_directory(const fs::path& staging, const fs::path& dst) {
  std::error_code ec;
  fs::remove_all(dst, ec);
  if (dst.has_parent_path()) fs::create_directories(dst.parent_path(), ec);
  fs::rename(staging, dst, ec);
  if (ec) throw IoError("rename failed: " + staging.string() + " -> " + dst.string() + ": " + ec.message());
}

/// 64-bit FNV-1a, used for config hashes.
inline std::uint64_t fnv1a(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  static constexpr char digits[] = "0123456789abcdef";
  std::string s(16, '0');
  for (int i = 15; i >= 0; --i, v >>= 4) s[static_cast<std::size_t>(i)] = digits[v & 0xF];
  return s;
}

}  // namespace halluc::io
