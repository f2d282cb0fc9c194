#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace gaitwave::io {

std::string read_file(const std::filesystem::path& path);

/// Writes to a sibling temp file and renames it over the destination, so
/// readers never observe a partially written output.
void write_file_atomic(const std::filesystem::path& path, std::string_view bytes);

std::vector<std::string_view> split(std::string_view line, char sep);
std::vector<std::string_view> lines(std::string_view text);

// Locale-independent number parsing; whole field must be consumed.
bool parse_int(std::string_view text, long long& out);
bool parse_double(std::string_view text, double& out);
/// Shortest round-trip decimal representation.
std::string format_double(double value);

// Little-endian binary helpers.
class ByteWriter {
 public:
  void bytes(std::string_view raw) { buf_.append(raw); }
  void u32(std::uint32_t v);
  void u64(std::uint64_t v);
  void f32(float v);
  const std::string& str() const noexcept { return buf_; }

 private:
  std::string buf_;
};

class ByteReader {
 public:
  ByteReader(std::string_view data, std::string origin) : data_(data), origin_(std::move(origin)) {}
  std::string_view bytes(std::size_t n);
  std::uint32_t u32();
  std::uint64_t u64();
  float f32();
  bool done() const noexcept { return pos_ == data_.size(); }

 private:
  std::string_view data_;
  std::string origin_;
  std::size_t pos_ = 0;
};

}  // namespace gaitwave::io
