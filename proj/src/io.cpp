#include "gaitwave/io.hpp"

#include <bit>
#include <charconv>
#include <cstring>
#include <fstream>
#include <sstream>
#include <system_error>

#include "gaitwave/error.hpp"

namespace gaitwave::io {

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::Io, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file_atomic(const std::filesystem::path& path, std::string_view bytes) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorKind::Io, "cannot write " + path.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) fail(ErrorKind::Io, "short write to " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    fail(ErrorKind::Io, "cannot move output into place at " + path.string());
  }
}

std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(sep, start);
    if (pos == std::string_view::npos) {
      fields.push_back(line.substr(start));
      return fields;
    }
    fields.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
}

std::vector<std::string_view> lines(std::string_view text) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (start < text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    auto line = text.substr(start, end - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    out.push_back(line);
    start = end + 1;
  }
  return out;
}

bool parse_int(std::string_view text, long long& out) {
  const auto* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, out);
  return ec == std::errc{} && ptr == end && !text.empty();
}

bool parse_double(std::string_view text, double& out) {
  if (!text.empty() && text.front() == '+') text.remove_prefix(1);
  const auto* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, out);
  return ec == std::errc{} && ptr == end && !text.empty();
}

std::string format_double(double value) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, value);
  return std::string(buf, ptr);
}

namespace {
std::uint32_t to_little(std::uint32_t v) {
  if constexpr (std::endian::native == std::endian::big) return __builtin_bswap32(v);
  return v;
}

std::uint64_t to_little(std::uint64_t v) {
  if constexpr (std::endian::native == std::endian::big) return __builtin_bswap64(v);
  return v;
}
}  // namespace

void ByteWriter::u32(std::uint32_t v) {
  v = to_little(v);
  buf_.append(reinterpret_cast<const char*>(&v), sizeof v);
}

void ByteWriter::u64(std::uint64_t v) {
  v = to_little(v);
  buf_.append(reinterpret_cast<const char*>(&v), sizeof v);
}

void ByteWriter::f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }

std::string_view ByteReader::bytes(std::size_t n) {
  if (data_.size() - pos_ < n) fail(ErrorKind::MalformedFile, "unexpected end of " + origin_);
  auto out = data_.substr(pos_, n);
  pos_ += n;
  return out;
}

std::uint32_t ByteReader::u32() {
  std::uint32_t v;
  std::memcpy(&v, bytes(sizeof v).data(), sizeof v);
  return to_little(v);
}

std::uint64_t ByteReader::u64() {
  std::uint64_t v;
  std::memcpy(&v, bytes(sizeof v).data(), sizeof v);
  return to_little(v);
}

float ByteReader::f32() { return std::bit_cast<float>(u32()); }

}  // namespace gaitwave::io
