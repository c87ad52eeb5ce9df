#include "ductwave/raster_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include <zlib.h>

#include "ductwave/errors.hpp"

namespace ductwave {
namespace {

std::vector<unsigned char> to_little_endian(std::span<const float> values) {
  std::vector<unsigned char> bytes(values.size() * sizeof(float));
  std::memcpy(bytes.data(), values.data(), bytes.size());
  if constexpr (std::endian::native == std::endian::big) {
    for (std::size_t i = 0; i < bytes.size(); i += 4) {
      std::swap(bytes[i], bytes[i + 3]);
      std::swap(bytes[i + 1], bytes[i + 2]);
    }
  }
  return bytes;
}

std::vector<float> from_little_endian(std::vector<unsigned char> bytes) {
  if constexpr (std::endian::native == std::endian::big) {
    for (std::size_t i = 0; i < bytes.size(); i += 4) {
      std::swap(bytes[i], bytes[i + 3]);
      std::swap(bytes[i + 1], bytes[i + 2]);
    }
  }
  std::vector<float> values(bytes.size() / sizeof(float));
  std::memcpy(values.data(), bytes.data(), values.size() * sizeof(float));
  return values;
}

std::filesystem::path temp_path_for(const std::filesystem::path& path) {
  auto tmp = path;
  tmp += ".tmp";
  return tmp;
}

}  // namespace

std::uint32_t payload_crc32(std::span<const float> values, std::uint32_t seed) {
  const auto bytes = to_little_endian(values);
  uLong crc = seed;
  // zlib takes uInt lengths; chunk to stay within range.
  std::size_t offset = 0;
  while (offset < bytes.size()) {
    const std::size_t n = std::min<std::size_t>(bytes.size() - offset, 1U << 30);
    crc = crc32(crc, bytes.data() + offset, static_cast<uInt>(n));
    offset += n;
  }
  return static_cast<std::uint32_t>(crc);
}

std::uint32_t text_crc32(std::string_view text) {
  uLong crc = crc32(0L, Z_NULL, 0);
  for (std::size_t offset = 0; offset < text.size();) {
    const std::size_t n = std::min<std::size_t>(text.size() - offset, 1U << 30);
    crc = crc32(crc, reinterpret_cast<const Bytef*>(text.data() + offset), static_cast<uInt>(n));
    offset += n;
  }
  return static_cast<std::uint32_t>(crc);
}

std::string format_checksum(std::uint32_t crc) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%08x", crc);
  return std::string("crc32:") + buf;
}

void write_framed(const std::filesystem::path& path, nlohmann::json header,
                  std::span<const std::span<const float>> payloads) {
  std::size_t total = 0;
  std::uint32_t crc = 0;
  for (const auto& p : payloads) {
    total += p.size();
    crc = payload_crc32(p, crc);
  }
  header["payload_floats"] = total;
  header["checksum"] = format_checksum(crc);

  const auto tmp = temp_path_for(path);
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + tmp.string() + " for writing");
    out << header.dump() << '\n';
    for (const auto& p : payloads) {
      const auto bytes = to_little_endian(p);
      out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    }
    out.flush();
    if (!out) {
      out.close();
      std::filesystem::remove(tmp);
      throw IoError("write failed for " + path.string());
    }
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp);
    throw IoError("cannot move " + tmp.string() + " into place: " + ec.message());
  }
}

nlohmann::json read_framed_header(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw CorruptionError(path.string() + ": missing header");
  try {
    return nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    throw CorruptionError(path.string() + ": malformed header: " + e.what());
  }
}

FramedFile read_framed(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw CorruptionError(path.string() + ": missing header");
  FramedFile file;
  try {
    file.header = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    throw CorruptionError(path.string() + ": malformed header: " + e.what());
  }
  if (!file.header.contains("payload_floats") || !file.header.contains("checksum")) {
    throw CorruptionError(path.string() + ": header lacks payload_floats/checksum");
  }
  const auto n = file.header.at("payload_floats").get<std::size_t>();
  std::vector<unsigned char> bytes(n * sizeof(float));
  in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (static_cast<std::size_t>(in.gcount()) != bytes.size()) {
    throw CorruptionError(path.string() + ": truncated payload");
  }
  if (in.peek() != std::char_traits<char>::eof()) {
    throw CorruptionError(path.string() + ": trailing bytes after payload");
  }
  file.payload = from_little_endian(std::move(bytes));
  const auto expected = file.header.at("checksum").get<std::string>();
  if (format_checksum(payload_crc32(file.payload)) != expected) {
    throw CorruptionError(path.string() + ": payload checksum mismatch");
  }
  return file;
}

void write_text_atomic(const std::filesystem::path& path, const std::string& text) {
  const auto tmp = temp_path_for(path);
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + tmp.string() + " for writing");
    out << text;
    out.flush();
    if (!out) {
      out.close();
      std::filesystem::remove(tmp);
      throw IoError("write failed for " + path.string());
    }
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp);
    throw IoError("cannot move " + tmp.string() + " into place: " + ec.message());
  }
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace ductwave
