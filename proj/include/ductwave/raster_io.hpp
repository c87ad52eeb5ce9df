#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace ductwave {

// Framed file layout shared by every binary artifact: one line of compact
// JSON header, then the float payload as little-endian f32. The header
// carries "payload_floats" and "checksum" (CRC-32 of the payload bytes).

std::uint32_t payload_crc32(std::span<const float> values, std::uint32_t seed = 0);
std::uint32_t text_crc32(std::string_view text);
std::string format_checksum(std::uint32_t crc);

struct FramedFile {
  nlohmann::json header;
  std::vector<float> payload;
};

/// Writes header + concatenated payloads via a temporary file and rename.
void write_framed(const std::filesystem::path& path, nlohmann::json header,
                  std::span<const std::span<const float>> payloads);

/// Reads and validates a framed file; throws CorruptionError on truncation,
/// malformed header or checksum mismatch, IoError when unreadable.
FramedFile read_framed(const std::filesystem::path& path);

/// Atomic text write (temporary file + rename).
void write_text_atomic(const std::filesystem::path& path, const std::string& text);
std::string read_text(const std::filesystem::path& path);

/// Header-only read, no payload validation.
nlohmann::json read_framed_header(const std::filesystem::path& path);

}  // namespace ductwave
