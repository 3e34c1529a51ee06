#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <span>
#include <string>

namespace arraytrace {

// 128-bit BLAKE2b content digest.
struct Digest {
  std::array<std::uint8_t, 16> bytes{};

  std::string hex() const;
  static Digest of(std::span<const std::uint8_t> data);

  friend bool operator==(const Digest&, const Digest&) = default;
  friend auto operator<=>(const Digest&, const Digest&) = default;
};

}  // namespace arraytrace
