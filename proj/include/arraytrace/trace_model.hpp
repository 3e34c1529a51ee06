#pragma once

// Core value types shared by every stage of the pipeline. No I/O here.

#include <compare>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace arraytrace {

enum class Mode : std::uint8_t { Read = 0, Write = 1 };

char mode_char(Mode m) noexcept;
std::optional<Mode> parse_mode(std::string_view token) noexcept;

enum class DescriptorSyntax {
  Strict,
  // Accept object element names missing their trailing ';' and complete them.
  Lenient,
};

// JVM array type descriptor such as "[I", "[[B" or "[Ljava.lang.Object;".
struct TypeDescriptor {
  std::string raw;
  int dims = 0;
  std::string element;  // innermost element: "B", "Ljava.lang.String;"

  static TypeDescriptor parse(std::string_view text,
                              DescriptorSyntax syntax = DescriptorSyntax::Strict);
  static std::optional<TypeDescriptor> try_parse(
      std::string_view text, DescriptorSyntax syntax = DescriptorSyntax::Strict) noexcept;

  bool is_primitive_element() const noexcept { return element.size() == 1; }
  // Element type with the 'L' ... ';' wrapper removed ("java.lang.Integer").
  std::string_view innermost_name() const noexcept;

  const std::string& str() const noexcept { return raw; }

  friend bool operator==(const TypeDescriptor& a, const TypeDescriptor& b) noexcept {
    return a.raw == b.raw;
  }
  friend std::strong_ordering operator<=>(const TypeDescriptor& a,
                                          const TypeDescriptor& b) noexcept {
    return a.raw.compare(b.raw) <=> 0;
  }
};

// Identity of a traced array. The hash token is the runtime's 32-bit identity
// hash and is not unique; distinct arrays can share a key.
struct ArrayKey {
  TypeDescriptor type;
  std::uint32_t hash_token = 0;

  // "<type>@<lowercase hex>", e.g. "[I@6e0be858".
  std::string id() const;
  static ArrayKey parse_id(std::string_view text);
  static std::optional<ArrayKey> try_parse_id(std::string_view text) noexcept;

  friend bool operator==(const ArrayKey& a, const ArrayKey& b) noexcept {
    return a.hash_token == b.hash_token && a.type == b.type;
  }
  friend std::strong_ordering operator<=>(const ArrayKey& a, const ArrayKey& b) noexcept {
    if (auto c = a.type <=> b.type; c != 0) return c;
    return a.hash_token <=> b.hash_token;
  }
};

struct AccessRecord {
  Mode mode = Mode::Read;
  std::int64_t index = 0;
  std::uint32_t length = 0;
  std::uint64_t thread = 0;
  std::int32_t line = -1;
  std::uint32_t class_hash = 0;

  bool out_of_bounds() const noexcept {
    return index < 0 || index >= static_cast<std::int64_t>(length);
  }

  friend bool operator==(const AccessRecord&, const AccessRecord&) = default;
};

// One (index, mode, normalized thread) tuple of an access pattern.
struct AccessEntry {
  std::int64_t index = 0;
  std::uint32_t thread = 1;
  Mode mode = Mode::Read;

  friend bool operator==(const AccessEntry&, const AccessEntry&) = default;
  friend auto operator<=>(const AccessEntry&, const AccessEntry&) = default;
};

struct AccessPattern {
  std::vector<AccessEntry> entries;

  std::size_t size() const noexcept { return entries.size(); }
  bool empty() const noexcept { return entries.empty(); }
  std::vector<std::int64_t> indices() const;

  // Thread ids are exactly {1..k} and first appear in increasing order.
  bool is_normalized() const noexcept;

  friend bool operator==(const AccessPattern&, const AccessPattern&) = default;
  friend auto operator<=>(const AccessPattern&, const AccessPattern&) = default;
};

enum class ShapeKind : std::uint8_t {
  Constant,
  LinearInc,
  LinearDec,
  RepStepInc,
  RepStepDec,
  VarStepInc,
  VarStepDec,
  Fringes,
  Peaks,
  Saws,
  ParallelTrav,
  LinRepUpDown,
  Unidentified,
};

inline constexpr std::size_t kShapeKindCount = 13;

std::string_view shape_kind_name(ShapeKind k) noexcept;
std::optional<ShapeKind> parse_shape_kind_name(std::string_view name) noexcept;

struct ShapeTag {
  ShapeKind kind = ShapeKind::Unidentified;
  std::optional<std::uint32_t> step;  // only for LinearInc / LinearDec

  static ShapeTag of(ShapeKind k) noexcept { return ShapeTag{k, std::nullopt}; }
  static ShapeTag linear(ShapeKind k, std::uint32_t step) noexcept { return ShapeTag{k, step}; }

  bool valid() const noexcept;

  // Compact tag used in encodings: C, SLi, Li<step>, SLd, Ld<step>, RSi, RSd,
  // VSi, VSd, Fr, Pk, Sw, PT, LRud, U.
  std::string text() const;
  static std::optional<ShapeTag> parse_text(std::string_view text) noexcept;

  friend bool operator==(const ShapeTag&, const ShapeTag&) = default;
};

enum class SliceMode : std::uint8_t { ReadOnly, WriteOnly, ReadWrite };

std::string_view slice_mode_text(SliceMode m) noexcept;  // r / w / rw
std::optional<SliceMode> parse_slice_mode(std::string_view text) noexcept;

SliceMode mode_of_slice(std::span<const AccessEntry> entries);

struct SliceCode {
  ShapeTag shape;
  SliceMode mode = SliceMode::ReadOnly;
  std::uint32_t thread_count = 1;
  std::uint64_t len = 1;

  friend bool operator==(const SliceCode&, const SliceCode&) = default;
};

enum class Coverage : std::uint8_t { Full, Partial, None };

std::string_view coverage_name(Coverage c) noexcept;
Coverage coverage_of(std::span<const SliceCode> slices) noexcept;

struct SequenceEncoding {
  std::int64_t min_index = 0;
  std::vector<SliceCode> slices;
  Coverage coverage = Coverage::None;

  std::uint64_t total_len() const noexcept;

  friend bool operator==(const SequenceEncoding&, const SequenceEncoding&) = default;
};

std::string hex_lower(std::uint32_t v);
std::string hex_upper(std::uint32_t v);

}  // namespace arraytrace

template <>
struct std::hash<arraytrace::ArrayKey> {
  std::size_t operator()(const arraytrace::ArrayKey& k) const noexcept {
    return std::hash<std::string>{}(k.type.raw) * 31u + k.hash_token;
  }
};
