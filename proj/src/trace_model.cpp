#include "arraytrace/trace_model.hpp"

#include <algorithm>
#include <array>
#include <charconv>

#include "arraytrace/error.hpp"

namespace arraytrace {

char mode_char(Mode m) noexcept { return m == Mode::Read ? 'r' : 'w'; }

std::optional<Mode> parse_mode(std::string_view token) noexcept {
  if (token == "r") return Mode::Read;
  if (token == "w") return Mode::Write;
  return std::nullopt;
}

namespace {

constexpr std::string_view kPrimitiveCodes = "ZBCDFIJS";

bool valid_class_name(std::string_view name) noexcept {
  if (name.empty()) return false;
  return std::none_of(name.begin(), name.end(), [](char c) {
    return c == ';' || c == '@' || c == '[' || c == ' ' || c == '\t' || c == '\n' ||
           c == '\r';
  });
}

}  // namespace

std::optional<TypeDescriptor> TypeDescriptor::try_parse(std::string_view text,
                                                        DescriptorSyntax syntax) noexcept {
  std::size_t dims = 0;
  while (dims < text.size() && text[dims] == '[') ++dims;
  if (dims == 0 || dims == text.size()) return std::nullopt;
  std::string_view element = text.substr(dims);

  TypeDescriptor out;
  out.dims = static_cast<int>(dims);
  if (element.size() == 1) {
    if (kPrimitiveCodes.find(element[0]) == std::string_view::npos) return std::nullopt;
    out.raw = std::string(text);
    out.element = std::string(element);
    return out;
  }
  if (element.front() != 'L') return std::nullopt;
  std::string_view name = element.substr(1);
  bool terminated = !name.empty() && name.back() == ';';
  if (terminated) {
    name.remove_suffix(1);
  } else if (syntax == DescriptorSyntax::Strict) {
    return std::nullopt;
  }
  if (!valid_class_name(name)) return std::nullopt;
  out.raw.assign(text.substr(0, dims));
  out.raw += 'L';
  out.raw += name;
  out.raw += ';';
  out.element = out.raw.substr(dims);
  return out;
}

TypeDescriptor TypeDescriptor::parse(std::string_view text, DescriptorSyntax syntax) {
  if (auto d = try_parse(text, syntax)) return std::move(*d);
  throw ValidationError("malformed array type descriptor '" + std::string(text) + "'");
}

std::string_view TypeDescriptor::innermost_name() const noexcept {
  std::string_view e = element;
  if (e.size() >= 2 && e.front() == 'L' && e.back() == ';') return e.substr(1, e.size() - 2);
  return e;
}

std::string hex_lower(std::uint32_t v) {
  std::array<char, 8> buf{};
  auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v, 16);
  return std::string(buf.data(), end);
}

std::string hex_upper(std::uint32_t v) {
  std::string s = hex_lower(v);
  std::transform(s.begin(), s.end(), s.begin(),
                 [](char c) { return c >= 'a' && c <= 'f' ? static_cast<char>(c - 32) : c; });
  return s;
}

std::string ArrayKey::id() const { return type.raw + '@' + hex_lower(hash_token); }

std::optional<ArrayKey> ArrayKey::try_parse_id(std::string_view text) noexcept {
  auto at = text.rfind('@');
  if (at == std::string_view::npos) return std::nullopt;
  auto type = TypeDescriptor::try_parse(text.substr(0, at));
  if (!type) return std::nullopt;
  std::string_view hex = text.substr(at + 1);
  if (hex.empty() || hex.size() > 8) return std::nullopt;
  std::uint32_t token = 0;
  auto [ptr, ec] = std::from_chars(hex.data(), hex.data() + hex.size(), token, 16);
  if (ec != std::errc() || ptr != hex.data() + hex.size()) return std::nullopt;
  return ArrayKey{std::move(*type), token};
}

ArrayKey ArrayKey::parse_id(std::string_view text) {
  if (auto k = try_parse_id(text)) return std::move(*k);
  throw ValidationError("malformed array id '" + std::string(text) + "'");
}

std::vector<std::int64_t> AccessPattern::indices() const {
  std::vector<std::int64_t> out;
  out.reserve(entries.size());
  for (const auto& e : entries) out.push_back(e.index);
  return out;
}

bool AccessPattern::is_normalized() const noexcept {
  std::uint32_t highest = 0;
  for (const auto& e : entries) {
    if (e.thread == 0 || e.thread > highest + 1) return false;
    highest = std::max(highest, e.thread);
  }
  return true;
}

namespace {

struct KindName {
  ShapeKind kind;
  std::string_view name;
};

constexpr std::array<KindName, kShapeKindCount> kKindNames{{
    {ShapeKind::Constant, "Constant"},
    {ShapeKind::LinearInc, "LinearInc"},
    {ShapeKind::LinearDec, "LinearDec"},
    {ShapeKind::RepStepInc, "RepStepInc"},
    {ShapeKind::RepStepDec, "RepStepDec"},
    {ShapeKind::VarStepInc, "VarStepInc"},
    {ShapeKind::VarStepDec, "VarStepDec"},
    {ShapeKind::Fringes, "Fringes"},
    {ShapeKind::Peaks, "Peaks"},
    {ShapeKind::Saws, "Saws"},
    {ShapeKind::ParallelTrav, "ParallelTrav"},
    {ShapeKind::LinRepUpDown, "LinRepUpDown"},
    {ShapeKind::Unidentified, "Unidentified"},
}};

// Fixed tags; Linear* are handled separately because they carry a step.
constexpr std::array<KindName, 11> kFixedTags{{
    {ShapeKind::Constant, "C"},
    {ShapeKind::RepStepInc, "RSi"},
    {ShapeKind::RepStepDec, "RSd"},
    {ShapeKind::VarStepInc, "VSi"},
    {ShapeKind::VarStepDec, "VSd"},
    {ShapeKind::Fringes, "Fr"},
    {ShapeKind::Peaks, "Pk"},
    {ShapeKind::Saws, "Sw"},
    {ShapeKind::ParallelTrav, "PT"},
    {ShapeKind::LinRepUpDown, "LRud"},
    {ShapeKind::Unidentified, "U"},
}};

bool is_linear(ShapeKind k) noexcept {
  return k == ShapeKind::LinearInc || k == ShapeKind::LinearDec;
}

}  // namespace

std::string_view shape_kind_name(ShapeKind k) noexcept {
  return kKindNames[static_cast<std::size_t>(k)].name;
}

std::optional<ShapeKind> parse_shape_kind_name(std::string_view name) noexcept {
  for (const auto& kn : kKindNames)
    if (kn.name == name) return kn.kind;
  return std::nullopt;
}

bool ShapeTag::valid() const noexcept {
  if (is_linear(kind)) return step.has_value() && *step >= 1;
  return !step.has_value();
}

std::string ShapeTag::text() const {
  if (is_linear(kind)) {
    std::uint32_t s = step.value_or(1);
    char dir = kind == ShapeKind::LinearInc ? 'i' : 'd';
    if (s == 1) return std::string("SL") + dir;
    return std::string("L") + dir + std::to_string(s);
  }
  for (const auto& kn : kFixedTags)
    if (kn.kind == kind) return std::string(kn.name);
  return "U";
}

std::optional<ShapeTag> ShapeTag::parse_text(std::string_view text) noexcept {
  if (text == "SLi") return ShapeTag::linear(ShapeKind::LinearInc, 1);
  if (text == "SLd") return ShapeTag::linear(ShapeKind::LinearDec, 1);
  if (text.size() > 2 && text[0] == 'L' && (text[1] == 'i' || text[1] == 'd')) {
    std::string_view digits = text.substr(2);
    if (digits.front() == '0') return std::nullopt;
    std::uint32_t s = 0;
    auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), s);
    if (ec != std::errc() || ptr != digits.data() + digits.size() || s < 2) return std::nullopt;
    return ShapeTag::linear(text[1] == 'i' ? ShapeKind::LinearInc : ShapeKind::LinearDec, s);
  }
  for (const auto& kn : kFixedTags)
    if (kn.name == text) return ShapeTag::of(kn.kind);
  return std::nullopt;
}

std::string_view slice_mode_text(SliceMode m) noexcept {
  switch (m) {
    case SliceMode::ReadOnly:
      return "r";
    case SliceMode::WriteOnly:
      return "w";
    case SliceMode::ReadWrite:
      break;
  }
  return "rw";
}

std::optional<SliceMode> parse_slice_mode(std::string_view text) noexcept {
  if (text == "r") return SliceMode::ReadOnly;
  if (text == "w") return SliceMode::WriteOnly;
  if (text == "rw") return SliceMode::ReadWrite;
  return std::nullopt;
}

SliceMode mode_of_slice(std::span<const AccessEntry> entries) {
  if (entries.empty()) throw ContractError("mode_of_slice: empty slice");
  bool reads = false;
  bool writes = false;
  for (const auto& e : entries) (e.mode == Mode::Read ? reads : writes) = true;
  if (reads && writes) return SliceMode::ReadWrite;
  return reads ? SliceMode::ReadOnly : SliceMode::WriteOnly;
}

std::string_view coverage_name(Coverage c) noexcept {
  switch (c) {
    case Coverage::Full:
      return "full";
    case Coverage::Partial:
      return "partial";
    case Coverage::None:
      break;
  }
  return "none";
}

Coverage coverage_of(std::span<const SliceCode> slices) noexcept {
  std::size_t unidentified = 0;
  for (const auto& s : slices)
    if (s.shape.kind == ShapeKind::Unidentified) ++unidentified;
  if (unidentified == 0 && !slices.empty()) return Coverage::Full;
  if (unidentified == slices.size()) return Coverage::None;
  return Coverage::Partial;
}

std::uint64_t SequenceEncoding::total_len() const noexcept {
  std::uint64_t n = 0;
  for (const auto& s : slices) n += s.len;
  return n;
}

}  // namespace arraytrace
