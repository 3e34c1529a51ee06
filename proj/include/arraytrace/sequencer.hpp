#pragma once

// Shape classification of access patterns.
//
// A pattern is first matched as a whole against the shape set. When nothing
// matches it is cut into slices at every occurrence of index 0 (if 0 occurs at
// least twice), otherwise of index 1, and each slice is classified on its own.
// Round 2 refines round 1: patterns fully encoded by round 1 keep that
// encoding, and the added shapes only ever claim slices round 1 left
// unidentified.

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "arraytrace/trace_model.hpp"

namespace arraytrace {

enum class ShapeRound : std::uint8_t { Round1 = 1, Round2 = 2 };

struct ShapeOptions {
  // Upper bound on distinct indices for the fringes shape.
  std::size_t fringes_max_distinct = 4;
};

// Shapes of a round, most specific first.
std::span<const ShapeKind> shape_precedence(ShapeRound round) noexcept;
bool shape_in_round(ShapeKind kind, ShapeRound round) noexcept;

// Tests one shape predicate on an index sequence. Returns the tag (with step
// for the linear shapes) on a match. Unidentified matches when no shape of
// round 2 does.
std::optional<ShapeTag> detect_shape(std::span<const std::int64_t> indices, ShapeKind kind,
                                     const ShapeOptions& options = {});

// True iff the entries satisfy the tag's predicate; a linear tag's step must
// agree as well.
bool match_shape(std::span<const AccessEntry> entries, const ShapeTag& tag,
                 const ShapeOptions& options = {});

ShapeTag classify_indices(std::span<const std::int64_t> indices, ShapeRound round,
                          const ShapeOptions& options = {});
ShapeTag classify_whole(const AccessPattern& pattern, ShapeRound round,
                        const ShapeOptions& options = {});

struct EntryRange {
  std::size_t start = 0;
  std::size_t len = 0;

  friend bool operator==(const EntryRange&, const EntryRange&) = default;
};

struct SplitResult {
  std::optional<std::int64_t> split_index;  // 0, 1, or none
  std::vector<EntryRange> ranges;
};

SplitResult split_slices(std::span<const std::int64_t> indices);
SplitResult split_slices(const AccessPattern& pattern);

struct SequencerOptions {
  ShapeRound round = ShapeRound::Round2;
  ShapeOptions shapes;
};

// Slice lengths are the slices' own access counts.
SequenceEncoding sequence(const AccessPattern& pattern, const SequencerOptions& options = {});

struct Slice {
  std::size_t start = 0;
  std::size_t len = 0;
  SliceCode code;
};

// Positions of the slices of an encoding produced by sequence().
std::vector<Slice> slice_positions(const SequenceEncoding& encoding);

enum class LengthField : std::uint8_t {
  Slice,    // each slice reports its own length
  Pattern,  // each slice reports the whole pattern's length
};

// "<min>: |<TAG> <mode> <threads> <len>|...|"
std::string render(const SequenceEncoding& encoding, LengthField field = LengthField::Slice);

std::optional<SequenceEncoding> try_parse_encoding(std::string_view text,
                                                   std::string* error = nullptr);
SequenceEncoding parse_encoding(std::string_view text);

// Per-shape access counts, weighted by how many arrays share each pattern.
struct ShapeShares {
  std::array<std::uint64_t, kShapeKindCount> accesses{};
  std::uint64_t total = 0;

  void add(const SequenceEncoding& encoding, std::uint64_t member_count);
  void merge(const ShapeShares& other);
  double fraction(ShapeKind kind) const noexcept;
  std::uint64_t identified() const noexcept;

  friend bool operator==(const ShapeShares&, const ShapeShares&) = default;
};

struct SequencedGroup {
  SequenceEncoding encoding;
  std::uint64_t member_count = 0;
};

ShapeShares access_shares(std::span<const SequencedGroup> groups);

}  // namespace arraytrace
