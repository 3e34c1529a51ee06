#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "arraytrace/digest.hpp"
#include "arraytrace/trace_io.hpp"
#include "arraytrace/trace_model.hpp"

namespace arraytrace {

// All accesses recorded under one ArrayKey, in stream order.
struct ArrayTrace {
  ArrayKey key;
  std::vector<AccessRecord> records;
  std::vector<std::uint32_t> distinct_classes;  // sorted
  std::vector<std::uint64_t> distinct_threads;  // sorted
  std::vector<std::uint32_t> lengths_seen;      // first-seen order

  static ArrayTrace from_records(ArrayKey key, std::vector<AccessRecord> records);
  // Every record gets the header length; grouped files carry no per-access length.
  static ArrayTrace from_block(const GroupedArrayBlock& block);

  std::uint32_t max_length() const noexcept;
  GroupedArrayBlock to_block() const;
};

// ------------------------------------------------------------ group by array

inline constexpr std::size_t kMinGroupBudget = std::size_t{1} << 20;

struct GroupOptions {
  // Empty means $ARRAYTRACE_TMP, falling back to the system temp directory.
  std::filesystem::path spill_dir;
  std::size_t memory_budget = std::size_t{256} << 20;
  std::size_t merge_fan_in = 64;
};

std::filesystem::path default_spill_dir();

// External group-by on ArrayKey. Records are buffered up to half the memory
// budget, sorted by (type, hash, arrival) and spilled as runs; finish() merges
// the runs and emits one ArrayTrace per key ordered by (type, hash).
class ArrayGrouper {
 public:
  explicit ArrayGrouper(GroupOptions options = {});
  ~ArrayGrouper();
  ArrayGrouper(const ArrayGrouper&) = delete;
  ArrayGrouper& operator=(const ArrayGrouper&) = delete;

  void add(const RawTraceLine& line);
  void finish(const std::function<void(ArrayTrace&&)>& sink);

  std::uint64_t records_added() const noexcept { return next_seq_; }
  std::size_t runs_spilled() const noexcept { return runs_spilled_; }
  std::size_t merge_passes() const noexcept { return merge_passes_; }

 private:
  struct Item {
    std::uint32_t type_id;
    std::uint32_t hash;
    std::uint64_t seq;
    AccessRecord rec;
  };
  class SpillDir;

  std::uint32_t intern(const TypeDescriptor& type);
  void sort_buffer();
  void spill();
  std::filesystem::path next_run_path();
  void emit_from_buffer(const std::function<void(ArrayTrace&&)>& sink);
  void check_trace_fits(std::size_t n_records) const;

  GroupOptions options_;
  std::vector<TypeDescriptor> types_;
  std::map<std::string, std::uint32_t, std::less<>> type_ids_;
  std::vector<Item> buffer_;
  std::size_t buffer_capacity_ = 0;
  std::uint64_t next_seq_ = 0;
  std::vector<std::filesystem::path> runs_;
  std::unique_ptr<SpillDir> spill_dir_;
  std::size_t runs_spilled_ = 0;
  std::size_t merge_passes_ = 0;
  std::size_t run_counter_ = 0;
  bool finished_ = false;
};

// Drains `reader` through an ArrayGrouper.
void group_by_array(RawTraceReader& reader, const GroupOptions& options,
                    const std::function<void(ArrayTrace&&)>& sink);

// ------------------------------------------------------------ patterns

AccessPattern normalize_threads(const ArrayTrace& trace);
AccessPattern normalize_threads(const GroupedArrayBlock& block);
// Renumbers an existing pattern; identity on normalized input.
AccessPattern normalize_threads(const AccessPattern& pattern);

Digest pattern_digest(const AccessPattern& pattern);

struct PatternGroup {
  Digest digest;
  AccessPattern pattern;
  std::vector<ArrayKey> members;  // insertion order
};

// Deduplicating table of normalized patterns. Patterns sharing a digest are
// kept apart unless they are element-wise equal.
class PatternTable {
 public:
  void add(const ArrayKey& key, const AccessPattern& pattern);
  void add(const ArrayKey& key, AccessPattern&& pattern, const Digest& digest);
  // Members of `other` are appended after this table's members.
  void merge(PatternTable&& other);

  std::size_t group_count() const noexcept { return n_groups_; }
  std::uint64_t array_count() const noexcept { return n_arrays_; }

  // Groups ordered by digest, then by pattern.
  std::vector<PatternGroup> groups() const&;
  std::vector<PatternGroup> take_groups() &&;

 private:
  std::map<Digest, std::vector<PatternGroup>> buckets_;
  std::size_t n_groups_ = 0;
  std::uint64_t n_arrays_ = 0;
};

std::vector<PatternGroup> dedup_patterns(
    const std::vector<std::pair<ArrayKey, AccessPattern>>& patterns);

// ------------------------------------------------------------ length changes

enum class LengthDirection : std::uint8_t { GrowOnly, ShrinkOnly, Mixed };

std::string_view length_direction_name(LengthDirection d) noexcept;

struct LengthChangeReport {
  ArrayKey key;
  std::uint32_t n_lengths = 0;
  std::uint32_t n_transitions = 0;
  LengthDirection direction = LengthDirection::GrowOnly;
};

std::optional<LengthChangeReport> detect_length_changes(const ArrayTrace& trace);

}  // namespace arraytrace
