#pragma once

// Array usage statistics. Per-array facts are folded into a StatsReport, a
// mergeable accumulator: reports built over disjoint shards and merged in any
// order equal the report of one sequential pass. Pattern-level numbers
// (sharing buckets, sequencing coverage, shape shares) are derived from the
// accumulated pattern table when the report is rendered.

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "arraytrace/digest.hpp"
#include "arraytrace/pattern_extract.hpp"
#include "arraytrace/sequencer.hpp"
#include "arraytrace/trace_io.hpp"
#include "arraytrace/trace_model.hpp"

namespace arraytrace {

// ------------------------------------------------------------ element types

enum class TypeCategoryKind : std::uint8_t { Primitive, JavaStdlib, ScalaStdlib, OtherObject, NestedArray };

inline constexpr std::size_t kTypeCategoryCount = 5;

std::string_view type_category_name(TypeCategoryKind k) noexcept;

struct TypeCategory {
  TypeCategoryKind cat = TypeCategoryKind::OtherObject;
  int depth = 1;
  std::string innermost;  // "int", "byte", "java.lang.Object", ...

  friend bool operator==(const TypeCategory&, const TypeCategory&) = default;
};

struct TypePrefixes {
  std::vector<std::string> java{"java.", "javax.", "jdk.", "sun."};
  std::vector<std::string> scala{"scala."};
};

TypeCategory categorize_type(const TypeDescriptor& desc, const TypePrefixes& prefixes = {});
// Parses leniently (a missing ';' after an object element name is accepted).
TypeCategory categorize_type(std::string_view descriptor, const TypePrefixes& prefixes = {});

// ------------------------------------------------------------ per-array facts

SliceMode classify_rw(const ArrayTrace& trace);

struct IndexCoverage {
  std::uint64_t accessed = 0;     // distinct in-bounds indices
  std::uint64_t denominator = 0;  // largest observed length
  std::uint64_t oob_count = 0;    // accesses outside the length at access time

  double fraction() const noexcept;
  bool full() const noexcept { return denominator > 0 && accessed >= denominator; }
};

IndexCoverage index_coverage(const ArrayTrace& trace);

struct ArrayFacts {
  TypeCategory category;
  std::string element_type;  // type descriptor, for the element census
  std::uint32_t length = 0;  // largest observed length
  std::uint64_t n_accesses = 0;
  SliceMode rw = SliceMode::ReadOnly;
  IndexCoverage coverage;
  std::uint32_t n_threads = 0;
  std::uint32_t n_classes = 0;
  std::optional<LengthChangeReport> length_change;
  std::vector<std::pair<std::uint32_t, std::int32_t>> callsites;  // (class, line), distinct
  std::vector<std::uint32_t> classes;
  AccessPattern pattern;
  Digest digest;
};

ArrayFacts derive_facts(const ArrayTrace& trace, const TypePrefixes& prefixes = {});

// ------------------------------------------------------------ class scope

enum class UnresolvedPolicy : std::uint8_t { Include, Exclude, Separate };
enum class ScopeVerdict : std::uint8_t { InScope, OutOfScope, Unresolved };

struct ScopeFilter {
  const ClassMap* classes = nullptr;
  std::string prefix;
  UnresolvedPolicy unresolved = UnresolvedPolicy::Exclude;
};

// In scope when every access's class resolves to a name with the prefix.
// Arrays whose resolvable classes all match but that have unresolvable ones
// are routed by the policy. `unresolved_lookups` counts failed lookups.
ScopeVerdict scope_of(const ArrayTrace& trace, const ScopeFilter& filter,
                      std::uint64_t* unresolved_lookups = nullptr);

struct ScopeSplit {
  std::vector<ArrayTrace> in_scope;
  std::vector<ArrayTrace> out_of_scope;
  std::vector<ArrayTrace> unresolved;  // only with UnresolvedPolicy::Separate
  std::uint64_t unresolved_lookups = 0;
};

ScopeSplit class_scope_filter(std::vector<ArrayTrace> traces, const ScopeFilter& filter);

// ------------------------------------------------------------ pattern buckets

struct PatternBuckets {
  static constexpr std::size_t kCount = 8;
  static constexpr std::array<std::string_view, kCount> kLabels{
      "1", "2", "3", "4", "5-100", "101-1000", "1001-10000", ">10000"};

  std::array<std::uint64_t, kCount> patterns{};
  std::uint64_t n_patterns = 0;
  std::uint64_t n_arrays = 0;

  static std::size_t bucket_of(std::uint64_t group_size) noexcept;
  // Arrays per pattern.
  double mean() const noexcept;
};

PatternBuckets pattern_distribution(std::span<const std::uint64_t> group_sizes);
PatternBuckets pattern_distribution(std::span<const PatternGroup> groups);

// ------------------------------------------------------------ report

struct StatsOptions {
  TypePrefixes prefixes;
  SequencerOptions sequencer;
  std::size_t workers = 1;  // for sequencing unique patterns
};

struct CategoryStats {
  std::uint64_t arrays = 0;
  std::uint64_t length_sum = 0;
  std::uint32_t max_length = 0;
  std::uint32_t min_length = 0;

  friend bool operator==(const CategoryStats&, const CategoryStats&) = default;
};

struct LengthChangeStats {
  std::uint64_t arrays = 0;
  std::uint64_t single_change = 0;
  std::uint64_t one_direction = 0;
  std::uint64_t mixed = 0;

  friend bool operator==(const LengthChangeStats&, const LengthChangeStats&) = default;
};

class StatsReport {
 public:
  static constexpr std::size_t kCoverageBuckets = 10;  // deciles below 100 %

  void accumulate(const ArrayFacts& facts);
  void accumulate(const ArrayTrace& trace, const TypePrefixes& prefixes = {});
  void merge(const StatsReport& other);

  std::uint64_t n_arrays() const noexcept { return n_arrays_; }
  std::uint64_t n_accesses() const noexcept { return n_accesses_; }
  std::uint64_t n_patterns() const noexcept;
  std::uint64_t read_only() const noexcept { return rw_[0]; }
  std::uint64_t write_only() const noexcept { return rw_[1]; }
  std::uint64_t read_write() const noexcept { return rw_[2]; }
  const std::map<std::uint32_t, std::uint64_t>& length_hist() const noexcept { return length_hist_; }
  const std::map<std::uint32_t, std::uint64_t>& threads_hist() const noexcept { return threads_hist_; }
  const std::map<std::uint32_t, std::uint64_t>& classes_hist() const noexcept { return classes_hist_; }
  const std::array<std::uint64_t, kCoverageBuckets>& coverage_buckets() const noexcept {
    return coverage_buckets_;
  }
  std::uint64_t fully_covered() const noexcept { return fully_covered_; }
  std::uint64_t oob_arrays() const noexcept { return oob_arrays_; }
  std::uint64_t oob_accesses() const noexcept { return oob_accesses_; }
  const CategoryStats& category(TypeCategoryKind k) const noexcept {
    return categories_[static_cast<std::size_t>(k)];
  }
  const LengthChangeStats& length_changes() const noexcept { return length_changes_; }
  std::size_t n_callsites() const noexcept { return callsites_.size(); }
  std::size_t n_classes_touched() const noexcept { return classes_.size(); }

  // Group sizes of the distinct patterns, in digest order.
  std::vector<std::uint64_t> pattern_group_sizes() const;

  struct SequencingSummary {
    std::uint64_t full = 0;
    std::uint64_t partial = 0;
    std::uint64_t none = 0;
    ShapeShares shares;
  };
  SequencingSummary sequencing(const SequencerOptions& options, std::size_t workers = 1) const;

  // Full report with a stable field order.
  nlohmann::ordered_json to_json(const StatsOptions& options, const std::string& corpus = "") const;

  friend bool operator==(const StatsReport&, const StatsReport&) = default;

 private:
  struct PatternCount {
    AccessPattern pattern;
    std::uint64_t arrays = 0;
    friend bool operator==(const PatternCount&, const PatternCount&) = default;
  };

  void add_pattern(const Digest& digest, const AccessPattern& pattern, std::uint64_t arrays);

  std::uint64_t n_arrays_ = 0;
  std::uint64_t n_accesses_ = 0;
  std::array<std::uint64_t, 3> rw_{};
  std::map<std::uint32_t, std::uint64_t> length_hist_;
  std::array<std::uint64_t, kCoverageBuckets> coverage_buckets_{};
  std::uint64_t fully_covered_ = 0;
  std::uint64_t oob_arrays_ = 0;
  std::uint64_t oob_accesses_ = 0;
  std::array<CategoryStats, kTypeCategoryCount> categories_{};
  std::map<int, std::uint64_t> nesting_depths_;
  std::map<std::string, std::uint64_t> element_types_;
  std::map<std::uint32_t, std::uint64_t> threads_hist_;
  std::map<std::uint32_t, std::uint64_t> classes_hist_;
  LengthChangeStats length_changes_;
  std::set<std::pair<std::uint32_t, std::int32_t>> callsites_;
  std::set<std::uint32_t> classes_;
  std::map<Digest, std::vector<PatternCount>> patterns_;
};

// Percentage with one decimal, from exact integers (half rounds up).
double percent_1dp(std::uint64_t num, std::uint64_t den) noexcept;

// Writes report.json and the CSV tables into `dir`.
void write_report_files(const StatsReport& report, const StatsOptions& options,
                        const std::filesystem::path& dir, const std::string& corpus,
                        const nlohmann::ordered_json& extra = nullptr);

}  // namespace arraytrace
