#pragma once

// End-to-end drivers behind the command-line subcommands.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "arraytrace/pattern_extract.hpp"
#include "arraytrace/sequencer.hpp"
#include "arraytrace/stats.hpp"
#include "arraytrace/trace_io.hpp"

namespace arraytrace {

enum class InputFormat : std::uint8_t { Auto, Raw, Grouped };

std::optional<InputFormat> parse_input_format(std::string_view name) noexcept;

// By extension (.atrace / .agrp, optionally .gz), else by the field count of
// the first non-blank line (7 raw, 3 grouped header). Empty files are raw.
InputFormat sniff_format(const std::filesystem::path& path);

std::size_t default_workers() noexcept;

struct TraceSourceOptions {
  InputFormat format = InputFormat::Auto;
  GroupOptions group;
  ParseOptions parse;
};

// Streams one ArrayTrace per array from raw and/or grouped inputs. Raw inputs
// are grouped together (an array may span files); grouped blocks are passed
// through in file order.
void for_each_trace(const std::vector<std::filesystem::path>& inputs, const TraceSourceOptions& options,
                    const std::function<void(ArrayTrace&&)>& sink, ParseSummary* summary = nullptr);

// ------------------------------------------------------------ group

struct GroupResult {
  std::uint64_t arrays = 0;
  std::uint64_t accesses = 0;
  std::size_t runs_spilled = 0;
  std::size_t merge_passes = 0;
  ParseSummary parse;
};

GroupResult run_group(const std::vector<std::filesystem::path>& inputs, std::ostream& out,
                      const GroupOptions& group = {}, const ParseOptions& parse = {});

// ------------------------------------------------------------ sequence

struct SequenceRunOptions {
  SequencerOptions sequencer;
  LengthField length_field = LengthField::Slice;
  std::size_t workers = 1;
  TraceSourceOptions source;
};

struct SequenceResult {
  std::uint64_t arrays = 0;
  std::uint64_t accesses = 0;
  std::uint64_t patterns = 0;
  std::uint64_t full = 0;
  std::uint64_t partial = 0;
  std::uint64_t none = 0;
  ShapeShares shares;
  ParseSummary parse;

  nlohmann::ordered_json summary_json(ShapeRound round) const;
};

// Writes one JSON line per distinct pattern (digest order):
//   {"pattern_digest", "encoding_text", "coverage", "member_count", "pattern_len",
//    "total_accesses"}
// where total_accesses = pattern_len * member_count.
SequenceResult run_sequence(const std::vector<std::filesystem::path>& inputs, std::ostream& jsonl,
                            const SequenceRunOptions& options = {});

// ------------------------------------------------------------ stats

struct StatsRunOptions {
  StatsOptions stats;
  TraceSourceOptions source;
  std::optional<ScopeFilter> scope;
};

struct StatsResult {
  StatsReport report;
  StatsReport unresolved;  // UnresolvedPolicy::Separate only
  std::uint64_t out_of_scope = 0;
  std::uint64_t unresolved_arrays = 0;
  std::uint64_t unresolved_lookups = 0;
  ParseSummary parse;
};

StatsResult run_stats(const std::vector<std::filesystem::path>& inputs, const StatsRunOptions& options);

}  // namespace arraytrace
