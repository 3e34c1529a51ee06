#pragma once

// Text formats:
//
//   raw (.atrace), one access per line:
//     <arrayId> <r|w> <index> <length> <thread> <line> <CLASSHASH>
//   grouped (.agrp), one block per array:
//     <arrayId> <length> <nAccesses>
//     <r|w> <index> <thread> <line> <CLASSHASH>      (nAccesses times)
//   class map (.cmap):
//     <CLASSHASH> <class-file name>
//
// arrayId is "<type descriptor>@<lowercase hex hash>", CLASSHASH is uppercase
// hex without prefix. Writers emit single spaces and LF; readers accept any
// run of blanks and tolerate CRLF. Inputs ending in ".gz" are decompressed.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "arraytrace/trace_model.hpp"

namespace arraytrace {

class LineSource {
 public:
  virtual ~LineSource() = default;
  // Reads the next line without its terminator. False at end of input.
  virtual bool next(std::string& line) = 0;
  virtual const std::string& name() const = 0;
};

std::unique_ptr<LineSource> open_lines(const std::filesystem::path& path);
std::unique_ptr<LineSource> stream_lines(std::istream& in, std::string name = "<stream>");

// Expands directories (recursively) to their regular files and returns all in
// lexicographic order. Missing paths raise IoError.
std::vector<std::filesystem::path> collect_inputs(const std::vector<std::filesystem::path>& paths);

struct ParseDiagnostic {
  std::string source;
  std::uint64_t line_no = 0;
  std::string message;
};

struct ParseSummary {
  static constexpr std::size_t kMaxKeptDiagnostics = 64;

  std::uint64_t lines = 0;
  std::uint64_t records = 0;
  std::uint64_t malformed = 0;
  std::uint64_t normalized_tokens = 0;
  std::uint64_t dropped_blocks = 0;
  std::vector<ParseDiagnostic> diagnostics;  // first kMaxKeptDiagnostics only

  void report(std::string source, std::uint64_t line_no, std::string message);
  void merge(const ParseSummary& other);
};

struct ParseOptions {
  // Class tokens are read as hex; with this set the letter 'O' is taken as a
  // typo for the digit '0' (and counted in normalized_tokens).
  bool lenient_class_tokens = true;
};

std::optional<std::uint32_t> parse_class_token(std::string_view token, bool lenient,
                                               bool* normalized = nullptr) noexcept;

// ---------------------------------------------------------------- raw format

struct RawTraceLine {
  ArrayKey key;
  AccessRecord rec;

  friend bool operator==(const RawTraceLine&, const RawTraceLine&) = default;
};

// Returns nullopt and fills `error` for malformed lines.
std::optional<RawTraceLine> parse_raw_line(std::string_view line, std::string* error = nullptr,
                                           const ParseOptions& options = {},
                                           bool* normalized = nullptr);
std::string format_raw_line(const RawTraceLine& line);
void write_raw(std::ostream& out, const RawTraceLine& line);

class RawTraceReader {
 public:
  explicit RawTraceReader(LineSource& source, ParseOptions options = {});

  // Next well-formed record; malformed lines are counted and skipped.
  bool next(RawTraceLine& out);
  const ParseSummary& summary() const noexcept { return summary_; }

 private:
  LineSource& source_;
  ParseOptions options_;
  ParseSummary summary_;
  std::string line_;
  std::string last_id_;
  std::optional<ArrayKey> last_key_;
};

// ------------------------------------------------------------ grouped format

struct GroupedRecord {
  Mode mode = Mode::Read;
  std::int64_t index = 0;
  std::uint64_t thread = 0;
  std::int32_t line = -1;
  std::uint32_t class_hash = 0;

  friend bool operator==(const GroupedRecord&, const GroupedRecord&) = default;
};

struct GroupedArrayBlock {
  ArrayKey key;
  std::uint32_t header_length = 0;
  std::vector<GroupedRecord> records;

  std::uint64_t n_accesses() const noexcept { return records.size(); }

  friend bool operator==(const GroupedArrayBlock&, const GroupedArrayBlock&) = default;
};

// Throws ContractError for a block without records.
void write_grouped(std::ostream& out, const GroupedArrayBlock& block);

class GroupedReader {
 public:
  explicit GroupedReader(LineSource& source, ParseOptions options = {});

  // Next complete block. Blocks whose record count disagrees with the header
  // are reported and dropped.
  bool next(GroupedArrayBlock& out);
  const ParseSummary& summary() const noexcept { return summary_; }

 private:
  bool fetch();

  LineSource& source_;
  ParseOptions options_;
  ParseSummary summary_;
  std::string line_;
  bool pending_ = false;  // line_ holds an unconsumed line
};

// --------------------------------------------------------------- class map

struct ClassCollision {
  std::uint32_t hash = 0;
  std::string kept;
  std::string other;
};

class ClassMap {
 public:
  // Adds an entry; a second, different name for the same hash is recorded as
  // a collision and the first name is kept.
  void add(std::uint32_t hash, std::string name);
  const std::string* lookup(std::uint32_t hash) const noexcept;

  std::size_t size() const noexcept { return names_.size(); }
  const std::vector<ClassCollision>& collisions() const noexcept { return collisions_; }
  // Entries sorted by hash.
  std::vector<std::pair<std::uint32_t, std::string>> sorted_entries() const;

 private:
  std::unordered_map<std::uint32_t, std::string> names_;
  std::vector<ClassCollision> collisions_;
};

ClassMap parse_class_map(LineSource& source, ParseSummary* summary = nullptr,
                         const ParseOptions& options = {});
ClassMap load_class_map(const std::filesystem::path& path, ParseSummary* summary = nullptr);
void write_class_map(std::ostream& out, const ClassMap& map);

}  // namespace arraytrace
