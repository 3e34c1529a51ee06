#include "arraytrace/trace_io.hpp"

#include <zlib.h>

#include <algorithm>
#include <array>
#include <charconv>
#include <istream>
#include <ostream>

#include "arraytrace/error.hpp"

namespace arraytrace {

namespace fs = std::filesystem;

namespace {

class GzLineSource final : public LineSource {
 public:
  explicit GzLineSource(const fs::path& path) : name_(path.string()) {
    file_ = gzopen(name_.c_str(), "rb");
    if (file_ == nullptr) throw IoError("cannot open '" + name_ + "'");
    gzbuffer(file_, 1 << 18);
  }
  ~GzLineSource() override {
    if (file_ != nullptr) gzclose(file_);
  }
  GzLineSource(const GzLineSource&) = delete;
  GzLineSource& operator=(const GzLineSource&) = delete;

  bool next(std::string& line) override {
    line.clear();
    bool got_any = false;
    for (;;) {
      if (gzgets(file_, buf_.data(), static_cast<int>(buf_.size())) == nullptr) {
        int err = 0;
        const char* msg = gzerror(file_, &err);
        if (err != Z_OK && err != Z_BUF_ERROR)
          throw IoError("read error in '" + name_ + "': " + msg);
        break;
      }
      got_any = true;
      std::size_t n = std::char_traits<char>::length(buf_.data());
      if (n > 0 && buf_[n - 1] == '\n') {
        line.append(buf_.data(), n - 1);
        break;
      }
      line.append(buf_.data(), n);
    }
    if (!line.empty() && line.back() == '\r') line.pop_back();
    return got_any;
  }

  const std::string& name() const override { return name_; }

 private:
  std::string name_;
  gzFile file_ = nullptr;
  std::array<char, 4096> buf_{};
};

class StreamLineSource final : public LineSource {
 public:
  StreamLineSource(std::istream& in, std::string name) : in_(in), name_(std::move(name)) {}

  bool next(std::string& line) override {
    if (!std::getline(in_, line)) {
      if (in_.bad()) throw IoError("read error in '" + name_ + "'");
      return false;
    }
    if (!line.empty() && line.back() == '\r') line.pop_back();
    return true;
  }
  const std::string& name() const override { return name_; }

 private:
  std::istream& in_;
  std::string name_;
};

// Splits on blanks into at most fields.size() tokens; returns the token count,
// or fields.size() + 1 when there are more.
template <std::size_t N>
std::size_t split_fields(std::string_view line, std::array<std::string_view, N>& fields) {
  std::size_t count = 0;
  std::size_t pos = 0;
  while (pos < line.size()) {
    while (pos < line.size() && (line[pos] == ' ' || line[pos] == '\t')) ++pos;
    if (pos == line.size()) break;
    std::size_t end = pos;
    while (end < line.size() && line[end] != ' ' && line[end] != '\t') ++end;
    if (count == N) return N + 1;
    fields[count++] = line.substr(pos, end - pos);
    pos = end;
  }
  return count;
}

bool blank(std::string_view line) {
  return std::all_of(line.begin(), line.end(), [](char c) { return c == ' ' || c == '\t'; });
}

template <typename T>
bool parse_int(std::string_view token, T& out) {
  if (!token.empty() && token.front() == '+') return false;
  auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), out);
  return ec == std::errc() && ptr == token.data() + token.size();
}

void put_record_fields(std::string& s, Mode mode, std::int64_t index) {
  s += mode_char(mode);
  s += ' ';
  s += std::to_string(index);
}

}  // namespace

std::unique_ptr<LineSource> open_lines(const fs::path& path) {
  std::error_code ec;
  if (!fs::is_regular_file(path, ec))
    throw IoError("cannot open '" + path.string() + "': not a readable file");
  return std::make_unique<GzLineSource>(path);
}

std::unique_ptr<LineSource> stream_lines(std::istream& in, std::string name) {
  return std::make_unique<StreamLineSource>(in, std::move(name));
}

std::vector<fs::path> collect_inputs(const std::vector<fs::path>& paths) {
  std::vector<fs::path> out;
  for (const auto& p : paths) {
    std::error_code ec;
    if (fs::is_directory(p, ec)) {
      for (const auto& entry : fs::recursive_directory_iterator(p))
        if (entry.is_regular_file()) out.push_back(entry.path());
    } else if (fs::is_regular_file(p, ec)) {
      out.push_back(p);
    } else {
      throw IoError("input '" + p.string() + "' does not exist");
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

void ParseSummary::report(std::string source, std::uint64_t line_no, std::string message) {
  ++malformed;
  if (diagnostics.size() < kMaxKeptDiagnostics)
    diagnostics.push_back({std::move(source), line_no, std::move(message)});
}

void ParseSummary::merge(const ParseSummary& other) {
  lines += other.lines;
  records += other.records;
  malformed += other.malformed;
  normalized_tokens += other.normalized_tokens;
  dropped_blocks += other.dropped_blocks;
  for (const auto& d : other.diagnostics) {
    if (diagnostics.size() >= kMaxKeptDiagnostics) break;
    diagnostics.push_back(d);
  }
}

std::optional<std::uint32_t> parse_class_token(std::string_view token, bool lenient,
                                               bool* normalized) noexcept {
  if (token.empty() || token.size() > 8) return std::nullopt;
  std::array<char, 8> buf{};
  bool fixed = false;
  for (std::size_t i = 0; i < token.size(); ++i) {
    char c = token[i];
    if (lenient && (c == 'O' || c == 'o')) {
      c = '0';
      fixed = true;
    }
    buf[i] = c;
  }
  std::uint32_t v = 0;
  auto [ptr, ec] = std::from_chars(buf.data(), buf.data() + token.size(), v, 16);
  if (ec != std::errc() || ptr != buf.data() + token.size()) return std::nullopt;
  if (normalized != nullptr) *normalized = fixed;
  return v;
}

// ------------------------------------------------------------------ raw

namespace {

std::optional<RawTraceLine> parse_raw_fields(const std::array<std::string_view, 7>& f,
                                             const ArrayKey* cached_key, std::string* error,
                                             const ParseOptions& options, bool* normalized) {
  auto fail = [&](std::string msg) -> std::optional<RawTraceLine> {
    if (error != nullptr) *error = std::move(msg);
    return std::nullopt;
  };
  RawTraceLine out;
  if (cached_key != nullptr) {
    out.key = *cached_key;
  } else {
    auto key = ArrayKey::try_parse_id(f[0]);
    if (!key) return fail("bad array id '" + std::string(f[0]) + "'");
    out.key = std::move(*key);
  }
  auto mode = parse_mode(f[1]);
  if (!mode) return fail("bad mode '" + std::string(f[1]) + "'");
  out.rec.mode = *mode;
  if (!parse_int(f[2], out.rec.index)) return fail("bad index '" + std::string(f[2]) + "'");
  if (!parse_int(f[3], out.rec.length)) return fail("bad length '" + std::string(f[3]) + "'");
  if (!parse_int(f[4], out.rec.thread)) return fail("bad thread '" + std::string(f[4]) + "'");
  if (!parse_int(f[5], out.rec.line)) return fail("bad line '" + std::string(f[5]) + "'");
  auto cls = parse_class_token(f[6], options.lenient_class_tokens, normalized);
  if (!cls) return fail("bad class hash '" + std::string(f[6]) + "'");
  out.rec.class_hash = *cls;
  return out;
}

}  // namespace

std::optional<RawTraceLine> parse_raw_line(std::string_view line, std::string* error,
                                           const ParseOptions& options, bool* normalized) {
  std::array<std::string_view, 7> f;
  std::size_t n = split_fields(line, f);
  if (n != 7) {
    if (error != nullptr)
      *error = "expected 7 fields, found " + (n > 7 ? std::string("more") : std::to_string(n));
    return std::nullopt;
  }
  return parse_raw_fields(f, nullptr, error, options, normalized);
}

std::string format_raw_line(const RawTraceLine& l) {
  std::string s = l.key.id();
  s += ' ';
  put_record_fields(s, l.rec.mode, l.rec.index);
  s += ' ';
  s += std::to_string(l.rec.length);
  s += ' ';
  s += std::to_string(l.rec.thread);
  s += ' ';
  s += std::to_string(l.rec.line);
  s += ' ';
  s += hex_upper(l.rec.class_hash);
  return s;
}

void write_raw(std::ostream& out, const RawTraceLine& line) {
  out << format_raw_line(line) << '\n';
  if (!out) throw IoError("write failed");
}

RawTraceReader::RawTraceReader(LineSource& source, ParseOptions options)
    : source_(source), options_(options) {}

bool RawTraceReader::next(RawTraceLine& out) {
  std::array<std::string_view, 7> f;
  std::string error;
  while (source_.next(line_)) {
    ++summary_.lines;
    if (blank(line_)) continue;
    std::size_t n = split_fields(std::string_view(line_), f);
    if (n != 7) {
      summary_.report(source_.name(), summary_.lines,
                      "expected 7 fields, found " + (n > 7 ? std::string("more") : std::to_string(n)));
      continue;
    }
    const ArrayKey* cached = (last_key_ && f[0] == last_id_) ? &*last_key_ : nullptr;
    bool normalized = false;
    auto parsed = parse_raw_fields(f, cached, &error, options_, &normalized);
    if (!parsed) {
      summary_.report(source_.name(), summary_.lines, error);
      continue;
    }
    if (cached == nullptr) {
      last_id_.assign(f[0]);
      last_key_ = parsed->key;
    }
    if (normalized) ++summary_.normalized_tokens;
    ++summary_.records;
    out = std::move(*parsed);
    return true;
  }
  return false;
}

// -------------------------------------------------------------- grouped

void write_grouped(std::ostream& out, const GroupedArrayBlock& block) {
  if (block.records.empty())
    throw ContractError("write_grouped: block " + block.key.id() + " has no records");
  std::string s = block.key.id();
  s += ' ';
  s += std::to_string(block.header_length);
  s += ' ';
  s += std::to_string(block.records.size());
  s += '\n';
  for (const auto& r : block.records) {
    put_record_fields(s, r.mode, r.index);
    s += ' ';
    s += std::to_string(r.thread);
    s += ' ';
    s += std::to_string(r.line);
    s += ' ';
    s += hex_upper(r.class_hash);
    s += '\n';
  }
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
  if (!out) throw IoError("write failed");
}

GroupedReader::GroupedReader(LineSource& source, ParseOptions options)
    : source_(source), options_(options) {}

bool GroupedReader::fetch() {
  if (pending_) {
    pending_ = false;
    return true;
  }
  while (source_.next(line_)) {
    ++summary_.lines;
    if (!blank(line_)) return true;
  }
  return false;
}

bool GroupedReader::next(GroupedArrayBlock& out) {
  std::array<std::string_view, 5> f;
  while (fetch()) {
    std::size_t n = split_fields(std::string_view(line_), f);
    if (n != 3 || f[0].find('@') == std::string_view::npos) {
      summary_.report(source_.name(), summary_.lines, "expected block header, skipping line");
      continue;
    }
    std::uint64_t header_line = summary_.lines;
    auto key = ArrayKey::try_parse_id(f[0]);
    std::uint32_t length = 0;
    std::uint64_t count = 0;
    if (!key || !parse_int(f[1], length) || !parse_int(f[2], count)) {
      summary_.report(source_.name(), header_line, "malformed block header");
      ++summary_.dropped_blocks;
      // Skip the block's record lines.
      while (fetch()) {
        if (split_fields(std::string_view(line_), f) == 3) {
          pending_ = true;
          break;
        }
      }
      continue;
    }
    GroupedArrayBlock block;
    block.key = std::move(*key);
    block.header_length = length;
    block.records.reserve(static_cast<std::size_t>(std::min<std::uint64_t>(count, 1u << 20)));
    bool bad_record = false;
    std::uint64_t normalized_here = 0;
    while (block.records.size() < count) {
      if (!fetch()) break;
      std::size_t m = split_fields(std::string_view(line_), f);
      if (m == 3 && f[0].find('@') != std::string_view::npos) {
        pending_ = true;
        break;
      }
      GroupedRecord r;
      bool normalized = false;
      std::optional<Mode> mode;
      std::optional<std::uint32_t> cls;
      if (m != 5 || !(mode = parse_mode(f[0])) || !parse_int(f[1], r.index) ||
          !parse_int(f[2], r.thread) || !parse_int(f[3], r.line) ||
          !(cls = parse_class_token(f[4], options_.lenient_class_tokens, &normalized))) {
        summary_.report(source_.name(), summary_.lines, "malformed access record");
        bad_record = true;
        continue;
      }
      if (normalized) ++normalized_here;
      r.mode = *mode;
      r.class_hash = *cls;
      block.records.push_back(r);
    }
    if (block.records.size() != count || bad_record) {
      summary_.report(source_.name(), header_line,
                      "block " + block.key.id() + " declares " + std::to_string(count) +
                          " accesses, " + std::to_string(block.records.size()) +
                          " well-formed present; block dropped");
      ++summary_.dropped_blocks;
      continue;
    }
    // Trailing record lines beyond the declared count.
    while (fetch()) {
      std::size_t m = split_fields(std::string_view(line_), f);
      if (m == 3 && f[0].find('@') != std::string_view::npos) {
        pending_ = true;
        break;
      }
      summary_.report(source_.name(), summary_.lines,
                      "record beyond declared count of " + block.key.id());
    }
    if (block.records.empty()) {
      summary_.report(source_.name(), header_line, "block without accesses dropped");
      ++summary_.dropped_blocks;
      continue;
    }
    summary_.records += block.records.size();
    summary_.normalized_tokens += normalized_here;
    out = std::move(block);
    return true;
  }
  return false;
}

// ------------------------------------------------------------ class map

void ClassMap::add(std::uint32_t hash, std::string name) {
  auto [it, inserted] = names_.try_emplace(hash, std::move(name));
  if (!inserted && it->second != name) collisions_.push_back({hash, it->second, name});
}

const std::string* ClassMap::lookup(std::uint32_t hash) const noexcept {
  auto it = names_.find(hash);
  return it == names_.end() ? nullptr : &it->second;
}

std::vector<std::pair<std::uint32_t, std::string>> ClassMap::sorted_entries() const {
  std::vector<std::pair<std::uint32_t, std::string>> out(names_.begin(), names_.end());
  std::sort(out.begin(), out.end());
  return out;
}

ClassMap parse_class_map(LineSource& source, ParseSummary* summary, const ParseOptions& options) {
  ClassMap map;
  ParseSummary local;
  ParseSummary& s = summary != nullptr ? *summary : local;
  std::string line;
  std::array<std::string_view, 2> f;
  while (source.next(line)) {
    ++s.lines;
    if (blank(line)) continue;
    if (split_fields(std::string_view(line), f) != 2) {
      s.report(source.name(), s.lines, "expected '<hexHash> <name>'");
      continue;
    }
    bool normalized = false;
    auto hash = parse_class_token(f[0], options.lenient_class_tokens, &normalized);
    if (!hash) {
      s.report(source.name(), s.lines, "bad class hash '" + std::string(f[0]) + "'");
      continue;
    }
    if (normalized) ++s.normalized_tokens;
    ++s.records;
    map.add(*hash, std::string(f[1]));
  }
  return map;
}

ClassMap load_class_map(const fs::path& path, ParseSummary* summary) {
  auto src = open_lines(path);
  return parse_class_map(*src, summary);
}

void write_class_map(std::ostream& out, const ClassMap& map) {
  for (const auto& [hash, name] : map.sorted_entries()) out << hex_upper(hash) << ' ' << name << '\n';
  if (!out) throw IoError("write failed");
}

}  // namespace arraytrace
