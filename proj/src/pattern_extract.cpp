#include "arraytrace/pattern_extract.hpp"

#include <unistd.h>

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <queue>

#include "arraytrace/error.hpp"

namespace arraytrace {

namespace fs = std::filesystem;

// ------------------------------------------------------------ ArrayTrace

ArrayTrace ArrayTrace::from_records(ArrayKey key, std::vector<AccessRecord> records) {
  ArrayTrace t;
  t.key = std::move(key);
  t.records = std::move(records);
  for (const auto& r : t.records) {
    t.distinct_classes.push_back(r.class_hash);
    t.distinct_threads.push_back(r.thread);
    if (std::find(t.lengths_seen.begin(), t.lengths_seen.end(), r.length) == t.lengths_seen.end())
      t.lengths_seen.push_back(r.length);
  }
  std::sort(t.distinct_classes.begin(), t.distinct_classes.end());
  t.distinct_classes.erase(std::unique(t.distinct_classes.begin(), t.distinct_classes.end()),
                           t.distinct_classes.end());
  std::sort(t.distinct_threads.begin(), t.distinct_threads.end());
  t.distinct_threads.erase(std::unique(t.distinct_threads.begin(), t.distinct_threads.end()),
                           t.distinct_threads.end());
  return t;
}

ArrayTrace ArrayTrace::from_block(const GroupedArrayBlock& block) {
  std::vector<AccessRecord> recs;
  recs.reserve(block.records.size());
  for (const auto& r : block.records)
    recs.push_back({r.mode, r.index, block.header_length, r.thread, r.line, r.class_hash});
  return from_records(block.key, std::move(recs));
}

std::uint32_t ArrayTrace::max_length() const noexcept {
  std::uint32_t m = 0;
  for (auto l : lengths_seen) m = std::max(m, l);
  return m;
}

GroupedArrayBlock ArrayTrace::to_block() const {
  GroupedArrayBlock b;
  b.key = key;
  b.header_length = records.empty() ? 0 : records.front().length;
  b.records.reserve(records.size());
  for (const auto& r : records) b.records.push_back({r.mode, r.index, r.thread, r.line, r.class_hash});
  return b;
}

// ------------------------------------------------------------ spill files

fs::path default_spill_dir() {
  if (const char* env = std::getenv("ARRAYTRACE_TMP"); env != nullptr && *env != '\0')
    return fs::path(env);
  return fs::temp_directory_path();
}

class ArrayGrouper::SpillDir {
 public:
  explicit SpillDir(const fs::path& base) {
    std::error_code ec;
    fs::create_directories(base, ec);
    static std::atomic<unsigned> counter{0};
    for (int attempt = 0; attempt < 1000; ++attempt) {
      fs::path candidate = base / ("arraytrace-spill-" + std::to_string(::getpid()) + "-" +
                                   std::to_string(counter++));
      if (fs::create_directory(candidate, ec)) {
        path_ = candidate;
        return;
      }
      if (ec) break;
    }
    throw IoError("cannot create spill directory under '" + base.string() + "'" +
                  (ec ? ": " + ec.message() : std::string()));
  }
  ~SpillDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  const fs::path& path() const noexcept { return path_; }

 private:
  fs::path path_;
};

namespace {

constexpr std::size_t kRunRecordBytes = 4 + 4 + 8 + 1 + 8 + 4 + 8 + 4 + 4;
constexpr std::size_t kRunBufferBytes = std::size_t{1} << 18;

struct RunItem {
  std::uint32_t type_id = 0;
  std::uint32_t hash = 0;
  std::uint64_t seq = 0;
  AccessRecord rec;
};

template <typename T>
void put(std::uint8_t*& p, T v) {
  std::memcpy(p, &v, sizeof(T));
  p += sizeof(T);
}

template <typename T>
T get(const std::uint8_t*& p) {
  T v;
  std::memcpy(&v, p, sizeof(T));
  p += sizeof(T);
  return v;
}

class RunWriter {
 public:
  explicit RunWriter(const fs::path& path) : path_(path) {
    file_ = std::fopen(path.c_str(), "wb");
    if (file_ == nullptr) throw IoError("cannot create spill file '" + path.string() + "'");
    std::setvbuf(file_, nullptr, _IOFBF, kRunBufferBytes);
  }
  ~RunWriter() {
    if (file_ != nullptr) std::fclose(file_);
  }
  RunWriter(const RunWriter&) = delete;
  RunWriter& operator=(const RunWriter&) = delete;

  void write(std::uint32_t type_id, std::uint32_t hash, std::uint64_t seq, const AccessRecord& r) {
    std::uint8_t buf[kRunRecordBytes];
    std::uint8_t* p = buf;
    put(p, type_id);
    put(p, hash);
    put(p, seq);
    put(p, static_cast<std::uint8_t>(r.mode));
    put(p, r.index);
    put(p, r.length);
    put(p, r.thread);
    put(p, r.line);
    put(p, r.class_hash);
    if (std::fwrite(buf, 1, sizeof buf, file_) != sizeof buf)
      throw IoError("spill write failed for '" + path_.string() + "'");
  }

  void close() {
    if (std::fclose(file_) != 0) {
      file_ = nullptr;
      throw IoError("spill write failed for '" + path_.string() + "'");
    }
    file_ = nullptr;
  }

 private:
  fs::path path_;
  std::FILE* file_ = nullptr;
};

class RunReader {
 public:
  explicit RunReader(const fs::path& path) : path_(path) {
    file_ = std::fopen(path.c_str(), "rb");
    if (file_ == nullptr) throw IoError("cannot reopen spill file '" + path.string() + "'");
    std::setvbuf(file_, nullptr, _IOFBF, kRunBufferBytes);
  }
  ~RunReader() {
    if (file_ != nullptr) std::fclose(file_);
  }
  RunReader(const RunReader&) = delete;
  RunReader& operator=(const RunReader&) = delete;

  bool next(RunItem& out) {
    std::uint8_t buf[kRunRecordBytes];
    std::size_t n = std::fread(buf, 1, sizeof buf, file_);
    if (n == 0 && std::feof(file_)) return false;
    if (n != sizeof buf) throw IoError("truncated spill file '" + path_.string() + "'");
    const std::uint8_t* p = buf;
    out.type_id = get<std::uint32_t>(p);
    out.hash = get<std::uint32_t>(p);
    out.seq = get<std::uint64_t>(p);
    out.rec.mode = static_cast<Mode>(get<std::uint8_t>(p));
    out.rec.index = get<std::int64_t>(p);
    out.rec.length = get<std::uint32_t>(p);
    out.rec.thread = get<std::uint64_t>(p);
    out.rec.line = get<std::int32_t>(p);
    out.rec.class_hash = get<std::uint32_t>(p);
    return true;
  }

 private:
  fs::path path_;
  std::FILE* file_ = nullptr;
};

std::vector<std::uint32_t> rank_types(const std::vector<TypeDescriptor>& types) {
  std::vector<std::uint32_t> order(types.size());
  for (std::uint32_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(),
            [&](std::uint32_t a, std::uint32_t b) { return types[a].raw < types[b].raw; });
  std::vector<std::uint32_t> rank(types.size());
  for (std::uint32_t r = 0; r < order.size(); ++r) rank[order[r]] = r;
  return rank;
}

}  // namespace

// ------------------------------------------------------------ ArrayGrouper

ArrayGrouper::ArrayGrouper(GroupOptions options) : options_(std::move(options)) {
  if (options_.memory_budget < kMinGroupBudget)
    throw ResourceError("memory budget of " + std::to_string(options_.memory_budget) +
                        " bytes is below the minimum of " + std::to_string(kMinGroupBudget));
  if (options_.merge_fan_in < 2) options_.merge_fan_in = 2;
  if (options_.spill_dir.empty()) options_.spill_dir = default_spill_dir();
  buffer_capacity_ = options_.memory_budget / 2 / sizeof(Item);
}

ArrayGrouper::~ArrayGrouper() = default;

std::uint32_t ArrayGrouper::intern(const TypeDescriptor& type) {
  auto it = type_ids_.find(type.raw);
  if (it != type_ids_.end()) return it->second;
  auto id = static_cast<std::uint32_t>(types_.size());
  types_.push_back(type);
  type_ids_.emplace(type.raw, id);
  return id;
}

void ArrayGrouper::add(const RawTraceLine& line) {
  if (finished_) throw ContractError("ArrayGrouper::add after finish");
  if (buffer_.empty()) buffer_.reserve(std::min<std::size_t>(buffer_capacity_, 1u << 16));
  if (buffer_.size() >= buffer_capacity_) spill();
  buffer_.push_back({intern(line.key.type), line.key.hash_token, next_seq_++, line.rec});
}

void ArrayGrouper::sort_buffer() {
  auto rank = rank_types(types_);
  std::sort(buffer_.begin(), buffer_.end(), [&](const Item& a, const Item& b) {
    if (a.type_id != b.type_id) return rank[a.type_id] < rank[b.type_id];
    if (a.hash != b.hash) return a.hash < b.hash;
    return a.seq < b.seq;
  });
}

fs::path ArrayGrouper::next_run_path() {
  if (!spill_dir_) spill_dir_ = std::make_unique<SpillDir>(options_.spill_dir);
  return spill_dir_->path() / ("run-" + std::to_string(run_counter_++) + ".bin");
}

void ArrayGrouper::spill() {
  if (buffer_.empty()) return;
  sort_buffer();
  fs::path path = next_run_path();
  RunWriter w(path);
  for (const auto& it : buffer_) w.write(it.type_id, it.hash, it.seq, it.rec);
  w.close();
  runs_.push_back(path);
  ++runs_spilled_;
  buffer_.clear();
}

void ArrayGrouper::check_trace_fits(std::size_t n_records) const {
  if (n_records * sizeof(AccessRecord) > options_.memory_budget / 2)
    throw ResourceError("a single array has " + std::to_string(n_records) +
                        " accesses, more than the memory budget of " +
                        std::to_string(options_.memory_budget) + " bytes can hold");
}

void ArrayGrouper::emit_from_buffer(const std::function<void(ArrayTrace&&)>& sink) {
  std::size_t i = 0;
  while (i < buffer_.size()) {
    std::size_t j = i;
    std::vector<AccessRecord> recs;
    while (j < buffer_.size() && buffer_[j].type_id == buffer_[i].type_id &&
           buffer_[j].hash == buffer_[i].hash)
      recs.push_back(buffer_[j++].rec);
    sink(ArrayTrace::from_records(ArrayKey{types_[buffer_[i].type_id], buffer_[i].hash},
                                  std::move(recs)));
    i = j;
  }
}

void ArrayGrouper::finish(const std::function<void(ArrayTrace&&)>& sink) {
  if (finished_) throw ContractError("ArrayGrouper::finish called twice");
  finished_ = true;
  if (runs_.empty()) {
    sort_buffer();
    emit_from_buffer(sink);
    buffer_ = {};
    return;
  }
  spill();
  buffer_ = {};
  auto rank = rank_types(types_);

  struct Head {
    RunItem item;
    std::size_t reader;
  };
  auto later = [&](const Head& a, const Head& b) {
    if (a.item.type_id != b.item.type_id) return rank[a.item.type_id] > rank[b.item.type_id];
    if (a.item.hash != b.item.hash) return a.item.hash > b.item.hash;
    return a.item.seq > b.item.seq;
  };

  // Merges `inputs` in order, feeding every item to `out`.
  auto merge = [&](const std::vector<fs::path>& inputs, auto&& out) {
    std::vector<std::unique_ptr<RunReader>> readers;
    std::priority_queue<Head, std::vector<Head>, decltype(later)> heap(later);
    for (const auto& p : inputs) {
      readers.push_back(std::make_unique<RunReader>(p));
      Head h{{}, readers.size() - 1};
      if (readers.back()->next(h.item)) heap.push(h);
    }
    while (!heap.empty()) {
      Head h = heap.top();
      heap.pop();
      out(h.item);
      if (readers[h.reader]->next(h.item)) heap.push(h);
    }
  };

  while (runs_.size() > options_.merge_fan_in) {
    std::vector<fs::path> next;
    for (std::size_t i = 0; i < runs_.size(); i += options_.merge_fan_in) {
      std::vector<fs::path> batch(runs_.begin() + static_cast<std::ptrdiff_t>(i),
                                  runs_.begin() + static_cast<std::ptrdiff_t>(
                                                      std::min(runs_.size(), i + options_.merge_fan_in)));
      if (batch.size() == 1) {
        next.push_back(batch.front());
        continue;
      }
      fs::path path = next_run_path();
      RunWriter w(path);
      merge(batch, [&](const RunItem& it) { w.write(it.type_id, it.hash, it.seq, it.rec); });
      w.close();
      for (const auto& p : batch) fs::remove(p);
      next.push_back(path);
    }
    runs_ = std::move(next);
    ++merge_passes_;
  }

  bool have = false;
  std::uint32_t cur_type = 0;
  std::uint32_t cur_hash = 0;
  std::vector<AccessRecord> recs;
  auto flush = [&] {
    if (!have) return;
    sink(ArrayTrace::from_records(ArrayKey{types_[cur_type], cur_hash}, std::move(recs)));
    recs = {};
  };
  merge(runs_, [&](const RunItem& it) {
    if (!have || it.type_id != cur_type || it.hash != cur_hash) {
      flush();
      have = true;
      cur_type = it.type_id;
      cur_hash = it.hash;
    }
    recs.push_back(it.rec);
    if ((recs.size() & 0xffff) == 0) check_trace_fits(recs.size());
  });
  flush();
  ++merge_passes_;
  for (const auto& p : runs_) fs::remove(p);
  runs_.clear();
  spill_dir_.reset();
}

void group_by_array(RawTraceReader& reader, const GroupOptions& options,
                    const std::function<void(ArrayTrace&&)>& sink) {
  ArrayGrouper g(options);
  RawTraceLine line;
  while (reader.next(line)) g.add(line);
  g.finish(sink);
}

// ------------------------------------------------------------ patterns

namespace {

template <typename Records>
AccessPattern normalize_records(const Records& records) {
  AccessPattern p;
  p.entries.reserve(records.size());
  std::vector<std::uint64_t> seen;  // raw id of normalized thread i+1
  for (const auto& r : records) {
    auto it = std::find(seen.begin(), seen.end(), r.thread);
    std::uint32_t norm;
    if (it == seen.end()) {
      seen.push_back(r.thread);
      norm = static_cast<std::uint32_t>(seen.size());
    } else {
      norm = static_cast<std::uint32_t>(it - seen.begin()) + 1;
    }
    p.entries.push_back({r.index, norm, r.mode});
  }
  return p;
}

}  // namespace

AccessPattern normalize_threads(const ArrayTrace& trace) { return normalize_records(trace.records); }

AccessPattern normalize_threads(const GroupedArrayBlock& block) {
  return normalize_records(block.records);
}

AccessPattern normalize_threads(const AccessPattern& pattern) {
  return normalize_records(pattern.entries);
}

Digest pattern_digest(const AccessPattern& pattern) {
  std::vector<std::uint8_t> bytes;
  bytes.reserve(pattern.entries.size() * 13);
  for (const auto& e : pattern.entries) {
    auto idx = static_cast<std::uint64_t>(e.index);
    for (int i = 0; i < 8; ++i) bytes.push_back(static_cast<std::uint8_t>(idx >> (8 * i)));
    bytes.push_back(static_cast<std::uint8_t>(e.mode));
    for (int i = 0; i < 4; ++i) bytes.push_back(static_cast<std::uint8_t>(e.thread >> (8 * i)));
  }
  return Digest::of(bytes);
}

void PatternTable::add(const ArrayKey& key, const AccessPattern& pattern) {
  AccessPattern copy = pattern;
  add(key, std::move(copy), pattern_digest(pattern));
}

void PatternTable::add(const ArrayKey& key, AccessPattern&& pattern, const Digest& digest) {
  ++n_arrays_;
  auto& bucket = buckets_[digest];
  for (auto& g : bucket) {
    if (g.pattern == pattern) {
      g.members.push_back(key);
      return;
    }
  }
  bucket.push_back(PatternGroup{digest, std::move(pattern), {key}});
  ++n_groups_;
}

void PatternTable::merge(PatternTable&& other) {
  for (auto& [digest, other_bucket] : other.buckets_) {
    auto& bucket = buckets_[digest];
    for (auto& og : other_bucket) {
      auto it = std::find_if(bucket.begin(), bucket.end(),
                             [&](const PatternGroup& g) { return g.pattern == og.pattern; });
      if (it == bucket.end()) {
        bucket.push_back(std::move(og));
        ++n_groups_;
      } else {
        it->members.insert(it->members.end(), std::make_move_iterator(og.members.begin()),
                           std::make_move_iterator(og.members.end()));
      }
    }
  }
  n_arrays_ += other.n_arrays_;
  other.buckets_.clear();
  other.n_groups_ = 0;
  other.n_arrays_ = 0;
}

namespace {

void append_bucket_sorted(std::vector<PatternGroup>& out, std::vector<PatternGroup> bucket) {
  std::sort(bucket.begin(), bucket.end(),
            [](const PatternGroup& a, const PatternGroup& b) { return a.pattern < b.pattern; });
  for (auto& g : bucket) out.push_back(std::move(g));
}

}  // namespace

std::vector<PatternGroup> PatternTable::groups() const& {
  std::vector<PatternGroup> out;
  out.reserve(n_groups_);
  for (const auto& [digest, bucket] : buckets_) append_bucket_sorted(out, bucket);
  return out;
}

std::vector<PatternGroup> PatternTable::take_groups() && {
  std::vector<PatternGroup> out;
  out.reserve(n_groups_);
  for (auto& [digest, bucket] : buckets_) append_bucket_sorted(out, std::move(bucket));
  buckets_.clear();
  n_groups_ = 0;
  n_arrays_ = 0;
  return out;
}

std::vector<PatternGroup> dedup_patterns(
    const std::vector<std::pair<ArrayKey, AccessPattern>>& patterns) {
  PatternTable table;
  for (const auto& [key, pattern] : patterns) table.add(key, pattern);
  return std::move(table).take_groups();
}

// ------------------------------------------------------------ length changes

std::string_view length_direction_name(LengthDirection d) noexcept {
  switch (d) {
    case LengthDirection::GrowOnly:
      return "grow_only";
    case LengthDirection::ShrinkOnly:
      return "shrink_only";
    case LengthDirection::Mixed:
      break;
  }
  return "mixed";
}

std::optional<LengthChangeReport> detect_length_changes(const ArrayTrace& trace) {
  if (trace.lengths_seen.size() < 2) return std::nullopt;
  LengthChangeReport r;
  r.key = trace.key;
  r.n_lengths = static_cast<std::uint32_t>(trace.lengths_seen.size());
  bool grew = false;
  bool shrank = false;
  for (std::size_t i = 1; i < trace.records.size(); ++i) {
    std::uint32_t prev = trace.records[i - 1].length;
    std::uint32_t cur = trace.records[i].length;
    if (cur == prev) continue;
    ++r.n_transitions;
    (cur > prev ? grew : shrank) = true;
  }
  r.direction = grew && shrank ? LengthDirection::Mixed
                : grew         ? LengthDirection::GrowOnly
                               : LengthDirection::ShrinkOnly;
  return r;
}

}  // namespace arraytrace
