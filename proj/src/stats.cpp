#include "arraytrace/stats.hpp"

#include <algorithm>
#include <fstream>
#include <thread>

#include "arraytrace/error.hpp"

namespace arraytrace {

namespace {

std::string_view primitive_name(char code) noexcept {
  switch (code) {
    case 'Z':
      return "boolean";
    case 'B':
      return "byte";
    case 'C':
      return "char";
    case 'D':
      return "double";
    case 'F':
      return "float";
    case 'I':
      return "int";
    case 'J':
      return "long";
    case 'S':
      return "short";
    default:
      return "?";
  }
}

bool has_prefix(std::string_view name, const std::vector<std::string>& prefixes) {
  return std::any_of(prefixes.begin(), prefixes.end(),
                     [&](const std::string& p) { return name.substr(0, p.size()) == p; });
}

}  // namespace

std::string_view type_category_name(TypeCategoryKind k) noexcept {
  switch (k) {
    case TypeCategoryKind::Primitive:
      return "primitive";
    case TypeCategoryKind::JavaStdlib:
      return "java_stdlib";
    case TypeCategoryKind::ScalaStdlib:
      return "scala_stdlib";
    case TypeCategoryKind::OtherObject:
      return "other_object";
    case TypeCategoryKind::NestedArray:
      break;
  }
  return "nested_array";
}

TypeCategory categorize_type(const TypeDescriptor& desc, const TypePrefixes& prefixes) {
  TypeCategory c;
  c.depth = desc.dims;
  std::string_view name = desc.innermost_name();
  c.innermost = desc.is_primitive_element() ? std::string(primitive_name(desc.element[0]))
                                            : std::string(name);
  if (desc.dims >= 2) {
    c.cat = TypeCategoryKind::NestedArray;
  } else if (desc.is_primitive_element()) {
    c.cat = TypeCategoryKind::Primitive;
  } else if (has_prefix(name, prefixes.java)) {
    c.cat = TypeCategoryKind::JavaStdlib;
  } else if (has_prefix(name, prefixes.scala)) {
    c.cat = TypeCategoryKind::ScalaStdlib;
  } else {
    c.cat = TypeCategoryKind::OtherObject;
  }
  return c;
}

TypeCategory categorize_type(std::string_view descriptor, const TypePrefixes& prefixes) {
  return categorize_type(TypeDescriptor::parse(descriptor, DescriptorSyntax::Lenient), prefixes);
}

SliceMode classify_rw(const ArrayTrace& trace) {
  bool reads = false;
  bool writes = false;
  for (const auto& r : trace.records) (r.mode == Mode::Read ? reads : writes) = true;
  if (!reads && !writes) throw ContractError("classify_rw: empty trace");
  if (reads && writes) return SliceMode::ReadWrite;
  return reads ? SliceMode::ReadOnly : SliceMode::WriteOnly;
}

double IndexCoverage::fraction() const noexcept {
  if (denominator == 0) return 0.0;
  return std::min(1.0, static_cast<double>(accessed) / static_cast<double>(denominator));
}

IndexCoverage index_coverage(const ArrayTrace& trace) {
  IndexCoverage c;
  c.denominator = trace.max_length();
  std::vector<std::int64_t> inside;
  inside.reserve(trace.records.size());
  for (const auto& r : trace.records) {
    if (r.out_of_bounds()) ++c.oob_count;
    if (r.index >= 0 && static_cast<std::uint64_t>(r.index) < c.denominator) inside.push_back(r.index);
  }
  std::sort(inside.begin(), inside.end());
  c.accessed = static_cast<std::uint64_t>(std::unique(inside.begin(), inside.end()) - inside.begin());
  return c;
}

ArrayFacts derive_facts(const ArrayTrace& trace, const TypePrefixes& prefixes) {
  if (trace.records.empty()) throw ContractError("derive_facts: empty trace");
  ArrayFacts f;
  f.category = categorize_type(trace.key.type, prefixes);
  f.element_type = trace.key.type.raw;
  f.length = trace.max_length();
  f.n_accesses = trace.records.size();
  f.rw = classify_rw(trace);
  f.coverage = index_coverage(trace);
  f.n_threads = static_cast<std::uint32_t>(trace.distinct_threads.size());
  f.n_classes = static_cast<std::uint32_t>(trace.distinct_classes.size());
  f.length_change = detect_length_changes(trace);
  for (const auto& r : trace.records) f.callsites.emplace_back(r.class_hash, r.line);
  std::sort(f.callsites.begin(), f.callsites.end());
  f.callsites.erase(std::unique(f.callsites.begin(), f.callsites.end()), f.callsites.end());
  f.classes = trace.distinct_classes;
  f.pattern = normalize_threads(trace);
  f.digest = pattern_digest(f.pattern);
  return f;
}

// ------------------------------------------------------------ class scope

ScopeVerdict scope_of(const ArrayTrace& trace, const ScopeFilter& filter,
                      std::uint64_t* unresolved_lookups) {
  if (filter.classes == nullptr) throw ContractError("scope_of: no class map loaded");
  bool unresolved = false;
  bool outside = false;
  for (const auto& r : trace.records) {
    const std::string* name = filter.classes->lookup(r.class_hash);
    if (name == nullptr) {
      unresolved = true;
      if (unresolved_lookups != nullptr) ++*unresolved_lookups;
    } else if (name->compare(0, filter.prefix.size(), filter.prefix) != 0) {
      outside = true;
    }
  }
  if (outside) return ScopeVerdict::OutOfScope;
  if (!unresolved) return ScopeVerdict::InScope;
  switch (filter.unresolved) {
    case UnresolvedPolicy::Include:
      return ScopeVerdict::InScope;
    case UnresolvedPolicy::Exclude:
      return ScopeVerdict::OutOfScope;
    case UnresolvedPolicy::Separate:
      break;
  }
  return ScopeVerdict::Unresolved;
}

ScopeSplit class_scope_filter(std::vector<ArrayTrace> traces, const ScopeFilter& filter) {
  ScopeSplit out;
  for (auto& t : traces) {
    switch (scope_of(t, filter, &out.unresolved_lookups)) {
      case ScopeVerdict::InScope:
        out.in_scope.push_back(std::move(t));
        break;
      case ScopeVerdict::OutOfScope:
        out.out_of_scope.push_back(std::move(t));
        break;
      case ScopeVerdict::Unresolved:
        out.unresolved.push_back(std::move(t));
        break;
    }
  }
  return out;
}

// ------------------------------------------------------------ buckets

std::size_t PatternBuckets::bucket_of(std::uint64_t n) noexcept {
  if (n <= 4) return n == 0 ? 0 : static_cast<std::size_t>(n - 1);
  if (n <= 100) return 4;
  if (n <= 1000) return 5;
  if (n <= 10000) return 6;
  return 7;
}

double PatternBuckets::mean() const noexcept {
  if (n_patterns == 0) return 0.0;
  return static_cast<double>(n_arrays) / static_cast<double>(n_patterns);
}

PatternBuckets pattern_distribution(std::span<const std::uint64_t> group_sizes) {
  PatternBuckets b;
  for (auto n : group_sizes) {
    ++b.patterns[PatternBuckets::bucket_of(n)];
    ++b.n_patterns;
    b.n_arrays += n;
  }
  return b;
}

PatternBuckets pattern_distribution(std::span<const PatternGroup> groups) {
  std::vector<std::uint64_t> sizes;
  sizes.reserve(groups.size());
  for (const auto& g : groups) sizes.push_back(g.members.size());
  return pattern_distribution(sizes);
}

// ------------------------------------------------------------ report

namespace {

double tenths(unsigned __int128 num, unsigned __int128 den) noexcept {
  if (den == 0) return 0.0;
  auto t = (num * 10 + den / 2) / den;
  return static_cast<double>(static_cast<std::uint64_t>(t)) / 10.0;
}

// num / den with one decimal.
double ratio_1dp(std::uint64_t num, std::uint64_t den) noexcept { return tenths(num, den); }

}  // namespace

double percent_1dp(std::uint64_t num, std::uint64_t den) noexcept {
  return tenths(static_cast<unsigned __int128>(num) * 100, den);
}

void StatsReport::add_pattern(const Digest& digest, const AccessPattern& pattern,
                              std::uint64_t arrays) {
  auto& bucket = patterns_[digest];
  for (auto& pc : bucket) {
    if (pc.pattern == pattern) {
      pc.arrays += arrays;
      return;
    }
  }
  bucket.push_back({pattern, arrays});
  std::sort(bucket.begin(), bucket.end(),
            [](const PatternCount& a, const PatternCount& b) { return a.pattern < b.pattern; });
}

void StatsReport::accumulate(const ArrayFacts& f) {
  ++n_arrays_;
  n_accesses_ += f.n_accesses;
  ++rw_[static_cast<std::size_t>(f.rw)];
  ++length_hist_[f.length];
  if (f.coverage.full()) {
    ++fully_covered_;
  } else {
    std::size_t b = f.coverage.denominator == 0
                        ? 0
                        : static_cast<std::size_t>(f.coverage.accessed * kCoverageBuckets /
                                                   f.coverage.denominator);
    ++coverage_buckets_[std::min(b, kCoverageBuckets - 1)];
  }
  if (f.coverage.oob_count > 0) ++oob_arrays_;
  oob_accesses_ += f.coverage.oob_count;

  auto& cat = categories_[static_cast<std::size_t>(f.category.cat)];
  if (cat.arrays == 0 || f.length < cat.min_length) cat.min_length = f.length;
  cat.max_length = std::max(cat.max_length, f.length);
  cat.length_sum += f.length;
  ++cat.arrays;
  if (f.category.cat == TypeCategoryKind::NestedArray) ++nesting_depths_[f.category.depth];
  ++element_types_[f.element_type];

  ++threads_hist_[f.n_threads];
  ++classes_hist_[f.n_classes];
  if (f.length_change) {
    ++length_changes_.arrays;
    if (f.length_change->n_transitions == 1) ++length_changes_.single_change;
    if (f.length_change->direction == LengthDirection::Mixed)
      ++length_changes_.mixed;
    else
      ++length_changes_.one_direction;
  }
  callsites_.insert(f.callsites.begin(), f.callsites.end());
  classes_.insert(f.classes.begin(), f.classes.end());
  add_pattern(f.digest, f.pattern, 1);
}

void StatsReport::accumulate(const ArrayTrace& trace, const TypePrefixes& prefixes) {
  accumulate(derive_facts(trace, prefixes));
}

void StatsReport::merge(const StatsReport& o) {
  n_arrays_ += o.n_arrays_;
  n_accesses_ += o.n_accesses_;
  for (std::size_t i = 0; i < rw_.size(); ++i) rw_[i] += o.rw_[i];
  for (const auto& [k, v] : o.length_hist_) length_hist_[k] += v;
  for (std::size_t i = 0; i < kCoverageBuckets; ++i) coverage_buckets_[i] += o.coverage_buckets_[i];
  fully_covered_ += o.fully_covered_;
  oob_arrays_ += o.oob_arrays_;
  oob_accesses_ += o.oob_accesses_;
  for (std::size_t i = 0; i < categories_.size(); ++i) {
    auto& a = categories_[i];
    const auto& b = o.categories_[i];
    if (b.arrays == 0) continue;
    a.min_length = a.arrays == 0 ? b.min_length : std::min(a.min_length, b.min_length);
    a.max_length = std::max(a.max_length, b.max_length);
    a.length_sum += b.length_sum;
    a.arrays += b.arrays;
  }
  for (const auto& [k, v] : o.nesting_depths_) nesting_depths_[k] += v;
  for (const auto& [k, v] : o.element_types_) element_types_[k] += v;
  for (const auto& [k, v] : o.threads_hist_) threads_hist_[k] += v;
  for (const auto& [k, v] : o.classes_hist_) classes_hist_[k] += v;
  length_changes_.arrays += o.length_changes_.arrays;
  length_changes_.single_change += o.length_changes_.single_change;
  length_changes_.one_direction += o.length_changes_.one_direction;
  length_changes_.mixed += o.length_changes_.mixed;
  callsites_.insert(o.callsites_.begin(), o.callsites_.end());
  classes_.insert(o.classes_.begin(), o.classes_.end());
  for (const auto& [digest, bucket] : o.patterns_)
    for (const auto& pc : bucket) add_pattern(digest, pc.pattern, pc.arrays);
}

std::uint64_t StatsReport::n_patterns() const noexcept {
  std::uint64_t n = 0;
  for (const auto& [d, bucket] : patterns_) n += bucket.size();
  return n;
}

std::vector<std::uint64_t> StatsReport::pattern_group_sizes() const {
  std::vector<std::uint64_t> out;
  for (const auto& [d, bucket] : patterns_)
    for (const auto& pc : bucket) out.push_back(pc.arrays);
  return out;
}

StatsReport::SequencingSummary StatsReport::sequencing(const SequencerOptions& options,
                                                       std::size_t workers) const {
  std::vector<const PatternCount*> all;
  for (const auto& [d, bucket] : patterns_)
    for (const auto& pc : bucket) all.push_back(&pc);
  workers = std::max<std::size_t>(1, std::min(workers, all.size()));

  std::vector<SequencingSummary> parts(workers);
  auto run = [&](std::size_t w) {
    std::size_t begin = all.size() * w / workers;
    std::size_t end = all.size() * (w + 1) / workers;
    auto& part = parts[w];
    for (std::size_t i = begin; i < end; ++i) {
      SequenceEncoding enc = sequence(all[i]->pattern, options);
      switch (enc.coverage) {
        case Coverage::Full:
          ++part.full;
          break;
        case Coverage::Partial:
          ++part.partial;
          break;
        case Coverage::None:
          ++part.none;
          break;
      }
      part.shares.add(enc, all[i]->arrays);
    }
  };
  if (workers == 1) {
    run(0);
  } else {
    std::vector<std::jthread> threads;
    for (std::size_t w = 0; w < workers; ++w) threads.emplace_back(run, w);
  }
  SequencingSummary total;
  for (const auto& p : parts) {
    total.full += p.full;
    total.partial += p.partial;
    total.none += p.none;
    total.shares.merge(p.shares);
  }
  return total;
}

namespace {

nlohmann::ordered_json count_share(std::uint64_t n, std::uint64_t total) {
  nlohmann::ordered_json j;
  j["count"] = n;
  j["pct"] = percent_1dp(n, total);
  return j;
}

template <typename Map>
nlohmann::ordered_json histogram_json(const Map& m) {
  auto arr = nlohmann::ordered_json::array();
  for (const auto& [k, v] : m) arr.push_back({k, v});
  return arr;
}

std::string coverage_label(std::size_t bucket) {
  return std::to_string(bucket * 10) + "-" + std::to_string(bucket * 10 + 10);
}

nlohmann::ordered_json sequencing_json(const StatsReport::SequencingSummary& s, ShapeRound round) {
  nlohmann::ordered_json j;
  std::uint64_t n = s.full + s.partial + s.none;
  j["patterns"] = {{"full", count_share(s.full, n)},
                   {"partial", count_share(s.partial, n)},
                   {"none", count_share(s.none, n)}};
  nlohmann::ordered_json shapes;
  for (ShapeKind k : shape_precedence(round))
    shapes[std::string(shape_kind_name(k))] =
        count_share(s.shares.accesses[static_cast<std::size_t>(k)], s.shares.total);
  shapes["Unidentified"] = count_share(
      s.shares.accesses[static_cast<std::size_t>(ShapeKind::Unidentified)], s.shares.total);
  j["accesses"] = {{"total", s.shares.total},
                   {"identified", count_share(s.shares.identified(), s.shares.total)},
                   {"shapes", shapes}};
  return j;
}

}  // namespace

nlohmann::ordered_json StatsReport::to_json(const StatsOptions& options,
                                            const std::string& corpus) const {
  using json = nlohmann::ordered_json;
  json j;
  j["corpus"] = corpus;
  j["totals"] = {{"n_accesses", n_accesses_},
                 {"n_arrays", n_arrays_},
                 {"n_patterns", n_patterns()},
                 {"n_callsites", callsites_.size()},
                 {"n_classes_touched", classes_.size()}};

  j["lengths"] = {{"histogram", histogram_json(length_hist_)}};

  j["read_write"] = {{"read_only", count_share(rw_[0], n_arrays_)},
                     {"write_only", count_share(rw_[1], n_arrays_)},
                     {"read_write", count_share(rw_[2], n_arrays_)}};

  json buckets = json::array();
  for (std::size_t b = 0; b < kCoverageBuckets; ++b)
    buckets.push_back({{"range_pct", coverage_label(b)},
                       {"arrays", coverage_buckets_[b]},
                       {"pct", percent_1dp(coverage_buckets_[b], n_arrays_)}});
  j["coverage"] = {{"below_full", buckets},
                   {"full", count_share(fully_covered_, n_arrays_)},
                   {"out_of_bounds_arrays", count_share(oob_arrays_, n_arrays_)},
                   {"out_of_bounds_accesses", oob_accesses_}};

  json types = json::array();
  for (std::size_t i = 0; i < kTypeCategoryCount; ++i) {
    const auto& c = categories_[i];
    types.push_back({{"category", type_category_name(static_cast<TypeCategoryKind>(i))},
                     {"arrays", c.arrays},
                     {"pct", percent_1dp(c.arrays, n_arrays_)},
                     {"avg_len", ratio_1dp(c.length_sum, c.arrays)},
                     {"max_len", c.max_length},
                     {"min_len", c.min_length}});
  }
  j["types"] = {{"categories", types},
                {"distinct_element_types", element_types_.size()},
                {"nesting_depths", histogram_json(nesting_depths_)}};

  std::uint64_t multi = 0;
  for (const auto& [k, v] : threads_hist_)
    if (k > 1) multi += v;
  j["threads"] = {{"histogram", histogram_json(threads_hist_)},
                  {"multi_thread_arrays", count_share(multi, n_arrays_)}};
  j["classes"] = {{"histogram", histogram_json(classes_hist_)}};
  j["length_changes"] = {
      {"arrays", count_share(length_changes_.arrays, n_arrays_)},
      {"single_change", count_share(length_changes_.single_change, length_changes_.arrays)},
      {"one_direction", count_share(length_changes_.one_direction, length_changes_.arrays)},
      {"mixed", count_share(length_changes_.mixed, length_changes_.arrays)}};

  auto sizes = pattern_group_sizes();
  PatternBuckets pb = pattern_distribution(sizes);
  json pbj = json::array();
  for (std::size_t b = 0; b < PatternBuckets::kCount; ++b)
    pbj.push_back({{"arrays_sharing", PatternBuckets::kLabels[b]},
                   {"patterns", pb.patterns[b]},
                   {"pct", percent_1dp(pb.patterns[b], pb.n_patterns)}});
  j["patterns"] = {{"buckets", pbj},
                   {"arrays_per_pattern", ratio_1dp(pb.n_arrays, pb.n_patterns)}};

  json seq;
  for (ShapeRound round : {ShapeRound::Round1, ShapeRound::Round2}) {
    SequencerOptions so = options.sequencer;
    so.round = round;
    seq[round == ShapeRound::Round1 ? "round1" : "round2"] =
        sequencing_json(sequencing(so, options.workers), round);
  }
  j["sequencing"] = seq;
  return j;
}

// ------------------------------------------------------------ files

namespace {

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  return out;
}

std::string fmt_pct(std::uint64_t num, std::uint64_t den) {
  nlohmann::json j = percent_1dp(num, den);
  return j.dump();
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string q = "\"";
  for (char c : s) {
    if (c == '"') q += '"';
    q += c;
  }
  return q + '"';
}

}  // namespace

void write_report_files(const StatsReport& report, const StatsOptions& options,
                        const std::filesystem::path& dir, const std::string& corpus,
                        const nlohmann::ordered_json& extra) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create output directory '" + dir.string() + "': " + ec.message());

  auto j = report.to_json(options, corpus);
  if (!extra.is_null())
    for (auto it = extra.begin(); it != extra.end(); ++it) j[it.key()] = it.value();
  {
    auto out = open_out(dir / "report.json");
    out << j.dump(2) << '\n';
  }
  const std::uint64_t n = report.n_arrays();
  {
    auto out = open_out(dir / "length_cdf.csv");
    out << "length,arrays,cumulative_arrays,cumulative_pct\n";
    std::uint64_t cum = 0;
    for (const auto& [len, count] : report.length_hist()) {
      cum += count;
      out << len << ',' << count << ',' << cum << ',' << fmt_pct(cum, n) << '\n';
    }
  }
  {
    auto out = open_out(dir / "rw_by_corpus.csv");
    out << "corpus,read_only,write_only,read_write,read_only_pct,write_only_pct,read_write_pct\n";
    out << csv_field(corpus) << ',' << report.read_only() << ',' << report.write_only() << ','
        << report.read_write() << ',' << fmt_pct(report.read_only(), n) << ','
        << fmt_pct(report.write_only(), n) << ',' << fmt_pct(report.read_write(), n) << '\n';
  }
  {
    auto out = open_out(dir / "coverage_hist.csv");
    out << "bucket,arrays,pct\n";
    for (std::size_t b = 0; b < StatsReport::kCoverageBuckets; ++b)
      out << coverage_label(b) << ',' << report.coverage_buckets()[b] << ','
          << fmt_pct(report.coverage_buckets()[b], n) << '\n';
    out << "100," << report.fully_covered() << ',' << fmt_pct(report.fully_covered(), n) << '\n';
    out << "out_of_bounds," << report.oob_arrays() << ',' << fmt_pct(report.oob_arrays(), n) << '\n';
  }
  {
    auto out = open_out(dir / "pattern_buckets.csv");
    out << "arrays_sharing,patterns,pct\n";
    auto sizes = report.pattern_group_sizes();
    PatternBuckets pb = pattern_distribution(sizes);
    for (std::size_t b = 0; b < PatternBuckets::kCount; ++b)
      out << PatternBuckets::kLabels[b] << ',' << pb.patterns[b] << ','
          << fmt_pct(pb.patterns[b], pb.n_patterns) << '\n';
  }
  {
    auto out = open_out(dir / "shape_shares.csv");
    out << "round,shape,accesses,pct\n";
    for (const char* key : {"round1", "round2"}) {
      const auto& shapes = j["sequencing"][key]["accesses"]["shapes"];
      for (auto it = shapes.begin(); it != shapes.end(); ++it)
        out << (key[5] == '1' ? 1 : 2) << ',' << it.key() << ',' << it.value()["count"].get<std::uint64_t>()
            << ',' << it.value()["pct"].dump() << '\n';
    }
  }
}

}  // namespace arraytrace
