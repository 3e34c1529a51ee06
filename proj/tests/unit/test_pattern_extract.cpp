#include <doctest.h>

#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <map>
#include <random>
#include <sstream>

#include "arraytrace/error.hpp"
#include "arraytrace/pattern_extract.hpp"
#include "oracles/oracles.hpp"

using namespace arraytrace;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name) {
  auto d = fs::temp_directory_path() / ("arraytrace-test-" + name + "-" + std::to_string(::getpid()));
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

std::vector<RawTraceLine> random_stream(std::mt19937_64& rng, std::size_t n, std::size_t n_arrays) {
  const char* types[] = {"[I", "[B", "[Ljava.lang.Object;", "[[I"};
  std::vector<ArrayKey> keys;
  for (std::size_t i = 0; i < n_arrays; ++i)
    keys.push_back({TypeDescriptor::parse(types[rng() % 4]), static_cast<std::uint32_t>(rng() % 5000)});
  std::vector<RawTraceLine> out;
  for (std::size_t i = 0; i < n; ++i) {
    RawTraceLine l;
    l.key = keys[rng() % keys.size()];
    l.rec = {rng() % 2 ? Mode::Read : Mode::Write, static_cast<std::int64_t>(rng() % 64), 64,
             100 + rng() % 3, static_cast<std::int32_t>(rng() % 50), static_cast<std::uint32_t>(rng() % 7)};
    out.push_back(l);
  }
  return out;
}

std::vector<ArrayTrace> group_all(const std::vector<RawTraceLine>& lines, GroupOptions opts,
                                  std::size_t* runs = nullptr, std::size_t* passes = nullptr) {
  ArrayGrouper g(opts);
  for (const auto& l : lines) g.add(l);
  std::vector<ArrayTrace> out;
  g.finish([&](ArrayTrace&& t) { out.push_back(std::move(t)); });
  if (runs) *runs = g.runs_spilled();
  if (passes) *passes = g.merge_passes();
  return out;
}

void check_against_map(const std::vector<RawTraceLine>& lines, const std::vector<ArrayTrace>& got) {
  std::map<ArrayKey, std::vector<AccessRecord>> expected;
  for (const auto& l : lines) expected[l.key].push_back(l.rec);
  REQUIRE(got.size() == expected.size());
  std::size_t i = 0;
  for (const auto& [key, recs] : expected) {
    CHECK(got[i].key == key);
    CHECK(got[i].records == recs);
    ++i;
  }
}

}  // namespace

TEST_CASE("grouping in memory matches a map oracle") {
  std::mt19937_64 rng(1);
  auto lines = random_stream(rng, 20000, 300);
  std::size_t runs = 1;
  auto got = group_all(lines, {}, &runs);
  CHECK(runs == 0);
  check_against_map(lines, got);
}

TEST_CASE("grouping with spills and multi-pass merges matches a map oracle") {
  auto dir = scratch_dir("spill");
  std::mt19937_64 rng(2);
  auto lines = random_stream(rng, 120000, 2000);
  GroupOptions opts;
  opts.spill_dir = dir;
  opts.memory_budget = kMinGroupBudget;
  opts.merge_fan_in = 2;
  std::size_t runs = 0, passes = 0;
  auto got = group_all(lines, opts, &runs, &passes);
  CHECK(runs >= 4);
  CHECK(passes >= 2);
  check_against_map(lines, got);
  // Spill files are removed once grouping is done.
  CHECK(fs::is_empty(dir));
  fs::remove_all(dir);
}

TEST_CASE("spill directory from the environment") {
  auto dir = scratch_dir("env");
  ::setenv("ARRAYTRACE_TMP", dir.c_str(), 1);
  CHECK(default_spill_dir() == dir);
  ::unsetenv("ARRAYTRACE_TMP");
  CHECK(default_spill_dir() == fs::temp_directory_path());
  fs::remove_all(dir);
}

TEST_CASE("budget limits") {
  GroupOptions opts;
  opts.memory_budget = kMinGroupBudget - 1;
  CHECK_THROWS_AS(ArrayGrouper{opts}, ResourceError);

  // One array larger than the budget cannot be materialized.
  auto dir = scratch_dir("huge");
  opts.memory_budget = kMinGroupBudget;
  opts.spill_dir = dir;
  ArrayGrouper g(opts);
  RawTraceLine l;
  l.key = ArrayKey::parse_id("[I@1");
  l.rec.length = 10;
  for (int i = 0; i < 100000; ++i) g.add(l);
  CHECK_THROWS_AS(g.finish([](ArrayTrace&&) {}), ResourceError);
  fs::remove_all(dir);
}

TEST_CASE("sample trace groups into four arrays") {
  std::istringstream in(
      "[I@232204a1 w 0 4 1 8 1AOC9142\n[I@232204a1 w 1 4 1 8 1AOC9142\n"
      "[I@5cad8086 r 0 4 1 13 1AOC9142\n[Ljava.lang.Integer;@6e0be858 w 0 4 1 18 1AOC9142\n"
      "[I@60e53b93 r 0 4 1 24 1AOC9142\n[I@232204a1 w 2 4 1 8 1AOC9142\n");
  auto src = stream_lines(in);
  RawTraceReader reader(*src);
  std::vector<ArrayTrace> out;
  group_by_array(reader, {}, [&](ArrayTrace&& t) { out.push_back(std::move(t)); });
  REQUIRE(out.size() == 4);
  CHECK(out[0].key.id() == "[I@232204a1");
  CHECK(out[0].records.size() == 3);
  CHECK(out[0].records[2].index == 2);
  CHECK(out[1].key.id() == "[I@5cad8086");
  CHECK(out[2].key.id() == "[I@60e53b93");
  CHECK(out[3].key.id() == "[Ljava.lang.Integer;@6e0be858");
  CHECK(reader.summary().normalized_tokens == 6);
}

TEST_CASE("array trace facts") {
  std::vector<AccessRecord> recs{{Mode::Read, 0, 4, 9, 1, 5},
                                 {Mode::Write, 1, 8, 3, 1, 2},
                                 {Mode::Read, 2, 4, 9, 2, 5}};
  auto t = ArrayTrace::from_records(ArrayKey::parse_id("[I@1"), recs);
  CHECK(t.distinct_classes == std::vector<std::uint32_t>{2, 5});
  CHECK(t.distinct_threads == std::vector<std::uint64_t>{3, 9});
  CHECK(t.lengths_seen == std::vector<std::uint32_t>{4, 8});
  CHECK(t.max_length() == 8);
  auto b = t.to_block();
  CHECK(b.header_length == 4);
  auto back = ArrayTrace::from_block(b);
  CHECK(back.records.size() == 3);
  CHECK(back.records[1].length == 4);
}

TEST_CASE("thread normalization") {
  std::vector<AccessRecord> recs{{Mode::Read, 0, 4, 77, 1, 0},
                                 {Mode::Read, 1, 4, 12, 1, 0},
                                 {Mode::Write, 2, 4, 77, 1, 0},
                                 {Mode::Read, 3, 4, 5, 1, 0}};
  auto p = normalize_threads(ArrayTrace::from_records(ArrayKey::parse_id("[I@1"), recs));
  REQUIRE(p.size() == 4);
  CHECK(p.entries[0].thread == 1);
  CHECK(p.entries[1].thread == 2);
  CHECK(p.entries[2].thread == 1);
  CHECK(p.entries[3].thread == 3);
  CHECK(p.entries[2].mode == Mode::Write);
  CHECK(p.is_normalized());

  std::mt19937_64 rng(3);
  for (int i = 0; i < 200; ++i) {
    AccessPattern q;
    for (int k = 0; k < 12; ++k)
      q.entries.push_back({static_cast<std::int64_t>(rng() % 5), static_cast<std::uint32_t>(1 + rng() % 9),
                           Mode::Read});
    auto n = normalize_threads(q);
    CHECK(n.is_normalized());
    CHECK(normalize_threads(n) == n);
    CHECK(n.indices() == q.indices());
  }
}

TEST_CASE("dedup matches brute-force equality") {
  std::mt19937_64 rng(4);
  std::vector<std::pair<ArrayKey, AccessPattern>> items;
  std::vector<AccessPattern> patterns;
  for (std::uint32_t i = 0; i < 1500; ++i) {
    AccessPattern p;
    std::size_t n = 1 + rng() % 3;
    for (std::size_t k = 0; k < n; ++k)
      p.entries.push_back({static_cast<std::int64_t>(rng() % 3), 1, rng() % 2 ? Mode::Read : Mode::Write});
    items.emplace_back(ArrayKey{TypeDescriptor::parse("[I"), i}, p);
    patterns.push_back(p);
  }
  auto groups = dedup_patterns(items);
  auto classes = oracle::equal_classes(patterns);
  REQUIRE(groups.size() == classes.size());
  std::map<std::uint32_t, std::size_t> group_of;
  for (std::size_t g = 0; g < groups.size(); ++g) {
    CHECK(pattern_digest(groups[g].pattern) == groups[g].digest);
    for (const auto& m : groups[g].members) group_of[m.hash_token] = g;
  }
  for (const auto& c : classes) {
    std::size_t g = group_of.at(static_cast<std::uint32_t>(c.front()));
    CHECK(groups[g].members.size() == c.size());
    for (auto i : c) CHECK(group_of.at(static_cast<std::uint32_t>(i)) == g);
  }
  for (std::size_t g = 1; g < groups.size(); ++g) CHECK(groups[g - 1].digest <= groups[g].digest);
}

TEST_CASE("digest separates modes, threads and indices") {
  AccessPattern a{{{0, 1, Mode::Read}}};
  AccessPattern b{{{0, 1, Mode::Write}}};
  AccessPattern c{{{0, 2, Mode::Read}}};
  AccessPattern d{{{1, 1, Mode::Read}}};
  AccessPattern e{{{0, 1, Mode::Read}, {0, 1, Mode::Read}}};
  std::set<Digest> ds{pattern_digest(a), pattern_digest(b), pattern_digest(c), pattern_digest(d),
                      pattern_digest(e)};
  CHECK(ds.size() == 5);
  CHECK(pattern_digest(a) == pattern_digest(AccessPattern{{{0, 1, Mode::Read}}}));
  CHECK(pattern_digest(a).hex().size() == 32);
}

TEST_CASE("pattern table merge equals sequential adds") {
  std::mt19937_64 rng(8);
  std::vector<std::pair<ArrayKey, AccessPattern>> items;
  for (std::uint32_t i = 0; i < 400; ++i) {
    AccessPattern p;
    for (int k = 0; k < 2; ++k) p.entries.push_back({static_cast<std::int64_t>(rng() % 3), 1, Mode::Read});
    items.emplace_back(ArrayKey{TypeDescriptor::parse("[I"), i}, p);
  }
  PatternTable whole, left, right;
  for (std::size_t i = 0; i < items.size(); ++i) {
    whole.add(items[i].first, items[i].second);
    (i < 150 ? left : right).add(items[i].first, items[i].second);
  }
  left.merge(std::move(right));
  CHECK(left.group_count() == whole.group_count());
  CHECK(left.array_count() == 400);
  auto a = left.groups();
  auto b = whole.groups();
  REQUIRE(a.size() == b.size());
  for (std::size_t g = 0; g < a.size(); ++g) {
    CHECK(a[g].pattern == b[g].pattern);
    CHECK(a[g].members == b[g].members);
  }
}

TEST_CASE("length changes") {
  auto key = ArrayKey::parse_id("[I@1");
  auto make = [&](std::vector<std::uint32_t> lens) {
    std::vector<AccessRecord> recs;
    for (auto l : lens) recs.push_back({Mode::Read, 0, l, 1, 1, 0});
    return ArrayTrace::from_records(key, recs);
  };
  CHECK_FALSE(detect_length_changes(make({4, 4, 4})));
  auto grow = detect_length_changes(make({4, 4, 8, 16}));
  REQUIRE(grow);
  CHECK(grow->n_lengths == 3);
  CHECK(grow->n_transitions == 2);
  CHECK(grow->direction == LengthDirection::GrowOnly);
  auto shrink = detect_length_changes(make({8, 4}));
  REQUIRE(shrink);
  CHECK(shrink->direction == LengthDirection::ShrinkOnly);
  auto mixed = detect_length_changes(make({4, 8, 4}));
  REQUIRE(mixed);
  CHECK(mixed->direction == LengthDirection::Mixed);
  CHECK(mixed->n_lengths == 2);
  CHECK(mixed->n_transitions == 2);
  CHECK(length_direction_name(LengthDirection::Mixed) == "mixed");
}
