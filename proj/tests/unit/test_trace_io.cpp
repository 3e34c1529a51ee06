#include <doctest.h>

#include <zlib.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "arraytrace/error.hpp"
#include "arraytrace/trace_io.hpp"

using namespace arraytrace;
namespace fs = std::filesystem;

namespace {

std::vector<RawTraceLine> read_all_raw(const std::string& text, ParseSummary* summary = nullptr,
                                       ParseOptions opts = {}) {
  std::istringstream in(text);
  auto src = stream_lines(in);
  RawTraceReader reader(*src, opts);
  std::vector<RawTraceLine> out;
  RawTraceLine l;
  while (reader.next(l)) out.push_back(l);
  if (summary) *summary = reader.summary();
  return out;
}

std::vector<GroupedArrayBlock> read_all_grouped(const std::string& text, ParseSummary* summary = nullptr) {
  std::istringstream in(text);
  auto src = stream_lines(in);
  GroupedReader reader(*src);
  std::vector<GroupedArrayBlock> out;
  GroupedArrayBlock b;
  while (reader.next(b)) out.push_back(b);
  if (summary) *summary = reader.summary();
  return out;
}

fs::path scratch_dir(const std::string& name) {
  auto d = fs::temp_directory_path() / ("arraytrace-test-" + name + "-" + std::to_string(::getpid()));
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

const char* kTypes[] = {"[I", "[B", "[[D", "[Ljava.lang.String;", "[Lscala.Tuple2;"};

}  // namespace

TEST_CASE("raw line parsing") {
  std::string err;
  bool normalized = false;
  auto l = parse_raw_line("[I@232204a1 w 3 4 1 8 1AOC9142", &err, {}, &normalized);
  REQUIRE(l);
  CHECK(normalized);
  CHECK(l->key.id() == "[I@232204a1");
  CHECK(l->rec.mode == Mode::Write);
  CHECK(l->rec.index == 3);
  CHECK(l->rec.length == 4);
  CHECK(l->rec.thread == 1);
  CHECK(l->rec.line == 8);
  CHECK(l->rec.class_hash == 0x1A0C9142u);
  CHECK(format_raw_line(*l) == "[I@232204a1 w 3 4 1 8 1A0C9142");

  ParseOptions exact;
  exact.lenient_class_tokens = false;
  CHECK_FALSE(parse_raw_line("[I@232204a1 w 3 4 1 8 1AOC9142", &err, exact));
  CHECK_FALSE(parse_raw_line("[|@232204a1 w 0 4 1 8 1A0C9142", &err));
  CHECK_FALSE(parse_raw_line("[I@232204a1 x 0 4 1 8 1A0C9142", &err));
  CHECK_FALSE(parse_raw_line("[I@232204a1 r 0 4 1 8", &err));
  CHECK_FALSE(parse_raw_line("[I@232204a1 r 0 4 1 8 1A0C9142 extra", &err));
  CHECK_FALSE(parse_raw_line("[I@232204a1 r zero 4 1 8 1A0C9142", &err));
  CHECK_FALSE(err.empty());
}

TEST_CASE("raw format round-trips") {
  std::mt19937_64 rng(11);
  std::ostringstream out;
  std::vector<RawTraceLine> lines;
  for (int i = 0; i < 2000; ++i) {
    RawTraceLine l;
    l.key.type = TypeDescriptor::parse(kTypes[rng() % 5]);
    l.key.hash_token = static_cast<std::uint32_t>(rng());
    l.rec.mode = rng() % 2 ? Mode::Read : Mode::Write;
    l.rec.length = static_cast<std::uint32_t>(rng() % 100000);
    l.rec.index = static_cast<std::int64_t>(rng() % 100010) - 5;
    l.rec.thread = rng() % 5000;
    l.rec.line = static_cast<std::int32_t>(rng() % 3000) - 1;
    l.rec.class_hash = static_cast<std::uint32_t>(rng());
    lines.push_back(l);
    write_raw(out, l);
  }
  ParseSummary s;
  auto back = read_all_raw(out.str(), &s);
  CHECK(s.malformed == 0);
  CHECK(back == lines);
}

TEST_CASE("raw reader skips malformed lines with diagnostics") {
  ParseSummary s;
  auto recs = read_all_raw(
      "[I@1 r 0 4 1 8 AA\n"
      "\n"
      "garbage\n"
      "[|@2 r 0 4 1 8 AA\n"
      "[I@1 w 1 4 1 8 AA\n",
      &s);
  CHECK(recs.size() == 2);
  CHECK(s.records == 2);
  CHECK(s.malformed == 2);
  REQUIRE(s.diagnostics.size() == 2);
  CHECK(s.diagnostics[0].line_no == 3);
  CHECK(s.diagnostics[1].line_no == 4);
}

TEST_CASE("diagnostics are capped but counted") {
  std::string text;
  for (int i = 0; i < 200; ++i) text += "bad line\n";
  ParseSummary s;
  read_all_raw(text, &s);
  CHECK(s.malformed == 200);
  CHECK(s.diagnostics.size() == ParseSummary::kMaxKeptDiagnostics);
}

TEST_CASE("grouped format") {
  std::string hashmap_node =
      "[Lscala.collection.mutable.HashMap$Node;@7d8995e 16 3\n"
      "r 0 1 86 F4C3E8A7\n"
      "r 0 1 224 F4C3E8A7\n"
      "w 0 1 226 F4C3E8A7\n";
  auto blocks = read_all_grouped(hashmap_node);
  REQUIRE(blocks.size() == 1);
  CHECK(blocks[0].key.hash_token == 0x7d8995eu);
  CHECK(blocks[0].header_length == 16);
  CHECK(blocks[0].n_accesses() == 3);
  CHECK(blocks[0].records[2].mode == Mode::Write);
  CHECK(blocks[0].records[2].line == 226);
  std::ostringstream out;
  write_grouped(out, blocks[0]);
  CHECK(out.str() == hashmap_node);

  GroupedArrayBlock empty;
  empty.key = ArrayKey::parse_id("[I@1");
  CHECK_THROWS_AS(write_grouped(out, empty), ContractError);
}

TEST_CASE("grouped round-trip property") {
  std::mt19937_64 rng(5);
  std::vector<GroupedArrayBlock> blocks;
  std::ostringstream out;
  for (int b = 0; b < 300; ++b) {
    GroupedArrayBlock g;
    g.key.type = TypeDescriptor::parse(kTypes[rng() % 5]);
    g.key.hash_token = static_cast<std::uint32_t>(rng());
    g.header_length = static_cast<std::uint32_t>(rng() % 1000);
    std::size_t n = 1 + rng() % 20;
    for (std::size_t i = 0; i < n; ++i)
      g.records.push_back({rng() % 2 ? Mode::Read : Mode::Write, static_cast<std::int64_t>(rng() % 1000),
                           1 + rng() % 4, static_cast<std::int32_t>(rng() % 500),
                           static_cast<std::uint32_t>(rng())});
    write_grouped(out, g);
    blocks.push_back(std::move(g));
  }
  ParseSummary s;
  CHECK(read_all_grouped(out.str(), &s) == blocks);
  CHECK(s.dropped_blocks == 0);
  CHECK(s.malformed == 0);
}

TEST_CASE("grouped reader drops inconsistent blocks") {
  ParseSummary s;
  auto blocks = read_all_grouped(
      "[I@1 4 3\n"
      "r 0 1 1 AA\n"
      "r 1 1 1 AA\n"
      "[I@2 4 1\n"
      "r 0 1 1 AA\n"
      "[I@3 4 0\n"
      "[I@4 4 2\n"
      "r 0 1 1 AA\n"
      "q 1 1 1 AA\n"
      "[I@5 4 1\n"
      "w 3 2 9 BB\n",
      &s);
  REQUIRE(blocks.size() == 2);
  CHECK(blocks[0].key.hash_token == 2);
  CHECK(blocks[1].key.hash_token == 5);
  CHECK(s.dropped_blocks == 3);
  CHECK_FALSE(s.diagnostics.empty());
}

TEST_CASE("class tokens") {
  bool norm = false;
  CHECK(parse_class_token("F4C3E8A7", false) == 0xF4C3E8A7u);
  CHECK(parse_class_token("f4c3e8a7", false) == 0xF4C3E8A7u);
  CHECK(parse_class_token("1AOC9142", true, &norm) == 0x1A0C9142u);
  CHECK(norm);
  CHECK_FALSE(parse_class_token("1AOC9142", false));
  CHECK_FALSE(parse_class_token("", true));
  CHECK_FALSE(parse_class_token("123456789", true));
  CHECK_FALSE(parse_class_token("G1", true));
}

TEST_CASE("class map") {
  std::istringstream in(
      "F4C3E8A7 scala.collection.mutable.HashMap\n"
      "1A0C9142 Main\n"
      "1A0C9142 Other\n"
      "bad\n");
  auto src = stream_lines(in);
  ParseSummary s;
  ClassMap m = parse_class_map(*src, &s);
  CHECK(m.size() == 2);
  REQUIRE(m.lookup(0xF4C3E8A7u));
  CHECK(*m.lookup(0xF4C3E8A7u) == "scala.collection.mutable.HashMap");
  CHECK(*m.lookup(0x1A0C9142u) == "Main");
  CHECK(m.lookup(0x1u) == nullptr);
  REQUIRE(m.collisions().size() == 1);
  CHECK(m.collisions()[0].other == "Other");
  CHECK(s.malformed == 1);

  std::ostringstream out;
  write_class_map(out, m);
  CHECK(out.str() == "1A0C9142 Main\nF4C3E8A7 scala.collection.mutable.HashMap\n");
}

TEST_CASE("file inputs") {
  auto dir = scratch_dir("io");
  {
    std::ofstream(dir / "b.atrace") << "[I@2 r 0 4 1 8 AA\n";
    std::ofstream(dir / "a.atrace") << "[I@1 r 0 4 1 8 AA\n";
    fs::create_directories(dir / "sub");
    std::ofstream(dir / "sub" / "c.atrace") << "[I@3 r 0 4 1 8 AA\n";
  }
  gzFile gz = gzopen((dir / "d.atrace.gz").c_str(), "wb");
  const char text[] = "[I@4 w 1 4 2 9 BB\n";
  gzwrite(gz, text, sizeof(text) - 1);
  gzclose(gz);

  auto files = collect_inputs({dir});
  REQUIRE(files.size() == 4);
  CHECK(files[0].filename() == "a.atrace");
  CHECK(files[1].filename() == "b.atrace");
  CHECK(files[2].filename() == "d.atrace.gz");
  CHECK(files[3].filename() == "c.atrace");

  auto src = open_lines(dir / "d.atrace.gz");
  RawTraceReader reader(*src);
  RawTraceLine l;
  REQUIRE(reader.next(l));
  CHECK(l.key.hash_token == 4);
  CHECK(l.rec.thread == 2);
  CHECK_FALSE(reader.next(l));

  CHECK_THROWS_AS(open_lines(dir / "missing.atrace"), IoError);
  CHECK_THROWS_AS(open_lines(dir), IoError);
  CHECK_THROWS_AS(collect_inputs({dir / "missing"}), IoError);
  fs::remove_all(dir);
}
