#include <doctest.h>

#include <sys/wait.h>
#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

namespace fs = std::filesystem;

namespace {

const fs::path kData = ARRAYTRACE_TEST_DATA;

struct Scratch {
  fs::path dir;
  explicit Scratch(const std::string& name)
      : dir(fs::temp_directory_path() / ("arraytrace-cli-" + name + "-" + std::to_string(::getpid()))) {
    fs::remove_all(dir);
    fs::create_directories(dir);
  }
  ~Scratch() { fs::remove_all(dir); }
  std::string operator/(const std::string& f) const { return (dir / f).string(); }
};

int run(const std::string& args) {
  std::string cmd = std::string(ARRAYTRACE_CLI) + " " + args + " 2>/dev/null";
  int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

}  // namespace

TEST_CASE("group") {
  Scratch s("group");
  CHECK(run("group " + (kData / "sample.atrace").string() + " -o " + s / "sample.agrp") == 0);
  std::string out = slurp(s / "sample.agrp");
  std::size_t headers = 0;
  std::istringstream lines(out);
  for (std::string l; std::getline(lines, l);) headers += l.find('@') != std::string::npos;
  CHECK(headers == 4);
  CHECK(out.rfind("[I@232204a1 4 4\nw 0 1 8 1A0C9142\n", 0) == 0);

  std::ofstream(s / "empty.atrace").close();
  CHECK(run("group " + s / "empty.atrace" + " -o " + s / "empty.agrp") == 0);
  CHECK(fs::file_size(s / "empty.agrp") == 0);

  CHECK(run("group " + s / "missing.atrace" + " -o " + s / "x.agrp") == 2);
  CHECK(run("group " + (kData / "sample.atrace").string() + " -o " + s / "x.agrp --mem-budget 10K") == 3);
  CHECK(run("group " + (kData / "sample.atrace").string() + " -o " + s / "x.agrp --mem-budget lots") == 1);
  CHECK(run("group " + (kData / "sample.atrace").string() + " -o " + s / "x.agrp --exact-class-tokens --strict") ==
        1);
  CHECK(run("frobnicate") == 1);
  CHECK(run("--help") == 0);
}

TEST_CASE("sequence and stats agree and are deterministic") {
  Scratch s("seq");
  std::string spec = (kData / "shapes_corpus.json").string();
  REQUIRE(run("synth " + spec + " -o " + s / "c.atrace --truth " + s / "c.truth") == 0);
  REQUIRE(run("group " + s / "c.atrace -o " + s / "c.agrp --mem-budget 1M --tmp " + s / "spill") == 0);
  CHECK(fs::is_empty(s.dir / "spill"));
  REQUIRE(run("sequence " + s / "c.agrp -o " + s / "a.jsonl --summary " + s / "a.json --workers 1") == 0);
  REQUIRE(run("sequence " + s / "c.agrp -o " + s / "b.jsonl --summary " + s / "b.json --workers 4") == 0);
  CHECK(slurp(s / "a.jsonl") == slurp(s / "b.jsonl"));
  CHECK(slurp(s / "a.json") == slurp(s / "b.json"));
  REQUIRE(run("stats " + s / "c.agrp -o " + s / "st1 --workers 1") == 0);
  REQUIRE(run("stats " + s / "c.atrace -o " + s / "st2 --workers 3") == 0);
  CHECK(slurp(s / "st1/report.json") == slurp(s / "st2/report.json"));

  auto summary = nlohmann::json::parse(slurp(s / "a.json"));
  auto report = nlohmann::json::parse(slurp(s / "st1/report.json"));
  CHECK(summary["arrays"] == report["totals"]["n_arrays"]);
  CHECK(summary["accesses"] == report["totals"]["n_accesses"]);
  CHECK(summary["patterns"] == report["totals"]["n_patterns"]);

  // Raw input sequences the same as its grouped form.
  REQUIRE(run("sequence " + s / "c.atrace -o " + s / "r.jsonl") == 0);
  CHECK(slurp(s / "r.jsonl") == slurp(s / "a.jsonl"));

  std::istringstream lines(slurp(s / "a.jsonl"));
  std::string first;
  std::getline(lines, first);
  auto rec = nlohmann::json::parse(first);
  for (const char* k : {"pattern_digest", "encoding_text", "coverage", "member_count", "total_accesses"})
    CHECK_MESSAGE(rec.contains(k), k);
}

TEST_CASE("paper-compat length and round flags") {
  Scratch s("flags");
  std::ofstream(s / "three_runs.json") << R"({"seed": 1, "templates": [{"count": 1, "slices": [
      {"shape": "SLi", "len": 14, "modes": "w"}, {"shape": "SLi", "len": 14, "modes": "r"},
      {"shape": "SLi", "len": 14, "modes": "w"}]}]})";
  REQUIRE(run("synth " + s / "three_runs.json -o " + s / "f.atrace --truth " + s / "f.truth") == 0);
  REQUIRE(run("sequence " + s / "f.atrace -o " + s / "f.jsonl --paper-compat-length --round 1") == 0);
  auto rec = nlohmann::json::parse(slurp(s / "f.jsonl"));
  CHECK(rec["encoding_text"] == "0: |SLi w 1 42|SLi r 1 42|SLi w 1 42|");
  CHECK(run("sequence " + s / "f.atrace -o " + s / "f.jsonl --round 3") == 1);
}

TEST_CASE("stats with a class map") {
  Scratch s("scope");
  std::ofstream(s / "classes.cmap") << "1A0C9142 org.example.Main\n";
  std::ofstream(s / "extra.atrace") << "[I@99 r 0 4 7 3 DEADBEEF\n";
  REQUIRE(run("stats " + (kData / "sample.atrace").string() + " " + s / "extra.atrace -o " + s / "out" +
              " --class-map " + s / "classes.cmap --scope-prefix org.example. --unresolved separate") == 0);
  auto j = nlohmann::json::parse(slurp(s / "out/report.json"));
  CHECK(j["totals"]["n_arrays"] == 4);
  CHECK(j["scope"]["unresolved_arrays"] == 1);
  CHECK(j["scope"]["unresolved_report"]["totals"]["n_arrays"] == 1);
  CHECK(j["read_write"]["read_only"]["count"] == 2);
  CHECK(j["read_write"]["write_only"]["count"] == 2);

  REQUIRE(run("stats " + s / "extra.atrace -o " + s / "out2 --class-map " + s / "classes.cmap" +
              " --scope-prefix org.example.") == 0);
  CHECK(nlohmann::json::parse(slurp(s / "out2/report.json"))["totals"]["n_arrays"] == 0);
  CHECK(run("stats " + s / "extra.atrace -o " + s / "out3 --scope-prefix org.") == 1);
}

TEST_CASE("synth errors") {
  Scratch s("synth");
  std::ofstream(s / "bad.json") << R"({"templates": [{"slices": [{"shape": "Sw", "len": 8, "run_len": 1}]}]})";
  CHECK(run("synth " + s / "bad.json -o " + s / "x --truth " + s / "y") == 1);
  std::ofstream(s / "broken.json") << "{";
  CHECK(run("synth " + s / "broken.json -o " + s / "x --truth " + s / "y") == 1);
  CHECK(run("synth " + s / "none.json -o " + s / "x --truth " + s / "y") == 2);
  CHECK(run("synth " + (kData / "shapes_corpus.json").string() + " -o " + s / "x --truth " + s / "y --noise 2") == 1);
}
