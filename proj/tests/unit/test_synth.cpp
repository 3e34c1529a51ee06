#include <doctest.h>

#include <map>
#include <set>
#include <sstream>

#include "arraytrace/error.hpp"
#include "arraytrace/pattern_extract.hpp"
#include "arraytrace/synth.hpp"

using namespace arraytrace;
using json = nlohmann::json;

namespace {

ShapeSpec shape(const json& j) {
  auto spec = CorpusSpec::from_json({{"templates", {{{"slices", {j}}}}}});
  return spec.templates.at(0).slices.at(0);
}

std::vector<std::int64_t> indices(const std::vector<AccessEntry>& es) {
  std::vector<std::int64_t> out;
  for (const auto& e : es) out.push_back(e.index);
  return out;
}

CorpusSpec load_corpus() { return CorpusSpec::load(std::string(ARRAYTRACE_TEST_DATA) + "/shapes_corpus.json"); }

}  // namespace

TEST_CASE("shape generators") {
  using V = std::vector<std::int64_t>;
  CHECK(indices(generate_slice(shape({{"shape", "C"}, {"start", 5}, {"len", 3}}))) == V{5, 5, 5});
  CHECK(indices(generate_slice(shape({{"shape", "Li3"}, {"start", 1}, {"len", 4}}))) == V{1, 4, 7, 10});
  CHECK(indices(generate_slice(shape({{"shape", "SLd"}, {"start", 3}, {"len", 4}}))) == V{3, 2, 1, 0});
  CHECK(indices(generate_slice(shape({{"shape", "RSi"}, {"len", 6}, {"steps", {0, 2}}}))) == V{0, 0, 2, 2, 4, 4});
  CHECK(indices(generate_slice(shape({{"shape", "VSd"}, {"start", 9}, {"len", 4}, {"steps", {1, 3}}}))) ==
        V{9, 8, 5, 4});
  CHECK(indices(generate_slice(shape({{"shape", "Fr"}, {"start", 3}, {"len", 5}, {"offsets", {0, 2}}}))) ==
        V{3, 5, 3, 5, 3});
  CHECK(indices(generate_slice(shape({{"shape", "Pk"}, {"len", 7}, {"up", 3}}))) == V{0, 1, 2, 3, 2, 1, 0});
  CHECK(indices(generate_slice(shape({{"shape", "Sw"}, {"len", 8}, {"run_len", 4}, {"shift", 2}}))) ==
        V{0, 1, 2, 3, 2, 3, 4, 5});
  CHECK(indices(generate_slice(shape({{"shape", "PT"}, {"start", 10}, {"start2", 2}, {"len", 5}}))) ==
        V{10, 2, 11, 3, 12});
  CHECK(indices(generate_slice(shape({{"shape", "LRud"}, {"start", 5}, {"len", 6}, {"up", 2}, {"down", 1}}))) ==
        V{5, 6, 7, 6, 7, 8});
  CHECK(indices(generate_slice(shape({{"shape", "U"}, {"start", 1}, {"offsets", {0, 5, 2, 2, 7, 1}}}))) ==
        V{1, 6, 3, 3, 8, 2});

  auto e = generate_slice(shape({{"shape", "SLi"}, {"len", 4}, {"modes", "rw"}, {"threads", {1, 2, 3}}, {"repeat", 2}}));
  REQUIRE(e.size() == 8);
  CHECK(e[1].mode == Mode::Write);
  CHECK(e[2].thread == 3);
  CHECK(e[4].index == 0);
}

TEST_CASE("invalid shape specs") {
  for (const json& bad : {json{{"shape", "SLi"}, {"len", 0}},
                          json{{"shape", "Q"}, {"len", 3}},
                          json{{"shape", "Sw"}, {"len", 8}, {"run_len", 1}, {"shift", 1}},
                          json{{"shape", "Sw"}, {"len", 8}, {"run_len", 4}, {"shift", 9}},
                          json{{"shape", "SLd"}, {"start", 1}, {"len", 4}},
                          json{{"shape", "RSi"}, {"len", 4}},
                          json{{"shape", "RSi"}, {"len", 4}, {"steps", {1}}},
                          json{{"shape", "U"}, {"offsets", {0, 1, 2}}},
                          json{{"shape", "SLi"}, {"len", 3}, {"modes", "x"}},
                          json{{"shape", "SLi"}, {"len", 3}, {"threads", {0}}},
                          json{{"shape", "C"}, {"start", 3}, {"len", 2}, {"jumps", {{0, 3}}}},
                          json{{"shape", "Pk"}, {"len", 4}, {"up", 3}}}) {
    CHECK_THROWS_AS_MESSAGE(
        {
          auto s = shape(bad);
          generate_slice(s);
        },
        ValidationError, bad.dump());
  }
  CHECK_THROWS_AS(CorpusSpec::from_json(json{{"templates", 3}}), ValidationError);
  CHECK_THROWS_AS(CorpusSpec::load("/nonexistent/spec.json"), IoError);
}

TEST_CASE("planted slices of the acceptance corpus satisfy their shapes") {
  auto spec = load_corpus();
  std::set<ShapeKind> tags;
  for (std::size_t t = 0; t < spec.templates.size(); ++t) {
    auto tp = build_template(spec.templates[t], template_seed(spec.seed, t));
    std::size_t pos = 0;
    for (const auto& s : tp.slices) {
      CHECK(s.start == pos);
      pos += s.len;
      auto sub = std::span<const AccessEntry>(tp.pattern.entries).subspan(s.start, s.len);
      if (s.shape.kind != ShapeKind::Unidentified) CHECK(match_shape(sub, s.shape));
      tags.insert(s.shape.kind);
    }
    CHECK(pos == tp.pattern.size());
    CHECK(tp.pattern.is_normalized());
  }
  CHECK(tags.size() == kShapeKindCount);
}

TEST_CASE("generation is deterministic and consistent with its truth") {
  auto spec = load_corpus();
  for (auto& t : spec.templates) t.count = 7;
  std::ostringstream raw1, truth1, raw2, truth2;
  auto s1 = generate(spec, raw1, truth1);
  generate(spec, raw2, truth2);
  CHECK(raw1.str() == raw2.str());
  CHECK(truth1.str() == truth2.str());
  CHECK(s1.arrays == 7 * spec.templates.size());

  spec.seed += 1;
  std::ostringstream raw3, truth3;
  generate(spec, raw3, truth3);
  CHECK(raw3.str() != raw1.str());

  // Regroup the raw trace and compare against the truth records.
  std::istringstream in(raw1.str());
  auto src = stream_lines(in);
  RawTraceReader reader(*src);
  std::map<std::string, ArrayTrace> arrays;
  group_by_array(reader, {}, [&](ArrayTrace&& t) { arrays.emplace(t.key.id(), std::move(t)); });
  CHECK(reader.summary().malformed == 0);
  CHECK(reader.summary().records == s1.accesses);
  CHECK(arrays.size() == s1.arrays);

  std::istringstream tin(truth1.str());
  std::string line;
  std::size_t n = 0;
  while (std::getline(tin, line)) {
    auto j = json::parse(line);
    auto& trace = arrays.at(j["array"].get<std::string>());
    CHECK(trace.records.size() == j["accesses"].get<std::size_t>());
    auto enc = sequence(normalize_threads(trace));
    if (j.contains("encoding")) CHECK(render(enc) == j["encoding"].get<std::string>());
    ++n;
  }
  CHECK(n == s1.arrays);
}

TEST_CASE("perturbation") {
  auto spec = load_corpus();
  CHECK_THROWS_AS(perturb(spec, 1.5), ValidationError);
  auto zero = perturb(spec, 0.0);
  for (std::size_t t = 0; t < spec.templates.size(); ++t)
    CHECK(build_template(zero.templates[t], template_seed(zero.seed, t)).pattern ==
          build_template(spec.templates[t], template_seed(spec.seed, t)).pattern);

  auto full = perturb(spec, 1.0);
  CHECK(full.to_json() == perturb(spec, 1.0).to_json());
  for (std::size_t t = 0; t < full.templates.size(); ++t) {
    auto tp = build_template(full.templates[t], template_seed(full.seed, t));
    for (const auto& s : tp.slices) {
      auto sub = std::span<const AccessEntry>(tp.pattern.entries).subspan(s.start, s.len);
      if (s.shape.kind == ShapeKind::Unidentified) {
        CHECK_FALSE(s.perturbed);
        continue;
      }
      CHECK(s.perturbed);
      CHECK_FALSE(match_shape(sub, s.shape));
      for (const auto& e : sub) CHECK(e.index >= 2);
    }
  }
  // The spec survives a JSON round trip with its jumps.
  auto back = CorpusSpec::from_json(json::parse(full.to_json().dump()));
  CHECK(back.to_json() == full.to_json());

  auto singleton = CorpusSpec::from_json({{"templates", {{{"slices", {{{"shape", "C"}, {"len", 1}}}}}}}});
  CHECK_THROWS_AS(perturb(singleton, 1.0), ValidationError);
}
