#pragma once

// Synthetic trace generator with ground truth.
//
// A corpus spec is JSON:
//
//   {
//     "seed": 42,
//     "templates": [
//       {
//         "type": "[I",            array type descriptor
//         "length": 16,            array length (default: max index + 1)
//         "count": 200,            arrays drawn from this template
//         "class": "F4C3E8A7",     class hash (default: derived from the seed)
//         "slices": [ <shape spec>, ... ]
//       }
//     ]
//   }
//
// A shape spec plants one slice (or `repeat` identical consecutive slices):
//
//   shape    C | SLi | Li<k> | SLd | Ld<k> | RSi | RSd | VSi | VSd | Fr | Pk |
//            Sw | PT | LRud | U
//   start    first index                                  (default 0)
//   len      number of accesses                           (required)
//   steps    step cycle for RSi/RSd/VSi/VSd, step for Pk/Sw
//   offsets  index offsets from start cycled by Fr; the literal index list
//            (relative to start) for U
//   up/down  Pk: rising moves; LRud: +1 moves then -1 moves per cycle
//   run_len  Sw: accesses per traversal (>= 2)
//   shift    Sw: how much higher each traversal starts     (>= 1)
//   start2   PT: first index of the second lane
//   modes    r/w string cycled over the accesses          (default "r")
//   threads  normalized thread numbers cycled             (default [1])
//   repeat   consecutive copies of the slice              (default 1)
//   jumps    [[position, index], ...] overrides written by perturb()
//
// The raw trace interleaves arrays; the truth file holds one JSON object per
// array with its planted slices and per-shape access counts.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "arraytrace/sequencer.hpp"
#include "arraytrace/trace_model.hpp"

namespace arraytrace {

struct ShapeSpec {
  ShapeTag shape;
  std::int64_t start = 0;
  std::uint64_t len = 0;
  std::vector<std::int64_t> steps;
  std::vector<std::int64_t> offsets;
  std::uint32_t up = 0;
  std::uint32_t down = 0;
  std::uint32_t run_len = 0;
  std::int64_t shift = 0;
  std::int64_t start2 = 0;
  std::string modes = "r";
  std::vector<std::uint32_t> threads{1};
  std::uint32_t repeat = 1;
  std::vector<std::pair<std::uint64_t, std::int64_t>> jumps;

  bool perturbed() const noexcept { return !jumps.empty(); }
};

struct ArrayTemplate {
  std::string type = "[I";
  std::optional<std::uint32_t> length;
  std::uint64_t count = 1;
  std::optional<std::uint32_t> class_hash;
  std::vector<ShapeSpec> slices;
};

struct CorpusSpec {
  std::uint64_t seed = 0;
  std::vector<ArrayTemplate> templates;

  static CorpusSpec from_json(const nlohmann::json& j);
  static CorpusSpec load(const std::filesystem::path& path);
  nlohmann::ordered_json to_json() const;
};

// One planted slice as generated.
struct PlantedSlice {
  std::size_t start = 0;
  std::size_t len = 0;
  ShapeTag shape;
  bool perturbed = false;
  SliceCode code;  // shape, mode, threads and length as planted
};

struct TemplatePattern {
  AccessPattern pattern;
  std::vector<PlantedSlice> slices;
  std::uint32_t length = 0;
  std::uint32_t class_hash = 0;

  // Expected encoding when nothing was perturbed.
  SequenceEncoding truth_encoding() const;
};

// Generates the entries of one shape spec (all repetitions), applying jumps.
// Throws ValidationError when the spec is unsatisfiable or the generated
// entries fail the shape predicate (or, for perturbed slices, still pass it).
std::vector<AccessEntry> generate_slice(const ShapeSpec& spec, const std::string& where = "slice");

// Builds a template's pattern and planted slices.
TemplatePattern build_template(const ArrayTemplate& t, std::uint64_t template_seed,
                               const std::string& where = "template");

struct GenerateSummary {
  std::uint64_t arrays = 0;
  std::uint64_t accesses = 0;
};

struct GenerateOptions {
  std::size_t interleave_window = 16;  // arrays whose accesses are interleaved
};

// Writes the raw trace to `raw` and one truth record per array to `truth`.
GenerateSummary generate(const CorpusSpec& spec, std::ostream& raw, std::ostream& truth,
                         const GenerateOptions& options = {});
GenerateSummary generate_files(const CorpusSpec& spec, const std::filesystem::path& raw,
                               const std::filesystem::path& truth,
                               const GenerateOptions& options = {});

// Replaces each access with probability `noise` by a jump to a random index
// >= 2. Perturbed slices are redrawn until they no longer satisfy their
// planted shape. Unidentified slices are left alone. Repeats are expanded so
// each copy is perturbed independently.
CorpusSpec perturb(const CorpusSpec& spec, double noise);

std::uint64_t template_seed(std::uint64_t master_seed, std::size_t template_index) noexcept;

}  // namespace arraytrace
