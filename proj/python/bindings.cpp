// Python bindings. JSON-valued results cross as text and are decoded in
// arraytrace/__init__.py.

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <fstream>
#include <optional>

#include "arraytrace/error.hpp"
#include "arraytrace/pipeline.hpp"
#include "arraytrace/synth.hpp"

namespace py = pybind11;
using namespace arraytrace;
using Paths = std::vector<std::filesystem::path>;

namespace {

ShapeRound round_of(int r) {
  if (r != 1 && r != 2) throw ValidationError("round must be 1 or 2");
  return static_cast<ShapeRound>(r);
}

AccessPattern make_pattern(const std::vector<std::int64_t>& indices, const std::optional<std::string>& modes,
                           const std::optional<std::vector<std::uint32_t>>& threads) {
  if (modes && modes->size() != indices.size()) throw ValidationError("modes must have one letter per index");
  if (threads && threads->size() != indices.size()) throw ValidationError("threads must have one entry per index");
  AccessPattern p;
  for (std::size_t k = 0; k < indices.size(); ++k) {
    AccessEntry e{indices[k], threads ? (*threads)[k] : 1, Mode::Read};
    if (modes) {
      auto m = parse_mode(std::string_view(*modes).substr(k, 1));
      if (!m) throw ValidationError("modes may only contain 'r' and 'w'");
      e.mode = *m;
    }
    p.entries.push_back(e);
  }
  return normalize_threads(p);
}

std::ofstream open_out(const std::filesystem::path& p) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw IoError("cannot write '" + p.string() + "'");
  return out;
}

}  // namespace

PYBIND11_MODULE(_arraytrace, m) {
  m.doc() = "Array access trace grouping, shape sequencing and statistics";

  auto base = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<ValidationError>(m, "ValidationError", base.ptr());
  py::register_exception<ContractError>(m, "ContractError", base.ptr());
  py::register_exception<IoError>(m, "IoError", base.ptr());
  py::register_exception<ResourceError>(m, "ResourceError", base.ptr());

  m.def(
      "classify",
      [](const std::vector<std::int64_t>& indices, int round) {
        if (indices.empty()) throw ValidationError("empty index sequence");
        return classify_indices(indices, round_of(round)).text();
      },
      py::arg("indices"), py::arg("round") = 2, "Shape tag of a whole index sequence.");

  m.def(
      "sequence",
      [](const std::vector<std::int64_t>& indices, const std::optional<std::string>& modes,
         const std::optional<std::vector<std::uint32_t>>& threads, int round, bool paper_compat_length) {
        if (indices.empty()) throw ValidationError("empty index sequence");
        auto enc = sequence(make_pattern(indices, modes, threads), {round_of(round), {}});
        return render(enc, paper_compat_length ? LengthField::Pattern : LengthField::Slice);
      },
      py::arg("indices"), py::arg("modes") = py::none(), py::arg("threads") = py::none(), py::arg("round") = 2,
      py::arg("paper_compat_length") = false, "Encoding text of one access pattern.");

  m.def(
      "parse_encoding",
      [](const std::string& text) {
        auto enc = parse_encoding(text);
        py::list slices;
        for (const auto& s : enc.slices)
          slices.append(py::dict(py::arg("shape") = s.shape.text(), py::arg("mode") = slice_mode_text(s.mode),
                                 py::arg("threads") = s.thread_count, py::arg("len") = s.len));
        return py::dict(py::arg("min_index") = enc.min_index, py::arg("coverage") = coverage_name(enc.coverage),
                        py::arg("slices") = slices);
      },
      py::arg("text"));

  m.def(
      "group",
      [](const Paths& inputs, const std::filesystem::path& output, std::size_t mem_budget,
         const std::filesystem::path& tmp) {
        py::gil_scoped_release nogil;
        GroupOptions g;
        g.memory_budget = mem_budget;
        g.spill_dir = tmp;
        auto out = open_out(output);
        auto r = run_group(inputs, out, g);
        out.close();
        if (!out) throw IoError("write failed: " + output.string());
        return std::make_tuple(r.arrays, r.accesses, r.runs_spilled, r.parse.malformed);
      },
      py::arg("inputs"), py::arg("output"), py::arg("mem_budget") = std::size_t{256} << 20,
      py::arg("tmp") = std::filesystem::path());

  m.def(
      "sequence_files",
      [](const Paths& inputs, const std::filesystem::path& output, int round, bool paper_compat_length,
         std::size_t workers) {
        py::gil_scoped_release nogil;
        SequenceRunOptions o;
        o.sequencer.round = round_of(round);
        o.length_field = paper_compat_length ? LengthField::Pattern : LengthField::Slice;
        o.workers = workers;
        auto out = open_out(output);
        auto r = run_sequence(inputs, out, o);
        return r.summary_json(o.sequencer.round).dump();
      },
      py::arg("inputs"), py::arg("output"), py::arg("round") = 2, py::arg("paper_compat_length") = false,
      py::arg("workers") = 1);

  m.def(
      "stats",
      [](const Paths& inputs, const std::filesystem::path& out_dir, std::size_t workers, const std::string& corpus) {
        py::gil_scoped_release nogil;
        StatsRunOptions o;
        o.stats.workers = workers;
        auto r = run_stats(inputs, o);
        write_report_files(r.report, o.stats, out_dir, corpus);
        return r.report.to_json(o.stats, corpus).dump();
      },
      py::arg("inputs"), py::arg("out_dir"), py::arg("workers") = 1, py::arg("corpus") = "");

  m.def(
      "synth",
      [](const std::string& spec_json, const std::filesystem::path& raw, const std::filesystem::path& truth,
         std::optional<std::uint64_t> seed, double noise) {
        CorpusSpec spec;
        try {
          spec = CorpusSpec::from_json(nlohmann::json::parse(spec_json));
        } catch (const nlohmann::json::exception& e) {
          throw ValidationError(std::string("corpus spec: ") + e.what());
        }
        py::gil_scoped_release nogil;
        if (seed) spec.seed = *seed;
        if (noise > 0.0) spec = perturb(spec, noise);
        auto s = generate_files(spec, raw, truth);
        return std::make_pair(s.arrays, s.accesses);
      },
      py::arg("spec_json"), py::arg("raw"), py::arg("truth"), py::arg("seed") = py::none(), py::arg("noise") = 0.0);
}
