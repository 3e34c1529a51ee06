// arraytrace: group, sequence, summarize and synthesize array access traces.

#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <new>
#include <optional>
#include <string>
#include <vector>

#include "arraytrace/error.hpp"
#include "arraytrace/pipeline.hpp"
#include "arraytrace/synth.hpp"

namespace fs = std::filesystem;
using namespace arraytrace;

namespace {

std::size_t parse_size(const std::string& text) {
  std::size_t pos = 0;
  unsigned long long v = 0;
  try {
    v = std::stoull(text, &pos);
  } catch (const std::exception&) {
    throw ValidationError("bad size '" + text + "'");
  }
  std::string unit = text.substr(pos);
  int shift = 0;
  if (unit.empty() || unit == "B") shift = 0;
  else if (unit == "K" || unit == "KiB") shift = 10;
  else if (unit == "M" || unit == "MiB") shift = 20;
  else if (unit == "G" || unit == "GiB") shift = 30;
  else throw ValidationError("bad size unit in '" + text + "' (use K, M or G)");
  return static_cast<std::size_t>(v) << shift;
}

std::ofstream open_out(const fs::path& path) {
  if (path.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  return out;
}

void log_parse(const ParseSummary& s) {
  std::cerr << "parsed " << s.records << " records from " << s.lines << " lines";
  if (s.malformed) std::cerr << ", " << s.malformed << " malformed";
  if (s.dropped_blocks) std::cerr << ", " << s.dropped_blocks << " blocks dropped";
  if (s.normalized_tokens) std::cerr << ", " << s.normalized_tokens << " class tokens normalized";
  std::cerr << '\n';
  for (const auto& d : s.diagnostics) std::cerr << "  " << d.source << ':' << d.line_no << ": " << d.message << '\n';
  if (s.malformed + s.dropped_blocks > s.diagnostics.size())
    std::cerr << "  (further diagnostics suppressed)\n";
}

void check_strict(bool strict, const ParseSummary& s) {
  if (strict && (s.malformed || s.dropped_blocks))
    throw ValidationError("malformed input rejected by --strict");
}

struct Common {
  std::string tmp;
  std::string mem_budget = "256M";
  bool strict = false;
  bool exact_class_tokens = false;

  GroupOptions group() const {
    GroupOptions g;
    g.spill_dir = tmp;
    g.memory_budget = parse_size(mem_budget);
    return g;
  }
  ParseOptions parse() const {
    ParseOptions p;
    p.lenient_class_tokens = !exact_class_tokens;
    return p;
  }
};

void add_common(CLI::App* cmd, Common& c, bool grouping) {
  if (grouping) {
    cmd->add_option("--tmp", c.tmp, "Spill directory (default: $ARRAYTRACE_TMP or the system temp dir)");
    cmd->add_option("--mem-budget", c.mem_budget, "Memory budget for grouping, e.g. 512M")
        ->capture_default_str();
  }
  cmd->add_flag("--strict", c.strict, "Fail when any input line is malformed");
  cmd->add_flag("--exact-class-tokens", c.exact_class_tokens,
                "Reject class hashes containing the letter O instead of reading it as 0");
}

ShapeRound to_round(int r) { return r == 1 ? ShapeRound::Round1 : ShapeRound::Round2; }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Array access trace analysis"};
  app.require_subcommand(1);

  // group
  Common group_common;
  std::vector<std::string> group_inputs;
  std::string group_out;
  auto* group = app.add_subcommand("group", "Group a raw trace into per-array blocks");
  group->add_option("inputs", group_inputs, "Raw trace files or directories")->required();
  group->add_option("-o,--output", group_out, "Grouped output file")->required();
  add_common(group, group_common, true);

  // sequence
  Common seq_common;
  std::vector<std::string> seq_inputs;
  std::string seq_out, seq_summary, seq_format = "auto";
  int seq_round = 2;
  bool paper_length = false;
  std::size_t seq_workers = default_workers();
  auto* seq = app.add_subcommand("sequence", "Encode each distinct access pattern as shape slices");
  seq->add_option("inputs", seq_inputs, "Grouped (or raw) trace files or directories")->required();
  seq->add_option("-o,--output", seq_out, "Sequences output (JSON lines)")->required();
  seq->add_option("--summary", seq_summary, "Coverage and shape share summary (JSON)");
  seq->add_option("--round", seq_round, "Shape set")->check(CLI::IsMember({1, 2}))->capture_default_str();
  seq->add_flag("--paper-compat-length", paper_length, "Print the whole pattern length in every slice");
  seq->add_option("--format", seq_format, "Input format")->check(CLI::IsMember({"auto", "raw", "grouped"}))
      ->capture_default_str();
  seq->add_option("--workers", seq_workers, "Worker threads")->check(CLI::PositiveNumber);
  add_common(seq, seq_common, true);

  // stats
  Common stats_common;
  std::vector<std::string> stats_inputs;
  std::string stats_out, stats_format = "auto", class_map, scope_prefix, unresolved = "exclude", corpus;
  std::size_t stats_workers = default_workers();
  auto* stats = app.add_subcommand("stats", "Compute the usage report");
  stats->add_option("inputs", stats_inputs, "Grouped or raw trace files or directories")->required();
  stats->add_option("-o,--output", stats_out, "Output directory")->required();
  stats->add_option("--format", stats_format, "Input format")
      ->check(CLI::IsMember({"auto", "raw", "grouped"}))->capture_default_str();
  stats->add_option("--class-map", class_map, "Class map (.cmap) for scope filtering");
  stats->add_option("--scope-prefix", scope_prefix, "Keep arrays whose accessing classes share this prefix")
      ->needs(stats->get_option("--class-map"));
  stats->add_option("--unresolved", unresolved, "Arrays with unmapped classes")
      ->check(CLI::IsMember({"include", "exclude", "separate"}))->capture_default_str();
  stats->add_option("--corpus", corpus, "Corpus label written to the report");
  stats->add_option("--workers", stats_workers, "Worker threads")->check(CLI::PositiveNumber);
  add_common(stats, stats_common, true);

  // synth
  std::string synth_spec, synth_out, synth_truth, synth_perturbed;
  std::optional<std::uint64_t> synth_seed;
  double noise = 0.0;
  std::size_t window = 16;
  auto* synth = app.add_subcommand("synth", "Generate a raw trace with planted shapes");
  synth->add_option("spec", synth_spec, "Corpus spec (JSON)")->required();
  synth->add_option("-o,--output", synth_out, "Raw trace output")->required();
  synth->add_option("--truth", synth_truth, "Ground truth output (JSON lines)")->required();
  synth->add_option("--seed", synth_seed, "Override the spec seed");
  synth->add_option("--noise", noise, "Probability of replacing an access by a jump")
      ->check(CLI::Range(0.0, 1.0));
  synth->add_option("--window", window, "Arrays interleaved at a time")->check(CLI::PositiveNumber);
  synth->add_option("--perturbed-spec", synth_perturbed, "Write the spec with its jumps (JSON)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? 0 : static_cast<int>(ExitCode::kValidation);
  }

  try {
    if (*group) {
      std::vector<fs::path> in(group_inputs.begin(), group_inputs.end());
      auto out = open_out(group_out);
      auto r = run_group(in, out, group_common.group(), group_common.parse());
      out.close();
      if (!out) throw IoError("write failed: " + group_out);
      log_parse(r.parse);
      std::cerr << "grouped " << r.accesses << " accesses into " << r.arrays << " arrays";
      if (r.runs_spilled) std::cerr << " (" << r.runs_spilled << " spill runs, " << r.merge_passes << " merge passes)";
      std::cerr << '\n';
      check_strict(group_common.strict, r.parse);
    } else if (*seq) {
      SequenceRunOptions o;
      o.sequencer.round = to_round(seq_round);
      o.length_field = paper_length ? LengthField::Pattern : LengthField::Slice;
      o.workers = seq_workers;
      o.source.format = *parse_input_format(seq_format);
      o.source.group = seq_common.group();
      o.source.parse = seq_common.parse();
      std::vector<fs::path> in(seq_inputs.begin(), seq_inputs.end());
      auto out = open_out(seq_out);
      auto r = run_sequence(in, out, o);
      out.close();
      if (!out) throw IoError("write failed: " + seq_out);
      if (!seq_summary.empty()) {
        auto s = open_out(seq_summary);
        s << r.summary_json(o.sequencer.round).dump(2) << '\n';
        if (!s) throw IoError("write failed: " + seq_summary);
      }
      log_parse(r.parse);
      std::cerr << "sequenced " << r.patterns << " patterns of " << r.arrays << " arrays: " << r.full
                << " full, " << r.partial << " partial, " << r.none << " none\n";
      check_strict(seq_common.strict, r.parse);
    } else if (*stats) {
      StatsRunOptions o;
      o.stats.workers = stats_workers;
      o.source.format = *parse_input_format(stats_format);
      o.source.group = stats_common.group();
      o.source.parse = stats_common.parse();
      std::optional<ClassMap> cmap;
      if (!class_map.empty()) {
        ParseSummary cs;
        cmap = load_class_map(class_map, &cs);
        for (const auto& c : cmap->collisions())
          std::cerr << "class hash collision " << hex_upper(c.hash) << ": kept " << c.kept << ", ignored "
                    << c.other << '\n';
        if (cs.malformed) log_parse(cs);
      }
      if (!scope_prefix.empty()) {
        ScopeFilter f;
        f.classes = &*cmap;
        f.prefix = scope_prefix;
        f.unresolved = unresolved == "include"   ? UnresolvedPolicy::Include
                       : unresolved == "separate" ? UnresolvedPolicy::Separate
                                                  : UnresolvedPolicy::Exclude;
        o.scope = f;
      }
      std::vector<fs::path> in(stats_inputs.begin(), stats_inputs.end());
      auto r = run_stats(in, o);
      nlohmann::ordered_json extra;
      if (o.scope) {
        nlohmann::ordered_json scope;
        scope["prefix"] = scope_prefix;
        scope["unresolved_policy"] = unresolved;
        scope["in_scope_arrays"] = r.report.n_arrays();
        scope["out_of_scope_arrays"] = r.out_of_scope;
        scope["unresolved_arrays"] = r.unresolved_arrays;
        scope["unresolved_lookups"] = r.unresolved_lookups;
        if (o.scope->unresolved == UnresolvedPolicy::Separate)
          scope["unresolved_report"] = r.unresolved.to_json(o.stats, corpus);
        extra["scope"] = std::move(scope);
      }
      write_report_files(r.report, o.stats, stats_out, corpus, extra);
      log_parse(r.parse);
      std::cerr << "report on " << r.report.n_arrays() << " arrays written to " << stats_out << '\n';
      check_strict(stats_common.strict, r.parse);
    } else if (*synth) {
      CorpusSpec spec = CorpusSpec::load(synth_spec);
      if (synth_seed) spec.seed = *synth_seed;
      if (noise > 0.0) spec = perturb(spec, noise);
      if (!synth_perturbed.empty()) open_out(synth_perturbed) << spec.to_json().dump(2) << '\n';
      GenerateOptions g;
      g.interleave_window = window;
      auto s = generate_files(spec, synth_out, synth_truth, g);
      std::cerr << "generated " << s.accesses << " accesses over " << s.arrays << " arrays\n";
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return static_cast<int>(e.exit_code());
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return static_cast<int>(ExitCode::kIo);
  } catch (const std::bad_alloc&) {
    std::cerr << "error: out of memory\n";
    return static_cast<int>(ExitCode::kResource);
  }
  return 0;
}
