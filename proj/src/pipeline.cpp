#include "arraytrace/pipeline.hpp"

#include <algorithm>
#include <ostream>
#include <thread>

#include "arraytrace/error.hpp"

namespace arraytrace {

namespace fs = std::filesystem;

namespace {

bool ends_with(std::string_view s, std::string_view suffix) {
  return s.size() >= suffix.size() && s.substr(s.size() - suffix.size()) == suffix;
}

std::size_t field_count(std::string_view line) {
  std::size_t n = 0;
  bool in_field = false;
  for (char c : line) {
    bool space = c == ' ' || c == '\t' || c == '\r';
    if (!space && !in_field) ++n;
    in_field = !space;
  }
  return n;
}

// Runs fn(i) for i in [0, n) on up to `workers` threads, contiguous chunks.
template <typename Fn>
void parallel_chunks(std::size_t n, std::size_t workers, Fn&& fn) {
  workers = std::max<std::size_t>(1, std::min(workers, n));
  auto run = [&](std::size_t w) {
    for (std::size_t i = n * w / workers; i < n * (w + 1) / workers; ++i) fn(i);
  };
  if (workers == 1) {
    run(0);
    return;
  }
  std::vector<std::jthread> threads;
  for (std::size_t w = 0; w < workers; ++w) threads.emplace_back(run, w);
}

}  // namespace

std::optional<InputFormat> parse_input_format(std::string_view name) noexcept {
  if (name == "auto") return InputFormat::Auto;
  if (name == "raw") return InputFormat::Raw;
  if (name == "grouped") return InputFormat::Grouped;
  return std::nullopt;
}

InputFormat sniff_format(const fs::path& path) {
  std::string name = path.filename().string();
  if (ends_with(name, ".gz")) name.resize(name.size() - 3);
  if (ends_with(name, ".atrace")) return InputFormat::Raw;
  if (ends_with(name, ".agrp")) return InputFormat::Grouped;
  auto src = open_lines(path);
  std::string line;
  while (src->next(line)) {
    std::size_t n = field_count(line);
    if (n == 0) continue;
    return n == 3 && line.find('@') != std::string::npos ? InputFormat::Grouped : InputFormat::Raw;
  }
  return InputFormat::Raw;
}

std::size_t default_workers() noexcept { return std::max(1u, std::thread::hardware_concurrency()); }

void for_each_trace(const std::vector<fs::path>& inputs, const TraceSourceOptions& options,
                    const std::function<void(ArrayTrace&&)>& sink, ParseSummary* summary) {
  std::vector<fs::path> files = collect_inputs(inputs);
  std::vector<fs::path> raw, grouped;
  for (const auto& f : files) {
    InputFormat fmt = options.format == InputFormat::Auto ? sniff_format(f) : options.format;
    (fmt == InputFormat::Grouped ? grouped : raw).push_back(f);
  }
  ParseSummary total;
  for (const auto& f : grouped) {
    auto src = open_lines(f);
    GroupedReader reader(*src, options.parse);
    GroupedArrayBlock block;
    while (reader.next(block)) sink(ArrayTrace::from_block(block));
    total.merge(reader.summary());
  }
  if (!raw.empty()) {
    ArrayGrouper grouper(options.group);
    for (const auto& f : raw) {
      auto src = open_lines(f);
      RawTraceReader reader(*src, options.parse);
      RawTraceLine line;
      while (reader.next(line)) grouper.add(line);
      total.merge(reader.summary());
    }
    grouper.finish(sink);
  }
  if (summary) summary->merge(total);
}

GroupResult run_group(const std::vector<fs::path>& inputs, std::ostream& out, const GroupOptions& group,
                      const ParseOptions& parse) {
  GroupResult result;
  ArrayGrouper grouper(group);
  for (const auto& f : collect_inputs(inputs)) {
    auto src = open_lines(f);
    RawTraceReader reader(*src, parse);
    RawTraceLine line;
    while (reader.next(line)) grouper.add(line);
    result.parse.merge(reader.summary());
  }
  grouper.finish([&](ArrayTrace&& t) {
    ++result.arrays;
    result.accesses += t.records.size();
    write_grouped(out, t.to_block());
  });
  if (!out) throw IoError("write of grouped output failed");
  result.runs_spilled = grouper.runs_spilled();
  result.merge_passes = grouper.merge_passes();
  return result;
}

nlohmann::ordered_json SequenceResult::summary_json(ShapeRound round) const {
  nlohmann::ordered_json j;
  j["round"] = static_cast<int>(round);
  j["arrays"] = arrays;
  j["accesses"] = accesses;
  j["patterns"] = patterns;
  auto share = [&](std::uint64_t n) {
    return nlohmann::ordered_json{{"count", n}, {"share", patterns ? double(n) / double(patterns) : 0.0}};
  };
  j["coverage"] = {{"full", share(full)}, {"partial", share(partial)}, {"none", share(none)}};
  nlohmann::ordered_json shapes;
  for (ShapeKind k : shape_precedence(round)) {
    auto i = static_cast<std::size_t>(k);
    shapes[std::string(shape_kind_name(k))] = {{"accesses", shares.accesses[i]}, {"share", shares.fraction(k)}};
  }
  auto u = static_cast<std::size_t>(ShapeKind::Unidentified);
  shapes["Unidentified"] = {{"accesses", shares.accesses[u]}, {"share", shares.fraction(ShapeKind::Unidentified)}};
  j["shape_shares"] = std::move(shapes);
  return j;
}

SequenceResult run_sequence(const std::vector<fs::path>& inputs, std::ostream& jsonl,
                            const SequenceRunOptions& options) {
  SequenceResult result;
  PatternTable table;
  for_each_trace(
      inputs, options.source,
      [&](ArrayTrace&& t) {
        ++result.arrays;
        result.accesses += t.records.size();
        AccessPattern p = normalize_threads(t);
        Digest d = pattern_digest(p);
        table.add(t.key, std::move(p), d);
      },
      &result.parse);

  std::vector<PatternGroup> groups = std::move(table).take_groups();
  std::vector<SequenceEncoding> encodings(groups.size());
  parallel_chunks(groups.size(), options.workers,
                  [&](std::size_t i) { encodings[i] = sequence(groups[i].pattern, options.sequencer); });

  result.patterns = groups.size();
  for (std::size_t i = 0; i < groups.size(); ++i) {
    const auto& enc = encodings[i];
    std::uint64_t members = groups[i].members.size();
    switch (enc.coverage) {
      case Coverage::Full:
        ++result.full;
        break;
      case Coverage::Partial:
        ++result.partial;
        break;
      case Coverage::None:
        ++result.none;
        break;
    }
    result.shares.add(enc, members);
    nlohmann::ordered_json j;
    j["pattern_digest"] = groups[i].digest.hex();
    j["encoding_text"] = render(enc, options.length_field);
    j["coverage"] = std::string(coverage_name(enc.coverage));
    j["member_count"] = members;
    j["pattern_len"] = groups[i].pattern.size();
    j["total_accesses"] = groups[i].pattern.size() * members;
    jsonl << j.dump() << '\n';
  }
  if (!jsonl) throw IoError("write of sequences output failed");
  return result;
}

StatsResult run_stats(const std::vector<fs::path>& inputs, const StatsRunOptions& options) {
  StatsResult result;
  const std::size_t workers = std::max<std::size_t>(1, options.stats.workers);
  const std::size_t batch_size = 1024 * workers;
  std::vector<ArrayTrace> batch;
  std::vector<ArrayFacts> facts;

  auto flush = [&] {
    facts.assign(batch.size(), ArrayFacts{});
    parallel_chunks(batch.size(), workers,
                    [&](std::size_t i) { facts[i] = derive_facts(batch[i], options.stats.prefixes); });
    for (std::size_t i = 0; i < batch.size(); ++i) {
      ScopeVerdict v = ScopeVerdict::InScope;
      if (options.scope) v = scope_of(batch[i], *options.scope, &result.unresolved_lookups);
      switch (v) {
        case ScopeVerdict::InScope:
          result.report.accumulate(facts[i]);
          break;
        case ScopeVerdict::OutOfScope:
          ++result.out_of_scope;
          break;
        case ScopeVerdict::Unresolved:
          ++result.unresolved_arrays;
          result.unresolved.accumulate(facts[i]);
          break;
      }
    }
    batch.clear();
  };

  for_each_trace(
      inputs, options.source,
      [&](ArrayTrace&& t) {
        batch.push_back(std::move(t));
        if (batch.size() >= batch_size) flush();
      },
      &result.parse);
  flush();
  return result;
}

}  // namespace arraytrace
