#include "arraytrace/synth.hpp"

#include <algorithm>
#include <fstream>
#include <random>
#include <set>

#include "arraytrace/error.hpp"
#include "arraytrace/trace_io.hpp"

namespace arraytrace {

namespace {

using json = nlohmann::json;

// Portable bounded draw; std distributions differ between standard libraries.
std::uint64_t below(std::mt19937_64& rng, std::uint64_t n) {
  if (n <= 1) return 0;
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
  std::uint64_t v;
  do {
    v = rng();
  } while (v >= limit);
  return v % n;
}

double unit(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

[[noreturn]] void invalid(const std::string& where, const std::string& what) {
  throw ValidationError(where + ": " + what);
}

bool is_linear(ShapeKind k) { return k == ShapeKind::LinearInc || k == ShapeKind::LinearDec; }

// Index sequence of one copy of the slice, before jumps.
std::vector<std::int64_t> base_indices(const ShapeSpec& s, const std::string& where) {
  const ShapeKind kind = s.shape.kind;
  std::uint64_t n = s.len;
  if (kind == ShapeKind::Unidentified) {
    if (s.offsets.empty()) invalid(where, "U needs the literal 'offsets' list");
    if (n != 0 && n != s.offsets.size()) invalid(where, "U: len must equal the number of offsets");
    n = s.offsets.size();
  }
  if (n == 0) invalid(where, "len must be >= 1");
  std::vector<std::int64_t> ix;
  ix.reserve(n);
  auto step_or = [&](std::int64_t dflt) { return s.steps.empty() ? dflt : s.steps.front(); };

  switch (kind) {
    case ShapeKind::Constant:
      ix.assign(n, s.start);
      break;
    case ShapeKind::LinearInc:
    case ShapeKind::LinearDec: {
      std::int64_t step = s.shape.step.value_or(1);
      if (kind == ShapeKind::LinearDec) step = -step;
      for (std::uint64_t k = 0; k < n; ++k) ix.push_back(s.start + static_cast<std::int64_t>(k) * step);
      break;
    }
    case ShapeKind::RepStepInc:
    case ShapeKind::RepStepDec:
    case ShapeKind::VarStepInc:
    case ShapeKind::VarStepDec: {
      if (s.steps.empty()) invalid(where, "'steps' must not be empty");
      bool dec = kind == ShapeKind::RepStepDec || kind == ShapeKind::VarStepDec;
      std::int64_t v = s.start;
      for (std::uint64_t k = 0; k < n; ++k) {
        ix.push_back(v);
        std::int64_t d = s.steps[k % s.steps.size()];
        if (d < 0) invalid(where, "steps are magnitudes and must be >= 0");
        v += dec ? -d : d;
      }
      break;
    }
    case ShapeKind::Fringes:
      if (s.offsets.empty()) invalid(where, "Fr needs 'offsets'");
      for (std::uint64_t k = 0; k < n; ++k) ix.push_back(s.start + s.offsets[k % s.offsets.size()]);
      break;
    case ShapeKind::Peaks: {
      std::int64_t step = step_or(1);
      std::uint64_t up = s.up != 0 ? s.up : n / 2;
      if (step < 1) invalid(where, "Pk: step must be >= 1");
      if (up < 1 || up + 1 >= n) invalid(where, "Pk: needs at least one rising and one falling move");
      for (std::uint64_t k = 0; k < n; ++k) {
        auto ki = static_cast<std::int64_t>(k);
        auto ui = static_cast<std::int64_t>(up);
        ix.push_back(k <= up ? s.start + ki * step : s.start + ui * step - (ki - ui) * step);
      }
      break;
    }
    case ShapeKind::Saws: {
      if (s.run_len < 2) invalid(where, "Sw: run_len must be >= 2");
      if (s.shift < 1) invalid(where, "Sw: shift must be >= 1");
      std::int64_t step = step_or(1);
      if (step < 1) invalid(where, "Sw: step must be >= 1");
      if (n < 2ULL * s.run_len) invalid(where, "Sw: len must cover at least two runs");
      if (n % s.run_len == 1) invalid(where, "Sw: the last run would have length 1");
      for (std::uint64_t k = 0; k < n; ++k) {
        auto run = static_cast<std::int64_t>(k / s.run_len);
        auto pos = static_cast<std::int64_t>(k % s.run_len);
        ix.push_back(s.start + run * s.shift + pos * step);
      }
      break;
    }
    case ShapeKind::ParallelTrav:
      for (std::uint64_t k = 0; k < n; ++k) {
        auto half = static_cast<std::int64_t>(k / 2);
        ix.push_back((k % 2 == 0 ? s.start : s.start2) + half);
      }
      break;
    case ShapeKind::LinRepUpDown: {
      if (s.up < 1 || s.down < 1) invalid(where, "LRud: up and down must be >= 1");
      std::int64_t v = s.start;
      std::uint64_t cycle = s.up + s.down;
      for (std::uint64_t k = 0; k < n; ++k) {
        ix.push_back(v);
        v += (k % cycle) < s.up ? 1 : -1;
      }
      break;
    }
    case ShapeKind::Unidentified:
      for (auto off : s.offsets) ix.push_back(s.start + off);
      break;
  }
  for (auto v : ix)
    if (v < 0) invalid(where, "generated index " + std::to_string(v) + " is below zero");
  return ix;
}

bool satisfies(std::span<const std::int64_t> ix, const ShapeTag& tag) {
  auto found = detect_shape(ix, tag.kind);
  if (!found) return false;
  return !tag.step || found->step == tag.step;
}

std::vector<AccessEntry> entries_for(const ShapeSpec& s, std::span<const std::int64_t> ix,
                                     const std::string& where) {
  if (s.modes.empty()) invalid(where, "'modes' must not be empty");
  if (s.threads.empty()) invalid(where, "'threads' must not be empty");
  std::vector<AccessEntry> out;
  out.reserve(ix.size());
  for (std::size_t k = 0; k < ix.size(); ++k) {
    char m = s.modes[k % s.modes.size()];
    if (m != 'r' && m != 'w') invalid(where, "'modes' may only contain r and w");
    std::uint32_t t = s.threads[k % s.threads.size()];
    if (t < 1) invalid(where, "thread numbers start at 1");
    out.push_back({ix[k], t, m == 'r' ? Mode::Read : Mode::Write});
  }
  return out;
}

std::string shape_text(const ShapeTag& tag) { return tag.text(); }

}  // namespace

std::uint64_t template_seed(std::uint64_t master_seed, std::size_t template_index) noexcept {
  return splitmix64(master_seed ^ splitmix64(template_index + 1));
}

std::vector<AccessEntry> generate_slice(const ShapeSpec& s, const std::string& where) {
  if (!s.shape.valid()) invalid(where, "invalid shape tag");
  if (s.repeat < 1) invalid(where, "repeat must be >= 1");
  if (s.perturbed() && s.repeat != 1) invalid(where, "jumps require repeat == 1");
  std::vector<std::int64_t> ix = base_indices(s, where);
  for (const auto& [pos, value] : s.jumps) {
    if (pos >= ix.size()) invalid(where, "jump position " + std::to_string(pos) + " out of range");
    if (value < 0) invalid(where, "jump index below zero");
    ix[pos] = value;
  }
  if (s.perturbed()) {
    if (s.shape.kind != ShapeKind::Unidentified && detect_shape(ix, s.shape.kind))
      invalid(where, "perturbed slice still satisfies " + shape_text(s.shape));
  } else if (!satisfies(ix, s.shape)) {
    invalid(where, "generated indices do not satisfy " + shape_text(s.shape) +
                       " (check the shape parameters)");
  }
  std::vector<AccessEntry> one = entries_for(s, ix, where);
  std::vector<AccessEntry> out;
  out.reserve(one.size() * s.repeat);
  for (std::uint32_t r = 0; r < s.repeat; ++r) out.insert(out.end(), one.begin(), one.end());
  return out;
}

TemplatePattern build_template(const ArrayTemplate& t, std::uint64_t seed, const std::string& where) {
  if (t.slices.empty()) invalid(where, "template has no slices");
  if (t.count < 1) invalid(where, "count must be >= 1");
  TypeDescriptor::parse(t.type);
  TemplatePattern out;
  for (std::size_t i = 0; i < t.slices.size(); ++i) {
    const auto& spec = t.slices[i];
    std::string w = where + " slice " + std::to_string(i);
    auto entries = generate_slice(spec, w);
    std::size_t copy_len = entries.size() / spec.repeat;
    for (std::uint32_t r = 0; r < spec.repeat; ++r) {
      PlantedSlice ps;
      ps.start = out.pattern.entries.size() + r * copy_len;
      ps.len = copy_len;
      ps.shape = spec.shape;
      ps.perturbed = spec.perturbed();
      std::span<const AccessEntry> copy(entries.data() + r * copy_len, copy_len);
      ps.code.shape = spec.shape;
      ps.code.mode = mode_of_slice(copy);
      std::vector<std::uint32_t> threads;
      for (const auto& e : copy) threads.push_back(e.thread);
      std::sort(threads.begin(), threads.end());
      ps.code.thread_count =
          static_cast<std::uint32_t>(std::unique(threads.begin(), threads.end()) - threads.begin());
      ps.code.len = copy_len;
      out.slices.push_back(ps);
    }
    out.pattern.entries.insert(out.pattern.entries.end(), entries.begin(), entries.end());
  }
  std::int64_t max_index = 0;
  for (const auto& e : out.pattern.entries) max_index = std::max(max_index, e.index);
  out.length = t.length.value_or(static_cast<std::uint32_t>(max_index + 1));
  if (out.length == 0) invalid(where, "length must be >= 1");
  out.class_hash = t.class_hash.value_or(static_cast<std::uint32_t>(splitmix64(seed) >> 32));
  return out;
}

SequenceEncoding TemplatePattern::truth_encoding() const {
  SequenceEncoding enc;
  enc.min_index = pattern.entries.empty() ? 0 : pattern.entries.front().index;
  for (const auto& e : pattern.entries) enc.min_index = std::min(enc.min_index, e.index);
  for (const auto& s : slices) enc.slices.push_back(s.code);
  enc.coverage = coverage_of(enc.slices);
  return enc;
}

// ------------------------------------------------------------ spec JSON

namespace {

template <typename T>
T get_or(const json& j, const char* key, T dflt) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return dflt;
  return it->get<T>();
}

ShapeSpec shape_from_json(const json& j, const std::string& where) {
  if (!j.is_object()) invalid(where, "shape spec must be an object");
  ShapeSpec s;
  auto tag = ShapeTag::parse_text(get_or<std::string>(j, "shape", ""));
  if (!tag) invalid(where, "unknown or missing shape tag");
  s.shape = *tag;
  s.start = get_or<std::int64_t>(j, "start", 0);
  s.len = get_or<std::uint64_t>(j, "len", 0);
  s.steps = get_or<std::vector<std::int64_t>>(j, "steps", {});
  s.offsets = get_or<std::vector<std::int64_t>>(j, "offsets", {});
  s.up = get_or<std::uint32_t>(j, "up", 0);
  s.down = get_or<std::uint32_t>(j, "down", 0);
  s.run_len = get_or<std::uint32_t>(j, "run_len", 0);
  s.shift = get_or<std::int64_t>(j, "shift", 0);
  s.start2 = get_or<std::int64_t>(j, "start2", 0);
  s.modes = get_or<std::string>(j, "modes", "r");
  s.threads = get_or<std::vector<std::uint32_t>>(j, "threads", {1});
  s.repeat = get_or<std::uint32_t>(j, "repeat", 1);
  s.jumps = get_or<std::vector<std::pair<std::uint64_t, std::int64_t>>>(j, "jumps", {});
  return s;
}

std::optional<std::uint32_t> class_from_json(const json& j) {
  auto it = j.find("class");
  if (it == j.end() || it->is_null()) return std::nullopt;
  if (it->is_number_unsigned()) return it->get<std::uint32_t>();
  auto v = parse_class_token(it->get<std::string>(), false);
  if (!v) throw ValidationError("bad class hash '" + it->get<std::string>() + "'");
  return v;
}

}  // namespace

CorpusSpec CorpusSpec::from_json(const json& j) {
  try {
    CorpusSpec spec;
    spec.seed = get_or<std::uint64_t>(j, "seed", 0);
    const auto& templates = j.at("templates");
    for (std::size_t i = 0; i < templates.size(); ++i) {
      const auto& tj = templates[i];
      std::string where = "template " + std::to_string(i);
      ArrayTemplate t;
      t.type = get_or<std::string>(tj, "type", "[I");
      if (tj.contains("length") && !tj["length"].is_null()) t.length = tj["length"].get<std::uint32_t>();
      t.count = get_or<std::uint64_t>(tj, "count", 1);
      t.class_hash = class_from_json(tj);
      const auto& slices = tj.at("slices");
      for (std::size_t k = 0; k < slices.size(); ++k)
        t.slices.push_back(shape_from_json(slices[k], where + " slice " + std::to_string(k)));
      spec.templates.push_back(std::move(t));
    }
    return spec;
  } catch (const json::exception& e) {
    throw ValidationError(std::string("corpus spec: ") + e.what());
  }
}

CorpusSpec CorpusSpec::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open corpus spec '" + path.string() + "'");
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ValidationError("corpus spec '" + path.string() + "': " + e.what());
  }
  return from_json(j);
}

nlohmann::ordered_json CorpusSpec::to_json() const {
  nlohmann::ordered_json j;
  j["seed"] = seed;
  auto ts = nlohmann::ordered_json::array();
  for (const auto& t : templates) {
    nlohmann::ordered_json tj;
    tj["type"] = t.type;
    if (t.length) tj["length"] = *t.length;
    tj["count"] = t.count;
    if (t.class_hash) tj["class"] = hex_upper(*t.class_hash);
    auto ss = nlohmann::ordered_json::array();
    for (const auto& s : t.slices) {
      nlohmann::ordered_json sj;
      sj["shape"] = s.shape.text();
      sj["start"] = s.start;
      sj["len"] = s.len;
      if (!s.steps.empty()) sj["steps"] = s.steps;
      if (!s.offsets.empty()) sj["offsets"] = s.offsets;
      if (s.up != 0) sj["up"] = s.up;
      if (s.down != 0) sj["down"] = s.down;
      if (s.run_len != 0) sj["run_len"] = s.run_len;
      if (s.shift != 0) sj["shift"] = s.shift;
      if (s.start2 != 0) sj["start2"] = s.start2;
      sj["modes"] = s.modes;
      sj["threads"] = s.threads;
      if (s.repeat != 1) sj["repeat"] = s.repeat;
      if (!s.jumps.empty()) sj["jumps"] = s.jumps;
      ss.push_back(std::move(sj));
    }
    tj["slices"] = std::move(ss);
    ts.push_back(std::move(tj));
  }
  j["templates"] = std::move(ts);
  return j;
}

// ------------------------------------------------------------ generation

GenerateSummary generate(const CorpusSpec& spec, std::ostream& raw, std::ostream& truth,
                         const GenerateOptions& options) {
  std::vector<TemplatePattern> patterns;
  std::vector<TypeDescriptor> types;
  std::vector<std::vector<std::size_t>> slice_of;  // per template: entry -> slice ordinal
  for (std::size_t t = 0; t < spec.templates.size(); ++t) {
    patterns.push_back(build_template(spec.templates[t], template_seed(spec.seed, t),
                                      "template " + std::to_string(t)));
    types.push_back(TypeDescriptor::parse(spec.templates[t].type));
    std::vector<std::size_t> so(patterns.back().pattern.size());
    for (std::size_t s = 0; s < patterns.back().slices.size(); ++s) {
      const auto& ps = patterns.back().slices[s];
      std::fill(so.begin() + static_cast<std::ptrdiff_t>(ps.start),
                so.begin() + static_cast<std::ptrdiff_t>(ps.start + ps.len), s);
    }
    slice_of.push_back(std::move(so));
  }

  std::mt19937_64 rng(splitmix64(spec.seed));
  std::vector<std::uint32_t> order;  // template index per array
  for (std::size_t t = 0; t < spec.templates.size(); ++t)
    order.insert(order.end(), spec.templates[t].count, static_cast<std::uint32_t>(t));
  for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[below(rng, i)]);

  struct Active {
    std::uint32_t tmpl;
    ArrayKey key;
    std::uint64_t thread_base;
    std::size_t pos;
  };
  std::set<std::pair<std::uint32_t, std::uint32_t>> used_tokens;  // (template type, token)
  std::vector<Active> window;
  std::size_t next_array = 0;
  GenerateSummary summary;
  const std::size_t width = std::max<std::size_t>(1, options.interleave_window);

  auto activate = [&] {
    std::uint32_t t = order[next_array++];
    std::uint32_t type_slot = static_cast<std::uint32_t>(
        std::find_if(types.begin(), types.end(), [&](const TypeDescriptor& d) { return d == types[t]; }) -
        types.begin());
    std::uint32_t token;
    do {
      token = static_cast<std::uint32_t>(rng() >> 32);
    } while (!used_tokens.emplace(type_slot, token).second);
    window.push_back({t, ArrayKey{types[t], token}, 1 + below(rng, 1000), 0});
  };

  auto write_truth = [&](const Active& a) {
    const auto& tp = patterns[a.tmpl];
    nlohmann::ordered_json j;
    j["array"] = a.key.id();
    j["template"] = a.tmpl;
    j["accesses"] = tp.pattern.size();
    bool perturbed = std::any_of(tp.slices.begin(), tp.slices.end(),
                                 [](const PlantedSlice& s) { return s.perturbed; });
    if (!perturbed) j["encoding"] = render(tp.truth_encoding());
    auto sl = nlohmann::ordered_json::array();
    std::map<std::string, std::uint64_t> per_shape;
    for (const auto& s : tp.slices) {
      sl.push_back({{"start", s.start}, {"len", s.len}, {"shape", s.shape.text()}, {"perturbed", s.perturbed}});
      if (!s.perturbed) per_shape[std::string(shape_kind_name(s.shape.kind))] += s.len;
    }
    j["slices"] = std::move(sl);
    j["shape_accesses"] = per_shape;
    truth << j.dump() << '\n';
  };

  RawTraceLine line;
  while (next_array < order.size() || !window.empty()) {
    while (window.size() < width && next_array < order.size()) activate();
    std::size_t slot = below(rng, window.size());
    Active& a = window[slot];
    const auto& tp = patterns[a.tmpl];
    const AccessEntry& e = tp.pattern.entries[a.pos];
    line.key = a.key;
    line.rec.mode = e.mode;
    line.rec.index = e.index;
    line.rec.length = tp.length;
    line.rec.thread = a.thread_base + e.thread - 1;
    line.rec.line = static_cast<std::int32_t>(100 + slice_of[a.tmpl][a.pos]);
    line.rec.class_hash = tp.class_hash;
    write_raw(raw, line);
    ++summary.accesses;
    if (++a.pos == tp.pattern.size()) {
      write_truth(a);
      ++summary.arrays;
      window.erase(window.begin() + static_cast<std::ptrdiff_t>(slot));
    }
  }
  if (!truth) throw IoError("truth write failed");
  return summary;
}

GenerateSummary generate_files(const CorpusSpec& spec, const std::filesystem::path& raw,
                               const std::filesystem::path& truth, const GenerateOptions& options) {
  std::ofstream raw_out(raw, std::ios::binary);
  if (!raw_out) throw IoError("cannot write '" + raw.string() + "'");
  std::ofstream truth_out(truth, std::ios::binary);
  if (!truth_out) throw IoError("cannot write '" + truth.string() + "'");
  auto summary = generate(spec, raw_out, truth_out, options);
  raw_out.close();
  truth_out.close();
  if (!raw_out || !truth_out) throw IoError("write failed");
  return summary;
}

// ------------------------------------------------------------ perturbation

CorpusSpec perturb(const CorpusSpec& spec, double noise) {
  if (!(noise >= 0.0 && noise <= 1.0)) throw ValidationError("noise must lie in [0, 1]");
  CorpusSpec out;
  out.seed = spec.seed;
  std::mt19937_64 rng(splitmix64(spec.seed ^ 0x6e6f697365ULL));
  for (std::size_t t = 0; t < spec.templates.size(); ++t) {
    const auto& tmpl = spec.templates[t];
    ArrayTemplate nt = tmpl;
    nt.slices.clear();
    // Pin the length so jumps cannot change the array length.
    TemplatePattern base = build_template(tmpl, template_seed(spec.seed, t), "template " + std::to_string(t));
    nt.length = base.length;
    nt.class_hash = base.class_hash;
    const std::int64_t hi = std::max<std::int64_t>(base.length, 16);
    for (std::size_t si = 0; si < tmpl.slices.size(); ++si) {
      ShapeSpec copy = tmpl.slices[si];
      std::uint32_t repeats = copy.repeat;
      copy.repeat = 1;
      std::string where = "template " + std::to_string(t) + " slice " + std::to_string(si);
      for (std::uint32_t r = 0; r < repeats; ++r) {
        ShapeSpec s = copy;
        if (noise > 0.0 && s.shape.kind != ShapeKind::Unidentified && s.jumps.empty()) {
          std::vector<std::int64_t> ix = base_indices(s, where);
          std::vector<std::uint64_t> chosen;
          for (std::uint64_t k = 0; k < ix.size(); ++k)
            if (unit(rng) < noise) chosen.push_back(k);
          if (!chosen.empty()) {
            for (int attempt = 0;; ++attempt) {
              std::vector<std::int64_t> trial = ix;
              s.jumps.clear();
              for (auto pos : chosen) {
                std::int64_t v;
                do {
                  v = 2 + static_cast<std::int64_t>(below(rng, static_cast<std::uint64_t>(hi - 2)));
                } while (v == ix[pos]);
                trial[pos] = v;
                s.jumps.emplace_back(pos, v);
              }
              if (!detect_shape(trial, s.shape.kind)) break;
              if (attempt % 32 == 31) {
                if (chosen.size() == ix.size())
                  invalid(where, "cannot perturb the slice out of shape " + shape_text(s.shape));
                std::vector<std::uint64_t> free;
                for (std::uint64_t k = 0; k < ix.size(); ++k)
                  if (std::find(chosen.begin(), chosen.end(), k) == chosen.end()) free.push_back(k);
                chosen.push_back(free[below(rng, free.size())]);
                std::sort(chosen.begin(), chosen.end());
              }
            }
          }
        }
        nt.slices.push_back(std::move(s));
      }
    }
    out.templates.push_back(std::move(nt));
  }
  return out;
}

}  // namespace arraytrace
