#include "arraytrace/sequencer.hpp"

#include <algorithm>
#include <charconv>
#include <set>

#include "arraytrace/error.hpp"

namespace arraytrace {

namespace {

using Indices = std::span<const std::int64_t>;

constexpr std::array<ShapeKind, 7> kRound1{
    ShapeKind::Constant,   ShapeKind::LinearInc,  ShapeKind::LinearDec,  ShapeKind::RepStepInc,
    ShapeKind::RepStepDec, ShapeKind::VarStepInc, ShapeKind::VarStepDec,
};

constexpr std::array<ShapeKind, 12> kRound2{
    ShapeKind::Constant,     ShapeKind::LinearInc,  ShapeKind::LinearDec,  ShapeKind::RepStepInc,
    ShapeKind::RepStepDec,   ShapeKind::VarStepInc, ShapeKind::VarStepDec, ShapeKind::LinRepUpDown,
    ShapeKind::Peaks,        ShapeKind::Saws,       ShapeKind::Fringes,    ShapeKind::ParallelTrav,
};

int sign(std::int64_t v) { return (v > 0) - (v < 0); }

bool is_constant(Indices ix) {
  return !ix.empty() && std::all_of(ix.begin(), ix.end(), [&](auto v) { return v == ix[0]; });
}

// Constant step of +dir * s, s >= 1.
std::optional<std::uint32_t> linear_step(Indices ix, int dir) {
  if (ix.size() < 2) return std::nullopt;
  std::int64_t d = ix[1] - ix[0];
  if (sign(d) != dir) return std::nullopt;
  for (std::size_t k = 2; k < ix.size(); ++k)
    if (ix[k] - ix[k - 1] != d) return std::nullopt;
  std::int64_t s = d * dir;
  if (s > static_cast<std::int64_t>(UINT32_MAX)) return std::nullopt;
  return static_cast<std::uint32_t>(s);
}

// Monotone in direction dir with at least one repeat and one move.
bool is_rep_step(Indices ix, int dir) {
  if (ix.size() < 3) return false;
  bool repeat = false;
  bool move = false;
  for (std::size_t k = 1; k < ix.size(); ++k) {
    int sg = sign(ix[k] - ix[k - 1]);
    if (sg == -dir) return false;
    (sg == 0 ? repeat : move) = true;
  }
  return repeat && move;
}

// Strictly monotone in direction dir with at least two distinct step sizes.
bool is_var_step(Indices ix, int dir) {
  if (ix.size() < 3) return false;
  std::int64_t first = ix[1] - ix[0];
  bool varied = false;
  for (std::size_t k = 1; k < ix.size(); ++k) {
    std::int64_t d = ix[k] - ix[k - 1];
    if (sign(d) != dir) return false;
    if (d != first) varied = true;
  }
  return varied;
}

// Only +-1 moves, both directions present, at least two direction changes.
bool is_lin_rep_up_down(Indices ix) {
  if (ix.size() < 4) return false;
  int changes = 0;
  int prev = 0;
  for (std::size_t k = 1; k < ix.size(); ++k) {
    std::int64_t d = ix[k] - ix[k - 1];
    if (d != 1 && d != -1) return false;
    int sg = static_cast<int>(d);
    if (prev != 0 && sg != prev) ++changes;
    prev = sg;
  }
  return changes >= 2;
}

// Rises (repeats allowed) to a single top, then falls (repeats allowed).
bool is_peak(Indices ix) {
  if (ix.size() < 3) return false;
  std::size_t k = 1;
  bool rose = false;
  for (; k < ix.size() && ix[k] >= ix[k - 1]; ++k)
    if (ix[k] > ix[k - 1]) rose = true;
  if (!rose || k == ix.size()) return false;
  for (; k < ix.size(); ++k)
    if (ix[k] > ix[k - 1]) return false;
  return true;
}

// Two or more forward runs, each of length >= 2 with a rise, cut where the
// index drops; every later run starts above the first run's start.
bool is_saw(Indices ix) {
  if (ix.size() < 4) return false;
  std::size_t runs = 0;
  std::size_t run_start = 0;
  std::int64_t first_start = ix[0];
  auto run_ok = [&](std::size_t b, std::size_t e) {
    if (e - b < 2) return false;
    return ix[e - 1] > ix[b];
  };
  for (std::size_t k = 1; k <= ix.size(); ++k) {
    if (k == ix.size() || ix[k] < ix[k - 1]) {
      if (!run_ok(run_start, k)) return false;
      if (runs > 0 && ix[run_start] <= first_start) return false;
      ++runs;
      run_start = k;
    }
  }
  return runs >= 2;
}

// Alternates between a few indices and comes back to at least one of them.
bool is_fringe(Indices ix, std::size_t max_distinct) {
  if (ix.size() < 4) return false;
  std::set<std::int64_t> distinct(ix.begin(), ix.end());
  if (distinct.size() < 2 || distinct.size() > max_distinct) return false;
  std::set<std::int64_t> left;
  for (std::size_t k = 1; k < ix.size(); ++k) {
    if (ix[k] == ix[k - 1]) continue;
    if (left.count(ix[k]) != 0) return true;
    left.insert(ix[k - 1]);
  }
  return false;
}

// Two interleaved forward traversals. Entries go greedily to the lane whose
// last index is the nearest one at or below them; a second lane opens only
// when no lane can take the entry.
bool is_parallel(Indices ix) {
  if (ix.size() < 4) return false;
  std::array<std::int64_t, 2> last{};
  std::array<std::size_t, 2> count{};
  std::array<std::size_t, 2> first_pos{};
  std::array<std::size_t, 2> last_pos{};
  std::array<bool, 2> rose{};
  std::vector<std::uint8_t> lane_of(ix.size());
  std::size_t lanes = 0;
  for (std::size_t k = 0; k < ix.size(); ++k) {
    int best = -1;
    for (std::size_t l = 0; l < lanes; ++l)
      if (last[l] <= ix[k] && (best < 0 || last[l] > last[static_cast<std::size_t>(best)]))
        best = static_cast<int>(l);
    if (best < 0) {
      if (lanes == 2) return false;
      best = static_cast<int>(lanes++);
      first_pos[static_cast<std::size_t>(best)] = k;
    } else if (ix[k] > last[static_cast<std::size_t>(best)]) {
      rose[static_cast<std::size_t>(best)] = true;
    }
    auto b = static_cast<std::size_t>(best);
    last[b] = ix[k];
    last_pos[b] = k;
    ++count[b];
    lane_of[k] = static_cast<std::uint8_t>(b);
  }
  if (lanes != 2) return false;
  for (std::size_t l = 0; l < 2; ++l)
    if (count[l] < 2 || !rose[l]) return false;
  auto inside = [&](std::size_t lane, std::size_t other) {
    for (std::size_t k = first_pos[other] + 1; k < last_pos[other]; ++k)
      if (lane_of[k] == lane) return true;
    return false;
  };
  return inside(0, 1) && inside(1, 0);
}

SliceCode code_for(std::span<const AccessEntry> entries, ShapeTag tag) {
  SliceCode c;
  c.shape = std::move(tag);
  c.mode = mode_of_slice(entries);
  std::uint32_t threads = 0;
  std::vector<std::uint32_t> seen;
  for (const auto& e : entries) {
    if (std::find(seen.begin(), seen.end(), e.thread) == seen.end()) {
      seen.push_back(e.thread);
      ++threads;
    }
  }
  c.thread_count = threads;
  c.len = entries.size();
  return c;
}

}  // namespace

std::span<const ShapeKind> shape_precedence(ShapeRound round) noexcept {
  if (round == ShapeRound::Round1) return kRound1;
  return kRound2;
}

bool shape_in_round(ShapeKind kind, ShapeRound round) noexcept {
  auto order = shape_precedence(round);
  return std::find(order.begin(), order.end(), kind) != order.end();
}

std::optional<ShapeTag> detect_shape(Indices ix, ShapeKind kind, const ShapeOptions& options) {
  if (ix.empty()) return std::nullopt;
  auto tag_if = [&](bool ok) -> std::optional<ShapeTag> {
    if (ok) return ShapeTag::of(kind);
    return std::nullopt;
  };
  switch (kind) {
    case ShapeKind::Constant:
      return tag_if(is_constant(ix));
    case ShapeKind::LinearInc:
    case ShapeKind::LinearDec: {
      auto s = linear_step(ix, kind == ShapeKind::LinearInc ? 1 : -1);
      if (!s) return std::nullopt;
      return ShapeTag::linear(kind, *s);
    }
    case ShapeKind::RepStepInc:
      return tag_if(is_rep_step(ix, 1));
    case ShapeKind::RepStepDec:
      return tag_if(is_rep_step(ix, -1));
    case ShapeKind::VarStepInc:
      return tag_if(is_var_step(ix, 1));
    case ShapeKind::VarStepDec:
      return tag_if(is_var_step(ix, -1));
    case ShapeKind::Fringes:
      return tag_if(is_fringe(ix, options.fringes_max_distinct));
    case ShapeKind::Peaks:
      return tag_if(is_peak(ix));
    case ShapeKind::Saws:
      return tag_if(is_saw(ix));
    case ShapeKind::ParallelTrav:
      return tag_if(is_parallel(ix));
    case ShapeKind::LinRepUpDown:
      return tag_if(is_lin_rep_up_down(ix));
    case ShapeKind::Unidentified:
      return tag_if(classify_indices(ix, ShapeRound::Round2, options).kind ==
                    ShapeKind::Unidentified);
  }
  return std::nullopt;
}

bool match_shape(std::span<const AccessEntry> entries, const ShapeTag& tag,
                 const ShapeOptions& options) {
  std::vector<std::int64_t> ix;
  ix.reserve(entries.size());
  for (const auto& e : entries) ix.push_back(e.index);
  auto found = detect_shape(ix, tag.kind, options);
  if (!found) return false;
  return !tag.step || found->step == tag.step;
}

ShapeTag classify_indices(Indices ix, ShapeRound round, const ShapeOptions& options) {
  for (ShapeKind k : shape_precedence(round))
    if (auto tag = detect_shape(ix, k, options)) return *tag;
  return ShapeTag::of(ShapeKind::Unidentified);
}

ShapeTag classify_whole(const AccessPattern& pattern, ShapeRound round,
                        const ShapeOptions& options) {
  auto ix = pattern.indices();
  return classify_indices(ix, round, options);
}

SplitResult split_slices(Indices ix) {
  SplitResult out;
  for (std::int64_t split : {std::int64_t{0}, std::int64_t{1}}) {
    if (std::count(ix.begin(), ix.end(), split) < 2) continue;
    out.split_index = split;
    std::size_t start = 0;
    for (std::size_t k = 1; k < ix.size(); ++k) {
      if (ix[k] == split) {
        out.ranges.push_back({start, k - start});
        start = k;
      }
    }
    out.ranges.push_back({start, ix.size() - start});
    return out;
  }
  if (!ix.empty()) out.ranges.push_back({0, ix.size()});
  return out;
}

SplitResult split_slices(const AccessPattern& pattern) {
  auto ix = pattern.indices();
  return split_slices(ix);
}

SequenceEncoding sequence(const AccessPattern& pattern, const SequencerOptions& options) {
  if (pattern.empty()) throw ContractError("sequence: empty pattern");
  const auto ix = pattern.indices();
  const std::span<const AccessEntry> entries(pattern.entries);

  SequenceEncoding enc;
  enc.min_index = *std::min_element(ix.begin(), ix.end());
  auto finish = [&](SequenceEncoding& e) -> SequenceEncoding& {
    e.coverage = coverage_of(e.slices);
    return e;
  };

  ShapeTag whole = classify_indices(ix, ShapeRound::Round1, options.shapes);
  if (whole.kind != ShapeKind::Unidentified) {
    enc.slices.push_back(code_for(entries, whole));
    return finish(enc);
  }
  SplitResult split = split_slices(std::span<const std::int64_t>(ix));
  for (const auto& r : split.ranges) {
    auto sub = std::span<const std::int64_t>(ix).subspan(r.start, r.len);
    enc.slices.push_back(code_for(entries.subspan(r.start, r.len),
                                  classify_indices(sub, ShapeRound::Round1, options.shapes)));
  }
  finish(enc);
  if (options.round == ShapeRound::Round1 || enc.coverage == Coverage::Full) return enc;

  if (enc.coverage == Coverage::None) {
    whole = classify_indices(ix, ShapeRound::Round2, options.shapes);
    if (whole.kind != ShapeKind::Unidentified) {
      enc.slices.assign(1, code_for(entries, whole));
      return finish(enc);
    }
  }
  for (std::size_t s = 0; s < split.ranges.size(); ++s) {
    if (enc.slices[s].shape.kind != ShapeKind::Unidentified) continue;
    const auto& r = split.ranges[s];
    auto sub = std::span<const std::int64_t>(ix).subspan(r.start, r.len);
    enc.slices[s].shape = classify_indices(sub, ShapeRound::Round2, options.shapes);
  }
  return finish(enc);
}

std::vector<Slice> slice_positions(const SequenceEncoding& encoding) {
  std::vector<Slice> out;
  out.reserve(encoding.slices.size());
  std::size_t pos = 0;
  for (const auto& c : encoding.slices) {
    out.push_back({pos, static_cast<std::size_t>(c.len), c});
    pos += c.len;
  }
  return out;
}

std::string render(const SequenceEncoding& encoding, LengthField field) {
  const std::uint64_t total = encoding.total_len();
  std::string s = std::to_string(encoding.min_index);
  s += ": |";
  for (const auto& c : encoding.slices) {
    s += c.shape.text();
    s += ' ';
    s += slice_mode_text(c.mode);
    s += ' ';
    s += std::to_string(c.thread_count);
    s += ' ';
    s += std::to_string(field == LengthField::Pattern ? total : c.len);
    s += '|';
  }
  return s;
}

std::optional<SequenceEncoding> try_parse_encoding(std::string_view text, std::string* error) {
  auto fail = [&](std::string msg) -> std::optional<SequenceEncoding> {
    if (error != nullptr) *error = std::move(msg);
    return std::nullopt;
  };
  auto colon = text.find(": |");
  if (colon == std::string_view::npos) return fail("missing '<min>: |' prefix");
  SequenceEncoding enc;
  std::string_view min_text = text.substr(0, colon);
  auto [mp, mec] = std::from_chars(min_text.data(), min_text.data() + min_text.size(), enc.min_index);
  if (mec != std::errc() || mp != min_text.data() + min_text.size() || min_text.empty())
    return fail("bad minimum index '" + std::string(min_text) + "'");
  std::string_view body = text.substr(colon + 3);
  if (body.empty() || body.back() != '|') return fail("encoding must end with '|'");
  body.remove_suffix(1);
  if (body.empty()) return fail("encoding has no slices");
  while (true) {
    auto bar = body.find('|');
    std::string_view field = body.substr(0, bar);
    std::array<std::string_view, 4> parts;
    std::size_t n = 0;
    std::size_t pos = 0;
    while (pos <= field.size() && n < 5) {
      auto sp = field.find(' ', pos);
      std::string_view tok = field.substr(pos, sp == std::string_view::npos ? sp : sp - pos);
      if (n < 4) parts[n] = tok;
      ++n;
      if (sp == std::string_view::npos) break;
      pos = sp + 1;
    }
    if (n != 4) return fail("slice '" + std::string(field) + "' must have 4 fields");
    SliceCode c;
    auto tag = ShapeTag::parse_text(parts[0]);
    if (!tag) return fail("unknown shape tag '" + std::string(parts[0]) + "'");
    c.shape = *tag;
    auto mode = parse_slice_mode(parts[1]);
    if (!mode) return fail("bad slice mode '" + std::string(parts[1]) + "'");
    c.mode = *mode;
    auto num = [](std::string_view t, auto& out) {
      if (t.empty() || t.front() == '0') return false;
      auto [p, ec] = std::from_chars(t.data(), t.data() + t.size(), out);
      return ec == std::errc() && p == t.data() + t.size();
    };
    if (!num(parts[2], c.thread_count)) return fail("bad thread count '" + std::string(parts[2]) + "'");
    if (!num(parts[3], c.len)) return fail("bad slice length '" + std::string(parts[3]) + "'");
    enc.slices.push_back(c);
    if (bar == std::string_view::npos) break;
    body = body.substr(bar + 1);
  }
  enc.coverage = coverage_of(enc.slices);
  return enc;
}

SequenceEncoding parse_encoding(std::string_view text) {
  std::string error;
  if (auto enc = try_parse_encoding(text, &error)) return std::move(*enc);
  throw ValidationError("malformed encoding '" + std::string(text) + "': " + error);
}

void ShapeShares::add(const SequenceEncoding& encoding, std::uint64_t member_count) {
  for (const auto& c : encoding.slices) {
    accesses[static_cast<std::size_t>(c.shape.kind)] += c.len * member_count;
    total += c.len * member_count;
  }
}

void ShapeShares::merge(const ShapeShares& other) {
  for (std::size_t i = 0; i < accesses.size(); ++i) accesses[i] += other.accesses[i];
  total += other.total;
}

double ShapeShares::fraction(ShapeKind kind) const noexcept {
  if (total == 0) return 0.0;
  return static_cast<double>(accesses[static_cast<std::size_t>(kind)]) /
         static_cast<double>(total);
}

std::uint64_t ShapeShares::identified() const noexcept {
  return total - accesses[static_cast<std::size_t>(ShapeKind::Unidentified)];
}

ShapeShares access_shares(std::span<const SequencedGroup> groups) {
  ShapeShares s;
  for (const auto& g : groups) s.add(g.encoding, g.member_count);
  return s;
}

}  // namespace arraytrace
