#pragma once

// Oracle dispatch by shape kind, and exhaustive enumeration of short index
// sequences.

#include <functional>

#include "arraytrace/trace_model.hpp"
#include "oracles/oracles.hpp"

namespace oracle {

// ParallelTrav has no exact oracle (parallel_exists is only a bound) and
// Unidentified is no predicate; both report false.
inline bool holds(const Seq& x, arraytrace::ShapeKind k) {
  using arraytrace::ShapeKind;
  switch (k) {
    case ShapeKind::Constant:
      return constant(x);
    case ShapeKind::LinearInc:
      return linear(x, 1).has_value();
    case ShapeKind::LinearDec:
      return linear(x, -1).has_value();
    case ShapeKind::RepStepInc:
      return rep_step(x, 1);
    case ShapeKind::RepStepDec:
      return rep_step(x, -1);
    case ShapeKind::VarStepInc:
      return var_step(x, 1);
    case ShapeKind::VarStepDec:
      return var_step(x, -1);
    case ShapeKind::LinRepUpDown:
      return lin_rep_up_down(x);
    case ShapeKind::Peaks:
      return peaks(x);
    case ShapeKind::Saws:
      return saws(x);
    case ShapeKind::Fringes:
      return fringes(x);
    case ShapeKind::ParallelTrav:
    case ShapeKind::Unidentified:
      break;
  }
  return false;
}

// Calls fn on every non-empty sequence of length <= max_len over {0..alphabet-1}.
inline void for_each_sequence(std::size_t max_len, std::int64_t alphabet, const std::function<void(const Seq&)>& fn) {
  Seq x;
  std::function<void()> rec = [&] {
    if (!x.empty()) fn(x);
    if (x.size() == max_len) return;
    for (std::int64_t v = 0; v < alphabet; ++v) {
      x.push_back(v);
      rec();
      x.pop_back();
    }
  };
  rec();
}

}  // namespace oracle
