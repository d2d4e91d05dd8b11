// SPDX-License-Identifier: Apache-2.0
#pragma once

//
// Cubic sparsity schedule. The retained fraction p_t stays at 1 through a
// warm-up window, decays cubically through the middle phase, and holds at
// the final fraction p_T for the last final_steps steps:
//
//   p_t = 1                                           t < warmup_steps
//   p_t = p_T + (1 - p_T) * (1 - x)^3                 otherwise, with
//         x = (t - t_i) / (T - t_i - t_f)
//   p_t = p_T                                         t >= T - final_steps
//
// The default numerator (t - t_i) makes the curve continuous: x runs 0 -> 1
// across the middle phase, so p enters at exactly 1 and lands at exactly
// p_T. The opt-in literal_formula variant shifts the numerator to
// (t - t_i - t_f); it overshoots above 1 right after warm-up and jumps
// discontinuously where the final phase begins, and exists only so the
// shifted variant can be audited side by side.
//

#include <cstddef>
#include <string>

#include "losparse/errors.hpp"

namespace losparse {

struct PruneSchedule {
  std::size_t total_steps = 0;   // T
  std::size_t warmup_steps = 0;  // t_i
  std::size_t final_steps = 0;   // t_f
  double final_fraction = 1.0;   // p_T
  bool literal_formula = false;
};

inline void validate_schedule(const PruneSchedule& s) {
  if (s.total_steps == 0) {
    throw RangeError("schedule: total_steps must be positive");
  }
  if (s.warmup_steps + s.final_steps >= s.total_steps) {
    throw RangeError("schedule: warmup_steps + final_steps (" +
                     std::to_string(s.warmup_steps + s.final_steps) +
                     ") must be below total_steps (" +
                     std::to_string(s.total_steps) + ")");
  }
  if (!(s.final_fraction >= 0.0) || s.final_fraction > 1.0) {
    throw RangeError("schedule: final_fraction must lie in [0, 1], got " +
                     std::to_string(s.final_fraction));
  }
}

inline double remaining_fraction(const PruneSchedule& s, std::size_t t) {
  validate_schedule(s);
  if (t > s.total_steps) {
    throw RangeError("remaining_fraction: step " + std::to_string(t) +
                     " beyond total_steps " + std::to_string(s.total_steps));
  }
  if (t < s.warmup_steps) return 1.0;
  if (t >= s.total_steps - s.final_steps) return s.final_fraction;
  const double span =
      static_cast<double>(s.total_steps - s.warmup_steps - s.final_steps);
  const double shift = s.literal_formula
                           ? static_cast<double>(t) -
                                 static_cast<double>(s.warmup_steps) -
                                 static_cast<double>(s.final_steps)
                           : static_cast<double>(t) -
                                 static_cast<double>(s.warmup_steps);
  const double x = 1.0 - shift / span;
  return s.final_fraction + (1.0 - s.final_fraction) * x * x * x;
}

}  // namespace losparse
