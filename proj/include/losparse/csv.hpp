// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdio>
#include <string>

namespace losparse {

// Shortest round-trippable decimal form: re-parsing gives the same double,
// and identical values always format to identical bytes, which the
// reproducibility checks on emitted CSV files rely on.
inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace losparse
