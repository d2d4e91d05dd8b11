// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <atomic>
#include <cmath>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <system_error>
#include <vector>

#include <unistd.h>

#include "losparse/matrix.hpp"
#include "losparse/rng.hpp"

namespace testutil {

// Fresh directory under the system temp root, removed on scope exit.
struct TempDir {
  std::filesystem::path path;

  TempDir() {
    static std::atomic<unsigned> counter{0};
    path = std::filesystem::temp_directory_path() /
           ("losparse_test_" + std::to_string(::getpid()) + "_" +
            std::to_string(counter++));
    std::filesystem::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  std::filesystem::path operator/(const std::string& name) const {
    return path / name;
  }
};

inline std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

inline void write_file(const std::filesystem::path& p, const std::string& s) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out << s;
}

inline std::vector<std::string> read_lines(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) lines.push_back(line);
  return lines;
}

inline std::vector<std::string> split_row(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, ',')) fields.push_back(field);
  return fields;
}

inline losparse::DenseMatrix random_matrix(std::size_t rows, std::size_t cols,
                                           losparse::Rng& rng) {
  losparse::DenseMatrix m(rows, cols);
  for (std::size_t i = 0; i < m.size(); ++i) m.data()[i] = rng.gaussian();
  return m;
}

inline double max_abs_diff(const losparse::DenseMatrix& a,
                           const losparse::DenseMatrix& b) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = std::fabs(a.data()[i] - b.data()[i]);
    if (d > worst) worst = d;
  }
  return worst;
}

// Independent matrix product used as an oracle: explicit dot products with
// the summation index in the innermost position, a different accumulation
// order than the library routine uses.
inline losparse::DenseMatrix matmul_oracle(const losparse::DenseMatrix& a,
                                           const losparse::DenseMatrix& b) {
  losparse::DenseMatrix c(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t l = 0; l < b.cols(); ++l) {
      double acc = 0.0;
      for (std::size_t j = a.cols(); j-- > 0;) acc += a(i, j) * b(j, l);
      c(i, l) = acc;
    }
  }
  return c;
}

// Worst deviation of M^T M from the identity.
inline double gram_error(const losparse::DenseMatrix& m) {
  double worst = 0.0;
  for (std::size_t a = 0; a < m.cols(); ++a) {
    for (std::size_t b = 0; b < m.cols(); ++b) {
      double dot = 0.0;
      for (std::size_t i = 0; i < m.rows(); ++i) dot += m(i, a) * m(i, b);
      const double want = (a == b) ? 1.0 : 0.0;
      const double d = std::fabs(dot - want);
      if (d > worst) worst = d;
    }
  }
  return worst;
}

}  // namespace testutil
