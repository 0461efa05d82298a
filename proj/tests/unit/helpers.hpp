#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>

#include <gtest/gtest.h>
#include <unistd.h>

#include "acfl/acfl.hpp"

namespace acfl::testing {

inline Matrix random_matrix(std::uint64_t seed, std::size_t rows, std::size_t cols,
                            double lo = -1.0, double hi = 1.0) {
  return uniform_matrix(RngStream(seed, "test-matrix"), rows, cols, lo, hi);
}

/// Random SPD matrix BᵀB + n·I.
inline Matrix random_spd(std::uint64_t seed, std::size_t n) {
  const Matrix b = random_matrix(seed, n + 2, n);
  return gram(b) + Matrix::identity(n, static_cast<double>(n));
}

inline void expect_matrix_near(const Matrix& a, const Matrix& b, double tol) {
  ASSERT_EQ(a.rows(), b.rows());
  ASSERT_EQ(a.cols(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j)
      EXPECT_NEAR(a(i, j), b(i, j), tol) << "entry (" << i << ", " << j << ")";
}

inline std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& name) {
    path_ = std::filesystem::temp_directory_path() /
            ("acfl-test-" + name + "-" + std::to_string(::getpid()));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

}  // namespace acfl::testing
