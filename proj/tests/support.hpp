#pragma once

// Test-side fixtures and independent oracles. Random instances come from the
// standard library engine so they never share state with the library's
// generator.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>

#include <Eigen/Dense>

#include "dagd/data.hpp"
#include "dagd/numkit.hpp"

namespace dagd::test {

inline Mat random_mat(std::mt19937_64& rng, std::size_t rows, std::size_t cols, double sd = 1.0) {
  std::normal_distribution<double> nd(0.0, sd);
  Mat a(rows, cols);
  for (auto& x : a.entries()) x = nd(rng);
  return a;
}

inline Vec random_vec(std::mt19937_64& rng, std::size_t n, double sd = 1.0) {
  std::normal_distribution<double> nd(0.0, sd);
  Vec v(n);
  for (auto& x : v) x = nd(rng);
  return v;
}

inline Dataset random_dataset(std::mt19937_64& rng, std::size_t n, std::size_t m) {
  return Dataset(random_mat(rng, n, m), random_vec(rng, n));
}

inline Eigen::MatrixXd to_eigen(const Mat& a) {
  Eigen::MatrixXd e(a.rows(), a.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) e(i, j) = a(i, j);
  return e;
}

inline Eigen::VectorXd to_eigen(const Vec& v) {
  Eigen::VectorXd e(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) e(i) = v[i];
  return e;
}

inline Vec from_eigen(const Eigen::VectorXd& e) {
  Vec v(static_cast<std::size_t>(e.size()));
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = e(static_cast<Eigen::Index>(i));
  return v;
}

/// argmin ‖y - Xw‖² + lambda ‖w‖² via a QR solve of the normal equations.
inline Vec ridge_solution(const Dataset& d, double lambda) {
  const Eigen::MatrixXd X = to_eigen(d.X);
  const Eigen::MatrixXd A =
      X.transpose() * X + lambda * Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(d.m()), static_cast<Eigen::Index>(d.m()));
  return from_eigen(A.colPivHouseholderQr().solve(X.transpose() * to_eigen(d.y)));
}

inline double max_abs_diff(const Vec& a, const Vec& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

/// Scratch directory removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() / ("dagd-" + tag + "-" + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }

  std::filesystem::path write(const std::string& name, const std::string& contents) const {
    const auto p = path_ / name;
    std::ofstream(p) << contents;
    return p;
  }

 private:
  std::filesystem::path path_;
};

inline std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace dagd::test
