#pragma once

// Dense row-major matrix/vector arithmetic in double precision and a
// counter-based Gaussian source.

#include <array>
#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <string_view>
#include <vector>

#include "dagd/errors.hpp"

namespace dagd {

class Vec {
 public:
  Vec() = default;
  explicit Vec(std::size_t n, double fill = 0.0) : v_(n, fill) {}
  explicit Vec(std::vector<double> values) : v_(std::move(values)) {}
  Vec(std::initializer_list<double> values) : v_(values) {}

  std::size_t size() const noexcept { return v_.size(); }
  bool empty() const noexcept { return v_.empty(); }

  double& operator[](std::size_t i) noexcept { return v_[i]; }
  double operator[](std::size_t i) const noexcept { return v_[i]; }

  std::span<double> span() noexcept { return v_; }
  std::span<const double> span() const noexcept { return v_; }
  const std::vector<double>& values() const noexcept { return v_; }

  auto begin() noexcept { return v_.begin(); }
  auto end() noexcept { return v_.end(); }
  auto begin() const noexcept { return v_.begin(); }
  auto end() const noexcept { return v_.end(); }

  Vec& operator+=(const Vec& other);
  Vec& operator-=(const Vec& other);
  Vec& operator*=(double s) noexcept;

  bool all_finite() const noexcept;

  friend bool operator==(const Vec&, const Vec&) = default;

 private:
  std::vector<double> v_;
};

Vec operator+(Vec a, const Vec& b);
Vec operator-(Vec a, const Vec& b);
Vec operator*(double s, Vec v);

class Mat {
 public:
  Mat() = default;
  Mat(std::size_t rows, std::size_t cols, double fill = 0.0);
  Mat(std::size_t rows, std::size_t cols, std::vector<double> row_major);
  Mat(std::initializer_list<std::initializer_list<double>> rows);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }

  double& operator()(std::size_t i, std::size_t j) noexcept { return a_[i * cols_ + j]; }
  double operator()(std::size_t i, std::size_t j) const noexcept { return a_[i * cols_ + j]; }

  std::span<double> row(std::size_t i) noexcept { return {a_.data() + i * cols_, cols_}; }
  std::span<const double> row(std::size_t i) const noexcept { return {a_.data() + i * cols_, cols_}; }

  std::span<const double> entries() const noexcept { return a_; }
  std::span<double> entries() noexcept { return a_; }

  Mat& operator+=(const Mat& other);

  bool all_finite() const noexcept;

  friend bool operator==(const Mat&, const Mat&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> a_;
};

Mat operator+(Mat a, const Mat& b);
Mat transpose(const Mat& a);

/// A·v.
Vec matvec(const Mat& a, const Vec& v);
/// Aᵀ·v without forming the transpose.
Vec matvec_t(const Mat& a, const Vec& v);
double dot(const Vec& a, const Vec& b);
double sq_norm(const Vec& v) noexcept;
double norm(const Vec& v) noexcept;

// ---------------------------------------------------------------------------
// Random numbers

/// Philox4x32 with 10 rounds (Salmon et al., SC'11). Pure function of the
/// counter and key.
std::array<std::uint32_t, 4> philox4x32_10(std::array<std::uint32_t, 4> ctr,
                                           std::array<std::uint32_t, 2> key) noexcept;

/// Identity string of the uniform generator and normal transform. Written to
/// every run manifest.
inline constexpr std::string_view kRngIdentity =
    "philox4x32-10;key=seed;ctr=(pair_lo,pair_hi,stream_lo,stream_hi);"
    "u=((bits64>>12)+0.5)*2^-52;box-muller(cos,sin)";

/// Mixes a sequence of words into a 64-bit stream id (splitmix64 chain).
std::uint64_t derive_stream(std::initializer_list<std::uint64_t> words) noexcept;

/// Standard normal draws addressed by (seed, stream, index).
///
/// Draw `index` lives in Philox block `index / 2`: the block's four output
/// words form two 64-bit integers (w0<<32|w1, w2<<32|w3), mapped to uniforms
/// u1, u2 in (0,1). Box-Muller gives r = sqrt(-2 ln u1); even indices take
/// r·cos(2π u2), odd indices r·sin(2π u2).
class GaussSource {
 public:
  constexpr GaussSource(std::uint64_t seed, std::uint64_t stream) noexcept
      : seed_(seed), stream_(stream) {}

  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t stream() const noexcept { return stream_; }

  double operator()(std::uint64_t index) const noexcept;

  /// Writes draws first, first+1, ... into out.
  void fill(std::span<double> out, std::uint64_t first = 0) const noexcept;

  /// Uniform in (0,1) for the given 64-bit counter; exposed for testing.
  static double to_unit(std::uint64_t bits) noexcept;

 private:
  std::uint64_t seed_;
  std::uint64_t stream_;
};

/// rows×cols matrix of N(0, sd²) draws, row-major, indices 0..rows·cols-1.
Mat gauss_mat(const GaussSource& src, std::size_t rows, std::size_t cols, double sd);

}  // namespace dagd
