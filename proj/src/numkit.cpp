#include "dagd/numkit.hpp"

#include <cmath>
#include <numbers>
#include <string>

namespace dagd {

namespace {

void require_same_len(const Vec& a, const Vec& b, const char* op) {
  if (a.size() != b.size()) {
    throw ShapeError(std::string(op) + ": length " + std::to_string(a.size()) + " vs " +
                     std::to_string(b.size()));
  }
}

}  // namespace

Vec& Vec::operator+=(const Vec& other) {
  require_same_len(*this, other, "vector add");
  for (std::size_t i = 0; i < v_.size(); ++i) v_[i] += other.v_[i];
  return *this;
}

Vec& Vec::operator-=(const Vec& other) {
  require_same_len(*this, other, "vector subtract");
  for (std::size_t i = 0; i < v_.size(); ++i) v_[i] -= other.v_[i];
  return *this;
}

Vec& Vec::operator*=(double s) noexcept {
  for (auto& x : v_) x *= s;
  return *this;
}

bool Vec::all_finite() const noexcept {
  for (double x : v_)
    if (!std::isfinite(x)) return false;
  return true;
}

Vec operator+(Vec a, const Vec& b) { return a += b; }
Vec operator-(Vec a, const Vec& b) { return a -= b; }
Vec operator*(double s, Vec v) { return v *= s; }

Mat::Mat(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), a_(rows * cols, fill) {}

Mat::Mat(std::size_t rows, std::size_t cols, std::vector<double> row_major)
    : rows_(rows), cols_(cols), a_(std::move(row_major)) {
  if (a_.size() != rows_ * cols_) {
    throw ShapeError("matrix: " + std::to_string(a_.size()) + " entries for " +
                     std::to_string(rows_) + "x" + std::to_string(cols_));
  }
}

Mat::Mat(std::initializer_list<std::initializer_list<double>> rows) {
  rows_ = rows.size();
  cols_ = rows_ == 0 ? 0 : rows.begin()->size();
  a_.reserve(rows_ * cols_);
  for (const auto& r : rows) {
    if (r.size() != cols_) throw ShapeError("matrix: ragged initializer");
    a_.insert(a_.end(), r.begin(), r.end());
  }
}

Mat& Mat::operator+=(const Mat& other) {
  if (rows_ != other.rows_ || cols_ != other.cols_) {
    throw ShapeError("matrix add: " + std::to_string(rows_) + "x" + std::to_string(cols_) +
                     " vs " + std::to_string(other.rows_) + "x" + std::to_string(other.cols_));
  }
  for (std::size_t i = 0; i < a_.size(); ++i) a_[i] += other.a_[i];
  return *this;
}

bool Mat::all_finite() const noexcept {
  for (double x : a_)
    if (!std::isfinite(x)) return false;
  return true;
}

Mat operator+(Mat a, const Mat& b) { return a += b; }

Mat transpose(const Mat& a) {
  Mat t(a.cols(), a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) t(j, i) = a(i, j);
  return t;
}

Vec matvec(const Mat& a, const Vec& v) {
  if (a.cols() != v.size()) {
    throw ShapeError("matvec: matrix has " + std::to_string(a.cols()) + " cols, vector has " +
                     std::to_string(v.size()) + " entries");
  }
  Vec out(a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    double s = 0.0;
    const auto r = a.row(i);
    for (std::size_t j = 0; j < r.size(); ++j) s += r[j] * v[j];
    out[i] = s;
  }
  return out;
}

Vec matvec_t(const Mat& a, const Vec& v) {
  if (a.rows() != v.size()) {
    throw ShapeError("matvec_t: matrix has " + std::to_string(a.rows()) + " rows, vector has " +
                     std::to_string(v.size()) + " entries");
  }
  Vec out(a.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    const auto r = a.row(i);
    const double vi = v[i];
    for (std::size_t j = 0; j < r.size(); ++j) out[j] += r[j] * vi;
  }
  return out;
}

double dot(const Vec& a, const Vec& b) {
  require_same_len(a, b, "dot");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double sq_norm(const Vec& v) noexcept {
  double s = 0.0;
  for (double x : v) s += x * x;
  return s;
}

double norm(const Vec& v) noexcept { return std::sqrt(sq_norm(v)); }

// ---------------------------------------------------------------------------

std::array<std::uint32_t, 4> philox4x32_10(std::array<std::uint32_t, 4> ctr,
                                           std::array<std::uint32_t, 2> key) noexcept {
  constexpr std::uint32_t kMul0 = 0xD2511F53u;
  constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
  constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
  constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

  for (int round = 0; round < 10; ++round) {
    if (round > 0) {
      key[0] += kWeyl0;
      key[1] += kWeyl1;
    }
    const std::uint64_t p0 = static_cast<std::uint64_t>(kMul0) * ctr[0];
    const std::uint64_t p1 = static_cast<std::uint64_t>(kMul1) * ctr[2];
    const auto hi0 = static_cast<std::uint32_t>(p0 >> 32);
    const auto lo0 = static_cast<std::uint32_t>(p0);
    const auto hi1 = static_cast<std::uint32_t>(p1 >> 32);
    const auto lo1 = static_cast<std::uint32_t>(p1);
    ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
  }
  return ctr;
}

std::uint64_t derive_stream(std::initializer_list<std::uint64_t> words) noexcept {
  std::uint64_t h = 0x6a09e667f3bcc909ull;
  for (std::uint64_t w : words) {
    h += w + 0x9e3779b97f4a7c15ull;
    std::uint64_t z = h;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    h = z ^ (z >> 31);
  }
  return h;
}

double GaussSource::to_unit(std::uint64_t bits) noexcept {
  return (static_cast<double>(bits >> 12) + 0.5) * 0x1.0p-52;
}

namespace {

struct NormalPair {
  double c;
  double s;
};

NormalPair box_muller(std::uint64_t seed, std::uint64_t stream, std::uint64_t pair) noexcept {
  const auto out = philox4x32_10(
      {static_cast<std::uint32_t>(pair), static_cast<std::uint32_t>(pair >> 32),
       static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)},
      {static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)});
  const std::uint64_t b1 = (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
  const std::uint64_t b2 = (static_cast<std::uint64_t>(out[2]) << 32) | out[3];
  const double u1 = GaussSource::to_unit(b1);
  const double u2 = GaussSource::to_unit(b2);
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double theta = 2.0 * std::numbers::pi * u2;
  return {r * std::cos(theta), r * std::sin(theta)};
}

}  // namespace

double GaussSource::operator()(std::uint64_t index) const noexcept {
  const auto p = box_muller(seed_, stream_, index >> 1);
  return (index & 1u) ? p.s : p.c;
}

void GaussSource::fill(std::span<double> out, std::uint64_t first) const noexcept {
  std::size_t i = 0;
  std::uint64_t idx = first;
  if (!out.empty() && (idx & 1u)) {
    out[i++] = (*this)(idx++);
  }
  for (; i + 1 < out.size(); i += 2, idx += 2) {
    const auto p = box_muller(seed_, stream_, idx >> 1);
    out[i] = p.c;
    out[i + 1] = p.s;
  }
  if (i < out.size()) out[i] = (*this)(idx);
}

Mat gauss_mat(const GaussSource& src, std::size_t rows, std::size_t cols, double sd) {
  if (!(sd >= 0.0)) throw ParameterError("gauss_mat: sd must be >= 0, got " + std::to_string(sd));
  Mat m(rows, cols);
  if (sd == 0.0) return m;
  auto e = m.entries();
  src.fill(e, 0);
  for (auto& x : e) x *= sd;
  return m;
}

}  // namespace dagd
