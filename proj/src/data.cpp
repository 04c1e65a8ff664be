#include "dagd/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace dagd {

namespace {

// Stream tags; fixed forever so that seeds stay meaningful across versions.
constexpr std::uint64_t kTagSynthX = 0x53594e5458ull;    // "SYNTX"
constexpr std::uint64_t kTagSynthEps = 0x53594e5445ull;  // "SYNTE"
constexpr std::uint64_t kTagOnline = 0x4f4e4c494e45ull;  // "ONLINE"
constexpr std::uint64_t kTagOffline = 0x4f46464c4eull;   // "OFFLN"

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split_commas(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const auto pos = line.find(',', start);
    out.push_back(trim(line.substr(start, pos == std::string_view::npos ? pos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

}  // namespace

Dataset::Dataset(Mat x, Vec y_) : X(std::move(x)), y(std::move(y_)) {
  if (X.rows() != y.size()) {
    throw ShapeError("dataset: X has " + std::to_string(X.rows()) + " rows but y has " +
                     std::to_string(y.size()) + " entries");
  }
  if (X.rows() == 0 || X.cols() == 0) throw ShapeError("dataset: need n >= 1 and m >= 1");
}

Dataset gen_synthetic(const SyntheticSpec& spec) {
  if (spec.m < 2) throw ParameterError("gen_synthetic: m must be >= 2, got " + std::to_string(spec.m));
  if (spec.n < 1) throw ParameterError("gen_synthetic: n must be >= 1");
  if (!(spec.sigma_x > 0.0)) throw ParameterError("gen_synthetic: sigma_x must be > 0");
  if (!(spec.sigma >= 0.0)) throw ParameterError("gen_synthetic: sigma must be >= 0");

  Mat X = gauss_mat(GaussSource(spec.seed, derive_stream({kTagSynthX})), spec.n, spec.m, spec.sigma_x);
  Vec y(spec.n);
  const GaussSource eps(spec.seed, derive_stream({kTagSynthEps}));
  for (std::size_t i = 0; i < spec.n; ++i) {
    y[i] = X(i, 0) - X(i, 1);
    if (spec.sigma > 0.0) y[i] += spec.sigma * eps(i);
  }
  return Dataset(std::move(X), std::move(y));
}

Dataset load_csv(const std::filesystem::path& path, std::string_view target) {
  std::ifstream in(path);
  if (!in) {
    throw IngestError(IngestError::Kind::missing_file, "cannot open CSV file '" + path.string() + "'");
  }
  std::string line;
  if (!std::getline(in, line) || trim(line).empty()) {
    throw IngestError(IngestError::Kind::empty_data, "CSV file '" + path.string() + "' has no header", 1);
  }
  std::vector<std::string> header;
  for (auto h : split_commas(line)) header.emplace_back(h);

  const auto it = std::find(header.begin(), header.end(), target);
  if (it == header.end()) {
    throw IngestError(IngestError::Kind::missing_column,
                      "target column '" + std::string(target) + "' not found in header of '" +
                          path.string() + "'",
                      1);
  }
  const std::size_t target_col = static_cast<std::size_t>(it - header.begin());
  const std::size_t width = header.size();
  if (width < 2) {
    throw IngestError(IngestError::Kind::missing_column, "CSV needs at least one feature column", 1);
  }

  std::vector<double> xs;
  std::vector<double> ys;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (trim(line).empty()) continue;
    const auto cells = split_commas(line);
    if (cells.size() != width) {
      throw IngestError(IngestError::Kind::ragged_row,
                        "row " + std::to_string(row) + " has " + std::to_string(cells.size()) +
                            " cells, header has " + std::to_string(width),
                        row);
    }
    for (std::size_t c = 0; c < width; ++c) {
      double v = 0.0;
      const auto cell = cells[c];
      const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
      if (cell.empty() || ec != std::errc() || ptr != cell.data() + cell.size() || !std::isfinite(v)) {
        throw IngestError(IngestError::Kind::non_numeric,
                          "non-numeric cell '" + std::string(cell) + "' at row " + std::to_string(row) +
                              ", column " + std::to_string(c + 1) + " ('" + header[c] + "')",
                          row, c + 1);
      }
      if (c == target_col) {
        ys.push_back(v);
      } else {
        xs.push_back(v);
      }
    }
  }
  if (ys.empty()) {
    throw IngestError(IngestError::Kind::empty_data, "CSV file '" + path.string() + "' has no data rows");
  }
  const std::size_t n = ys.size();
  Dataset d(Mat(n, width - 1, std::move(xs)), Vec(std::move(ys)));
  for (std::size_t c = 0; c < width; ++c)
    if (c != target_col) d.feature_names.push_back(header[c]);
  return d;
}

Dataset standardize(const Dataset& d) {
  const std::size_t n = d.n();
  Mat X = d.X;
  for (std::size_t j = 0; j < d.m(); ++j) {
    double mean = 0.0;
    for (std::size_t i = 0; i < n; ++i) mean += X(i, j);
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t i = 0; i < n; ++i) var += (X(i, j) - mean) * (X(i, j) - mean);
    var /= static_cast<double>(n);
    if (!(var > 0.0)) {
      const std::string name = j < d.feature_names.size() ? d.feature_names[j] : "#" + std::to_string(j + 1);
      throw IngestError(IngestError::Kind::constant_column, "column '" + name + "' is constant", 0, j + 1);
    }
    const double sd = std::sqrt(var);
    for (std::size_t i = 0; i < n; ++i) X(i, j) = (X(i, j) - mean) / sd;
  }
  Dataset out(std::move(X), d.y);
  out.feature_names = d.feature_names;
  return out;
}

// ---------------------------------------------------------------------------

std::string_view to_string(NoiseMode mode) noexcept {
  switch (mode) {
    case NoiseMode::none: return "none";
    case NoiseMode::online: return "on-line";
    case NoiseMode::offline: return "off-line";
  }
  return "?";
}

NoiseBank::NoiseBank(std::size_t n, std::size_t m, const AugmentationSpec& spec)
    : n_(n), m_(m), spec_(spec), K_(spec.effective_K()) {
  if (!(spec.tau >= 0.0)) throw ParameterError("augmentation: tau must be >= 0");
  if (n == 0) throw ParameterError("augmentation: n must be >= 1");
  sd_ = spec.tau / std::sqrt(static_cast<double>(n));
  if (spec_.mode == NoiseMode::offline) {
    offline_.reserve(K_);
    for (std::size_t k = 1; k <= K_; ++k) {
      offline_.push_back(gauss_mat(GaussSource(spec_.seed, derive_stream({kTagOffline, k})), n_, m_, sd_));
    }
  }
}

Mat NoiseBank::noise(std::uint64_t t, std::size_t k) const {
  if (k > K_) {
    throw ParameterError("noise bank: copy index " + std::to_string(k) + " exceeds K=" + std::to_string(K_));
  }
  if (k == 0) return Mat(n_, m_);
  Mat u = spec_.mode == NoiseMode::offline
              ? offline_[k - 1]
              : gauss_mat(GaussSource(spec_.seed, derive_stream({kTagOnline, t, k})), n_, m_, sd_);
  if (sign_ < 0.0)
    for (auto& x : u.entries()) x = -x;
  return u;
}

NoiseBank make_noise_bank(const Dataset& d, const AugmentationSpec& a) { return NoiseBank(d.n(), d.m(), a); }

// ---------------------------------------------------------------------------

BatchPartition partition(std::size_t n, std::size_t rho) {
  if (rho == 0 || n == 0 || n % rho != 0) {
    throw ParameterError("partition: batch size rho=" + std::to_string(rho) + " does not divide n=" +
                         std::to_string(n));
  }
  BatchPartition p;
  p.rho = rho;
  p.Q = n / rho;
  p.blocks.resize(p.Q);
  for (std::size_t q = 0; q < p.Q; ++q) {
    p.blocks[q].resize(rho);
    for (std::size_t i = 0; i < rho; ++i) p.blocks[q][i] = q * rho + i;
  }
  return p;
}

std::pair<Mat, Vec> slice(const Dataset& d, const IndexSet& block) {
  Mat X(block.size(), d.m());
  Vec y(block.size());
  for (std::size_t r = 0; r < block.size(); ++r) {
    const std::size_t i = block[r];
    if (i >= d.n()) {
      throw ShapeError("slice: index " + std::to_string(i) + " out of range for n=" + std::to_string(d.n()));
    }
    std::copy_n(d.X.row(i).begin(), d.m(), X.row(r).begin());
    y[r] = d.y[i];
  }
  return {std::move(X), std::move(y)};
}

}  // namespace dagd
