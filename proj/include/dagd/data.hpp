#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "dagd/numkit.hpp"

namespace dagd {

/// Original data (X, y): n samples, m features.
struct Dataset {
  Mat X;
  Vec y;

  Dataset() = default;
  Dataset(Mat x, Vec y_);

  std::size_t n() const noexcept { return X.rows(); }
  std::size_t m() const noexcept { return X.cols(); }

  /// Column names, when ingested from CSV; empty otherwise.
  std::vector<std::string> feature_names;
};

/// y_i = x_{i,1} - x_{i,2} + eps_i, x ~ N(0, sigma_x²), eps ~ N(0, sigma²).
struct SyntheticSpec {
  std::size_t n = 20;
  std::size_t m = 15;
  double sigma_x = 0.5;
  double sigma = 0.2;
  std::uint64_t seed = 1;
};

Dataset gen_synthetic(const SyntheticSpec& spec);

/// Reads a header + numeric-body CSV; `target` names the output column,
/// every other column becomes a feature in file order.
Dataset load_csv(const std::filesystem::path& path, std::string_view target);

/// Per-column zero mean, unit population (divide-by-n) standard deviation.
/// y is left untouched.
Dataset standardize(const Dataset& d);

// ---------------------------------------------------------------------------
// Augmentation

enum class NoiseMode { none, online, offline };

std::string_view to_string(NoiseMode mode) noexcept;

struct AugmentationSpec {
  std::size_t K = 0;
  double tau = 0.0;
  NoiseMode mode = NoiseMode::none;
  std::uint64_t seed = 0;

  std::size_t effective_K() const noexcept { return mode == NoiseMode::none ? 0 : K; }
};

/// Noise matrices U_{t,k}, entries N(0, tau²/n). U_{t,0} is the zero matrix.
///
/// Off-line banks hold U_1..U_K drawn once; the epoch argument is ignored.
/// On-line banks derive U_{t,k} on request from a stream id keyed by (t,k),
/// so the same (t,k) always yields the same matrix and distinct epochs are
/// independent draws.
class NoiseBank {
 public:
  NoiseBank(std::size_t n, std::size_t m, const AugmentationSpec& spec);

  std::size_t K() const noexcept { return K_; }
  NoiseMode mode() const noexcept { return spec_.mode; }
  double tau() const noexcept { return spec_.tau; }
  double element_sd() const noexcept { return sd_; }
  std::size_t rows() const noexcept { return n_; }
  std::size_t cols() const noexcept { return m_; }

  Mat noise(std::uint64_t t, std::size_t k) const;

  /// Bank returning -U_{t,k} for every request (antithetic partner).
  NoiseBank negated() const {
    NoiseBank b = *this;
    b.sign_ = -sign_;
    return b;
  }

  /// Same bank with a different seed, used for independent MC replicates.
  NoiseBank reseeded(std::uint64_t seed) const { return NoiseBank(n_, m_, with_seed(seed)); }

 private:
  AugmentationSpec with_seed(std::uint64_t seed) const {
    auto s = spec_;
    s.seed = seed;
    return s;
  }

  std::size_t n_;
  std::size_t m_;
  AugmentationSpec spec_;
  std::size_t K_;
  double sd_;
  std::vector<Mat> offline_;
  double sign_ = 1.0;
};

NoiseBank make_noise_bank(const Dataset& d, const AugmentationSpec& a);

// ---------------------------------------------------------------------------
// Mini-batches

using IndexSet = std::vector<std::size_t>;

/// Contiguous fixed-order blocks B_1..B_Q of size rho (0-based indices).
struct BatchPartition {
  std::size_t rho = 0;
  std::size_t Q = 0;
  std::vector<IndexSet> blocks;
};

BatchPartition partition(std::size_t n, std::size_t rho);

/// (X[block], y[block]) with rows in the order given by `block`.
std::pair<Mat, Vec> slice(const Dataset& d, const IndexSet& block);

}  // namespace dagd
