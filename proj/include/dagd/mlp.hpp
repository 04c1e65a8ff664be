#pragma once

// Fully-connected regression network: affine + activation on hidden layers,
// linear scalar output, trained by plain SGD on MSE with manual backprop.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "dagd/data.hpp"
#include "dagd/numkit.hpp"

namespace dagd {

enum class Activation { relu, identity };

struct MlpSpec {
  /// input, hidden..., 1
  std::vector<std::size_t> widths;
  Activation hidden = Activation::relu;
  std::uint64_t seed = 0;
};

/// W[l] maps layer l to layer l+1 and is widths[l+1] x widths[l].
struct MlpParams {
  std::vector<Mat> W;
  std::vector<Vec> b;
  Activation hidden = Activation::relu;

  std::size_t count() const noexcept;
  bool all_finite() const noexcept;
  double max_abs() const noexcept;
  /// this += scale * other
  void axpy(double scale, const MlpParams& other);
  /// Zero parameters of the same shapes.
  MlpParams zeros_like() const;
};

void validate(const MlpSpec& spec);

/// Weights N(0, 2 / fan_in), biases zero.
MlpParams init_params(const MlpSpec& spec);

double forward(const MlpParams& p, std::span<const double> x);

/// Gradient of (1/B) Σ_i (y_i - f(x_i))² over the rows of X.
MlpParams grad(const MlpParams& p, const Mat& X, const Vec& y);

/// (1/B) Σ_i (y_i - f(x_i))².
double batch_mse(const MlpParams& p, const Mat& X, const Vec& y);

struct SgdOptions {
  bool shuffle = false;
  std::uint64_t shuffle_seed = 0;
};

struct MlpRun {
  /// MSE over the training rows actually used (augmented data for DA),
  /// before training and after every epoch.
  std::vector<double> curve;
  MlpParams params;
};

/// Plain SGD over the augmented data (original rows first, then copies
/// k = 1..K), batches taken in fixed order. `batch` empty means full batch.
/// Only off-line (or no) augmentation is accepted.
MlpRun sgd_train(const Dataset& d, const MlpSpec& spec, const AugmentationSpec& aug, std::optional<std::size_t> batch,
                 double eta, std::size_t epochs, const SgdOptions& options = {});

}  // namespace dagd
