#pragma once

// Gradient-descent update rules for linear regression on original and
// noise-augmented data, and the training loop that records the MSE on the
// original data after every epoch.
//
// Conventions: losses carry no 1/2 factor, so the SSE gradient is
// -2 Xᵀ(y - Xw). An epoch t >= 1 draws its on-line noise as U_{t,k}.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

#include "dagd/data.hpp"
#include "dagd/numkit.hpp"

namespace dagd {

/// Weights above this magnitude abort training.
inline constexpr double kDivergenceBound = 1e12;

/// -2 Xᵀ(y - Xw): gradient of ‖y - Xw‖².
Vec delta_s(const Dataset& d, const Vec& w);

/// delta_s + 2 lambda w: gradient of ‖y - Xw‖² + lambda ‖w‖².
Vec delta_c(const Dataset& d, const Vec& w, double lambda);

/// Noise-driven part of the augmented SSE gradient,
///   sum_{k=1..K} [ U_kᵀ((X + U_k)w - y) + Xᵀ U_k w ],
/// so that the gradient of ‖y_K - X_{K,t} w‖² is (K+1) delta_s + 2 r_sse.
/// Its expectation over the noise is K tau² w.
Vec r_sse(const Dataset& d, const NoiseBank& bank, std::uint64_t t, const Vec& w);

/// Gradient of the augmented SSE: (K+1) delta_s + 2 r_sse.
Vec delta_da_sse(const Dataset& d, const NoiseBank& bank, std::uint64_t t, const Vec& w);

/// r_sse / K (zero vector when K = 0).
Vec r_mse(const Dataset& d, const NoiseBank& bank, std::uint64_t t, const Vec& w);

/// Gradient of the augmented MSE: (1/n) delta_s + (2/n)(K/(K+1)) r_mse.
Vec delta_da_mse(const Dataset& d, const NoiseBank& bank, std::uint64_t t, const Vec& w);

/// (1/n) delta_s, the plain full-batch MSE gradient.
Vec delta_mse(const Dataset& d, const Vec& w);

/// Gradient of (1/rho)‖y[B] - (X[B] + U[B]) w‖² where U may be null (no noise).
Vec block_gradient(const Dataset& d, const Mat* noise, const IndexSet& block, const Vec& w);

/// One plain mini-batch epoch: w <- w - eta Δ^MB_q for q = 1..Q.
Vec mb_epoch_plain(const Dataset& d, const BatchPartition& part, Vec w, double eta);

/// Mini-batch epoch on S^MB_q + lambda ‖w‖².
Vec mb_epoch_ridge(const Dataset& d, const BatchPartition& part, Vec w, double eta, double lambda);

/// One mini-batch epoch over the augmented data: outer loop over copies
/// k = 0..K (copy 0 noiseless), inner loop over blocks q = 1..Q.
Vec mb_epoch_da(const Dataset& d, const BatchPartition& part, const NoiseBank& bank, std::uint64_t t, Vec w,
                double eta);

/// Ridge-equivalent mini-batch epoch: Q updates with rate (K+1) eta on
/// S^MB_q + lambda ‖w‖², lambda = K tau² / ((K+1) n), shrinkage applied to the
/// current inner iterate.
Vec mb_epoch_ridge_equiv(const Dataset& d, const BatchPartition& part, Vec w, double eta, std::size_t K,
                         double tau);

/// K tau² / (K+1): ridge parameter matching full-batch DA under SSE.
double sse_equiv_lambda(std::size_t K, double tau);
/// K tau² / ((K+1) n): ridge parameter matching DA under MSE and mini-batch.
double mse_equiv_lambda(std::size_t K, double tau, std::size_t n);

/// ‖y - Xw‖² / n.
double mse(const Dataset& d, const Vec& w);

// ---------------------------------------------------------------------------

enum class Regime { naive, ridge, da_online, da_offline, ridge_mb_equiv };
enum class Criterion { sse, mse, mb };

std::string_view to_string(Regime r) noexcept;
std::string_view to_string(Criterion c) noexcept;
std::optional<Regime> parse_regime(std::string_view s) noexcept;
std::optional<Criterion> parse_criterion(std::string_view s) noexcept;

struct TrainerConfig {
  Regime regime = Regime::naive;
  Criterion criterion = Criterion::sse;
  double eta = 1e-3;
  double lambda = 0.0;
  std::size_t epochs = 0;
  std::optional<BatchPartition> partition;
  /// K, tau and seed; the noise mode is implied by the regime.
  std::optional<AugmentationSpec> aug;
  /// Defaults to the zero vector when empty.
  Vec w0;
};

/// Position inside the copy/block double loop of a DA mini-batch epoch.
struct InnerPosition {
  std::size_t k = 0;
  std::size_t q = 0;
};

struct WeightState {
  Vec w;
  std::size_t epoch = 0;
  std::optional<InnerPosition> inner;
};

struct WeightTrajectory {
  std::vector<Vec> states;   // w(0) .. w(T)
  std::vector<double> curve; // MSE on the original data after each epoch
};

/// Throws ConfigError for inconsistent configurations.
void validate(const TrainerConfig& cfg, const Dataset& d);

/// Runs cfg.epochs epochs; throws DivergenceError if any |w_j| exceeds
/// kDivergenceBound or turns non-finite.
WeightTrajectory train(const Dataset& d, const TrainerConfig& cfg);

}  // namespace dagd
