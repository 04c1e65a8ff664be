#pragma once

// Monte-Carlo verification of expected-update identities, curve distances
// and log-log convergence-rate fits.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dagd/data.hpp"
#include "dagd/numkit.hpp"
#include "dagd/trainers.hpp"

namespace dagd {

/// Streaming mean/variance (Welford), mergeable (Chan et al.). Adding a value
/// equal to the current mean leaves the mean bit-identical.
class MeanAccumulator {
 public:
  explicit MeanAccumulator(std::size_t dim = 0) : mean_(dim, 0.0), m2_(dim, 0.0) {}

  void add(std::span<const double> x);
  void merge(const MeanAccumulator& other);

  std::size_t count() const noexcept { return n_; }
  std::size_t dim() const noexcept { return mean_.size(); }
  const std::vector<double>& mean() const noexcept { return mean_; }
  /// Sample standard deviation / sqrt(count); zero for fewer than two draws.
  std::vector<double> std_error() const;

 private:
  std::size_t n_ = 0;
  std::vector<double> mean_;
  std::vector<double> m2_;
};

struct Certificate {
  std::string claim_id;
  std::vector<double> mc_estimate;
  std::vector<double> std_error;
  std::vector<double> closed_form;
  double z_max = 0.0;
  std::size_t n_draws = 0;
  double threshold = 5.0;
  bool pass = false;
};

/// The update whose expectation is certified.
struct UpdateRule {
  enum class Kind { sse, mse, mb };
  Kind kind = Kind::sse;
  std::optional<BatchPartition> partition;  // mb only
  std::size_t k = 0;                        // copy index, mb only
  std::size_t q = 0;                        // 0-based block index, mb only

  static UpdateRule sse() { return {Kind::sse, std::nullopt, 0, 0}; }
  static UpdateRule mse() { return {Kind::mse, std::nullopt, 0, 0}; }
  static UpdateRule mb(BatchPartition p, std::size_t k, std::size_t q) { return {Kind::mb, std::move(p), k, q}; }

  std::string id() const;
};

/// One MC draw of an update: evaluated with on-line noise of epoch `t`.
using UpdateSampler = std::function<Vec(const NoiseBank& bank, std::uint64_t t)>;

/// The update as implemented by the trainers, at fixed w.
UpdateSampler rule_sampler(const Dataset& d, const Vec& w, const UpdateRule& rule);

/// Closed-form expectation of the rule's update over the noise:
///   sse: (K+1)[Δ_S + 2(K tau²/(K+1)) w]
///   mse: (1/n)Δ_S + (2 tau²/n)(K/(K+1)) w
///   mb:  Δ^MB_{0,q} + (2 tau²/n) w for k >= 1, Δ^MB_{0,q} for k = 0
Vec expected_update(const Dataset& d, const Vec& w, const AugmentationSpec& aug, const UpdateRule& rule);

/// MC mean and standard error of `sampler` over n_draws fresh on-line noise
/// draws (draw i uses epoch i+1 of an on-line bank seeded by aug.seed),
/// compared against `closed_form`. Draws are split into fixed chunks so the
/// result does not depend on the number of worker threads.
Certificate certify(std::string claim_id, std::size_t n, std::size_t m, const AugmentationSpec& aug,
                    const UpdateSampler& sampler, const Vec& closed_form, std::size_t n_draws,
                    double threshold = 5.0, unsigned threads = 0);

Certificate certify_expected_update(const Dataset& d, const Vec& w, const AugmentationSpec& aug,
                                    const UpdateRule& rule, std::size_t n_draws, double threshold = 5.0);

// ---------------------------------------------------------------------------

struct RateFit {
  std::vector<double> xs;
  std::vector<double> ys;
  /// Per-point MC noise floor (norm of the standard-error vector); empty
  /// when the ys are single draws.
  std::vector<double> floor;
  double slope = 0.0;
  double intercept = 0.0;
  /// Some y is zero, so no log-log fit was attempted.
  bool degenerate = false;
};

/// Ordinary least squares of log y on log x.
RateFit fit_loglog(std::vector<double> xs, std::vector<double> ys);

/// ys[i] = ‖r_mse(K_i) - tau² w‖ for a single on-line draw per K. Draws are
/// nested: the K_i run reuses the first K_{i-1} copies.
RateFit rate_r_mse(const Dataset& d, const Vec& w, double tau, const std::vector<std::size_t>& Ks,
                   std::uint64_t seed);

/// ys[i] = ‖E_MC[mb_epoch_da(eta_i)] - mb_epoch_ridge_equiv(eta_i)‖ from the
/// same start w. With `antithetic`, draws come in (U, -U) pairs; n_draws
/// counts individual epochs.
RateFit order_of_eta(const Dataset& d, const BatchPartition& part, const AugmentationSpec& aug, const Vec& w,
                     const std::vector<double>& etas, std::size_t n_draws, bool antithetic = true);

// ---------------------------------------------------------------------------

struct CurveDistance {
  double max_abs = 0.0;
  double rms = 0.0;
  /// Mean |a - b| over the final 10% of entries (at least one).
  double tail_gap = 0.0;
};

CurveDistance compare_curves(std::span<const double> a, std::span<const double> b);
CurveDistance compare_curves(const WeightTrajectory& a, const WeightTrajectory& b);

/// Linear-interpolation percentile, p in [0, 100].
double percentile(std::vector<double> values, double p);

/// Pointwise median of equal-length curves.
std::vector<double> pointwise_median(const std::vector<std::vector<double>>& curves);

// ---------------------------------------------------------------------------
// Copy/block double loop of the DA mini-batch epoch, traced step by step.

enum class LoopOrder { copies_outer, blocks_outer };

struct LoopStep {
  InnerPosition pos;  // k in 0..K, q in 1..Q
  Vec delta;          // Δ^MB_{k,q} at the iterate before the step
  Vec w_after;        // w(t,k,q)
};

std::vector<LoopStep> trace_mb_epoch(const Dataset& d, const BatchPartition& part, const NoiseBank& bank,
                                     std::uint64_t t, const Vec& w, double eta,
                                     LoopOrder order = LoopOrder::copies_outer);

/// Executes the loop in `order` and checks, for every (k,q) prefix, that the
/// recorded iterate equals
///   w(t-1) - eta [ Σ_{j<k} Δ^MB_{j,1:Q} + Δ^MB_{k,1:q} ]
/// and, for k >= 1, the form anchored at the original-data iterate
///   w(t,0,q) - eta [ Δ^MB_{0,q+1:Q} + Σ_{j=1}^{k-1} Δ^MB_{j,1:Q} + Δ^MB_{k,1:q} ],
/// with sums accumulated in the canonical copies-outer order.
bool telescoping_check(const Dataset& d, const BatchPartition& part, const NoiseBank& bank, std::uint64_t t,
                       const Vec& w, double eta, LoopOrder order = LoopOrder::copies_outer,
                       double tol = 1e-10);

}  // namespace dagd
