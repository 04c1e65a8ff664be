#include "dagd/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <thread>

namespace dagd {

void MeanAccumulator::add(std::span<const double> x) {
  if (n_ == 0 && mean_.empty()) {
    mean_.assign(x.size(), 0.0);
    m2_.assign(x.size(), 0.0);
  }
  if (x.size() != mean_.size()) throw ShapeError("MeanAccumulator: dimension changed");
  ++n_;
  const double n = static_cast<double>(n_);
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double d = x[i] - mean_[i];
    mean_[i] += d / n;
    m2_[i] += d * (x[i] - mean_[i]);
  }
}

void MeanAccumulator::merge(const MeanAccumulator& other) {
  if (other.n_ == 0) return;
  if (n_ == 0) {
    *this = other;
    return;
  }
  if (other.dim() != dim()) throw ShapeError("MeanAccumulator: merging different dimensions");
  const double na = static_cast<double>(n_);
  const double nb = static_cast<double>(other.n_);
  const double n = na + nb;
  for (std::size_t i = 0; i < mean_.size(); ++i) {
    const double d = other.mean_[i] - mean_[i];
    mean_[i] += d * (nb / n);
    m2_[i] += other.m2_[i] + d * d * (na * nb / n);
  }
  n_ += other.n_;
}

std::vector<double> MeanAccumulator::std_error() const {
  std::vector<double> se(mean_.size(), 0.0);
  if (n_ < 2) return se;
  const double n = static_cast<double>(n_);
  for (std::size_t i = 0; i < se.size(); ++i) se[i] = std::sqrt(m2_[i] / (n - 1.0) / n);
  return se;
}

// ---------------------------------------------------------------------------

std::string UpdateRule::id() const {
  switch (kind) {
    case Kind::sse: return "sse";
    case Kind::mse: return "mse";
    case Kind::mb: return "mb(k=" + std::to_string(k) + ",q=" + std::to_string(q + 1) + ")";
  }
  return "?";
}

namespace {

void check_rule(const AugmentationSpec& aug, const UpdateRule& rule, std::size_t n) {
  if (rule.kind != UpdateRule::Kind::mb) return;
  if (!rule.partition) throw ConfigError("mb rule requires a partition", "rule.partition");
  if (rule.partition->rho * rule.partition->Q != n) throw ConfigError("partition does not cover the data", "rule.partition");
  if (rule.q >= rule.partition->Q) throw ConfigError("block index out of range", "rule.q");
  if (rule.k > aug.K) throw ConfigError("copy index exceeds K", "rule.k");
}

AugmentationSpec online(AugmentationSpec aug) {
  aug.mode = NoiseMode::online;
  return aug;
}

}  // namespace

UpdateSampler rule_sampler(const Dataset& d, const Vec& w, const UpdateRule& rule) {
  switch (rule.kind) {
    case UpdateRule::Kind::sse:
      return [&d, w](const NoiseBank& bank, std::uint64_t t) { return delta_da_sse(d, bank, t, w); };
    case UpdateRule::Kind::mse:
      return [&d, w](const NoiseBank& bank, std::uint64_t t) { return delta_da_mse(d, bank, t, w); };
    case UpdateRule::Kind::mb:
      return [&d, w, block = rule.partition->blocks.at(rule.q), k = rule.k](const NoiseBank& bank,
                                                                           std::uint64_t t) {
        if (k == 0) return block_gradient(d, nullptr, block, w);
        const Mat u = bank.noise(t, k);
        return block_gradient(d, &u, block, w);
      };
  }
  throw ConfigError("unknown rule");
}

Vec expected_update(const Dataset& d, const Vec& w, const AugmentationSpec& aug, const UpdateRule& rule) {
  check_rule(aug, rule, d.n());
  const double K = static_cast<double>(aug.K);
  const double tau2 = aug.tau * aug.tau;
  const double n = static_cast<double>(d.n());
  Vec out(d.m());
  switch (rule.kind) {
    case UpdateRule::Kind::sse: {
      const Vec g = delta_s(d, w);
      const double lambda = K * tau2 / (K + 1.0);
      for (std::size_t j = 0; j < out.size(); ++j) out[j] = (K + 1.0) * (g[j] + 2.0 * lambda * w[j]);
      break;
    }
    case UpdateRule::Kind::mse: {
      const Vec g = delta_s(d, w);
      const double inv_n = 1.0 / n;
      const double c = (2.0 * tau2 / n) * (K / (K + 1.0));
      for (std::size_t j = 0; j < out.size(); ++j) out[j] = inv_n * g[j] + c * w[j];
      break;
    }
    case UpdateRule::Kind::mb: {
      out = block_gradient(d, nullptr, rule.partition->blocks[rule.q], w);
      if (rule.k >= 1) {
        const double c = 2.0 * tau2 / n;
        for (std::size_t j = 0; j < out.size(); ++j) out[j] += c * w[j];
      }
      break;
    }
  }
  return out;
}

Certificate certify(std::string claim_id, std::size_t n, std::size_t m, const AugmentationSpec& aug,
                    const UpdateSampler& sampler, const Vec& closed_form, std::size_t n_draws, double threshold,
                    unsigned threads) {
  if (n_draws < 100) throw ParameterError("certify: n_draws must be >= 100, got " + std::to_string(n_draws));
  const NoiseBank bank(n, m, online(aug));

  constexpr std::size_t kChunks = 16;
  std::vector<MeanAccumulator> parts(kChunks);
  auto run_chunk = [&](std::size_t c) {
    const std::size_t lo = n_draws * c / kChunks;
    const std::size_t hi = n_draws * (c + 1) / kChunks;
    for (std::size_t i = lo; i < hi; ++i) parts[c].add(sampler(bank, i + 1).span());
  };
  if (threads == 0) threads = std::max(1u, std::min(8u, std::thread::hardware_concurrency()));
  if (threads <= 1) {
    for (std::size_t c = 0; c < kChunks; ++c) run_chunk(c);
  } else {
    std::vector<std::jthread> pool;
    for (unsigned w = 0; w < threads; ++w) {
      pool.emplace_back([&, w] {
        for (std::size_t c = w; c < kChunks; c += threads) run_chunk(c);
      });
    }
  }
  MeanAccumulator acc;
  for (const auto& p : parts) acc.merge(p);

  Certificate cert;
  cert.claim_id = std::move(claim_id);
  cert.mc_estimate = acc.mean();
  cert.std_error = acc.std_error();
  cert.closed_form = closed_form.values();
  cert.n_draws = n_draws;
  cert.threshold = threshold;
  if (cert.mc_estimate.size() != cert.closed_form.size()) throw ShapeError("certify: closed form has wrong length");
  double z_max = 0.0;
  for (std::size_t j = 0; j < cert.mc_estimate.size(); ++j) {
    const double diff = std::abs(cert.mc_estimate[j] - cert.closed_form[j]);
    double z = 0.0;
    if (cert.std_error[j] > 0.0) {
      z = diff / cert.std_error[j];
    } else if (diff != 0.0) {
      z = std::numeric_limits<double>::infinity();
    }
    z_max = std::max(z_max, z);
  }
  cert.z_max = z_max;
  cert.pass = z_max <= threshold;
  return cert;
}

Certificate certify_expected_update(const Dataset& d, const Vec& w, const AugmentationSpec& aug,
                                    const UpdateRule& rule, std::size_t n_draws, double threshold) {
  const Vec cf = expected_update(d, w, aug, rule);
  return certify(rule.id(), d.n(), d.m(), aug, rule_sampler(d, w, rule), cf, n_draws, threshold);
}

// ---------------------------------------------------------------------------

RateFit fit_loglog(std::vector<double> xs, std::vector<double> ys) {
  if (xs.size() != ys.size() || xs.size() < 2) throw ParameterError("fit_loglog: need >= 2 paired points");
  for (std::size_t i = 1; i < xs.size(); ++i)
    if (!(xs[i] > xs[i - 1])) throw ParameterError("fit_loglog: xs must be strictly increasing");
  RateFit fit;
  fit.xs = std::move(xs);
  fit.ys = std::move(ys);
  if (std::any_of(fit.ys.begin(), fit.ys.end(), [](double y) { return !(y > 0.0); }) ||
      !(fit.xs.front() > 0.0)) {
    fit.degenerate = true;
    fit.slope = std::numeric_limits<double>::quiet_NaN();
    fit.intercept = std::numeric_limits<double>::quiet_NaN();
    return fit;
  }
  const double n = static_cast<double>(fit.xs.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < fit.xs.size(); ++i) {
    mx += std::log(fit.xs[i]);
    my += std::log(fit.ys[i]);
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < fit.xs.size(); ++i) {
    const double dx = std::log(fit.xs[i]) - mx;
    sxy += dx * (std::log(fit.ys[i]) - my);
    sxx += dx * dx;
  }
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  return fit;
}

RateFit rate_r_mse(const Dataset& d, const Vec& w, double tau, const std::vector<std::size_t>& Ks,
                   std::uint64_t seed) {
  if (Ks.empty() || Ks.front() < 10) throw ParameterError("rate_r_mse: Ks must start at >= 10");
  for (std::size_t i = 1; i < Ks.size(); ++i)
    if (Ks[i] <= Ks[i - 1]) throw ParameterError("rate_r_mse: Ks must be strictly increasing");
  std::vector<double> xs, ys;
  const double tau2 = tau * tau;
  for (std::size_t K : Ks) {
    const NoiseBank bank(d.n(), d.m(), AugmentationSpec{K, tau, NoiseMode::online, seed});
    Vec err = r_mse(d, bank, 1, w);
    for (std::size_t j = 0; j < err.size(); ++j) err[j] -= tau2 * w[j];
    xs.push_back(static_cast<double>(K));
    ys.push_back(norm(err));
  }
  return fit_loglog(std::move(xs), std::move(ys));
}

RateFit order_of_eta(const Dataset& d, const BatchPartition& part, const AugmentationSpec& aug, const Vec& w,
                     const std::vector<double>& etas, std::size_t n_draws, bool antithetic) {
  if (etas.size() < 3) throw ParameterError("order_of_eta: need >= 3 step sizes");
  std::vector<double> sorted = etas;
  std::sort(sorted.begin(), sorted.end());
  const double ratio = sorted[1] / sorted[0];
  for (std::size_t i = 1; i < sorted.size(); ++i) {
    if (!(sorted[i - 1] > 0.0) || std::abs(sorted[i] / sorted[i - 1] - ratio) > 1e-9 * ratio) {
      throw ParameterError("order_of_eta: step sizes must form a geometric progression");
    }
  }
  if (n_draws < 2) throw ParameterError("order_of_eta: need >= 2 draws");

  const NoiseBank bank(d.n(), d.m(), online(aug));
  const NoiseBank mirror = bank.negated();
  std::vector<double> ys, floors;
  for (double eta : sorted) {
    MeanAccumulator acc;
    auto one = [&](const NoiseBank& b, std::uint64_t t) {
      Vec out = mb_epoch_da(d, part, b, t, w, eta);
      if (!out.all_finite() ||
          std::any_of(out.begin(), out.end(), [](double x) { return std::abs(x) > kDivergenceBound; })) {
        throw DivergenceError(1, "order_of_eta: DA epoch diverged at eta=" + std::to_string(eta));
      }
      return out;
    };
    if (antithetic) {
      for (std::size_t i = 0; i < n_draws / 2; ++i) {
        Vec pair = one(bank, i + 1);
        pair += one(mirror, i + 1);
        pair *= 0.5;
        acc.add(pair.span());
      }
    } else {
      for (std::size_t i = 0; i < n_draws; ++i) acc.add(one(bank, i + 1).span());
    }
    const Vec ridge = mb_epoch_ridge_equiv(d, part, w, eta, aug.K, aug.tau);
    Vec diff(acc.mean());
    diff -= ridge;
    ys.push_back(norm(diff));
    floors.push_back(norm(Vec(acc.std_error())));
  }
  RateFit fit = fit_loglog(sorted, std::move(ys));
  fit.floor = std::move(floors);
  return fit;
}

// ---------------------------------------------------------------------------

CurveDistance compare_curves(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw ShapeError("compare_curves: lengths " + std::to_string(a.size()) + " and " + std::to_string(b.size()));
  }
  CurveDistance out;
  if (a.empty()) return out;
  double ss = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double g = std::abs(a[i] - b[i]);
    out.max_abs = std::max(out.max_abs, g);
    ss += g * g;
  }
  out.rms = std::min(out.max_abs, std::sqrt(ss / static_cast<double>(a.size())));
  const std::size_t tail = std::max<std::size_t>(1, (a.size() + 9) / 10);
  double gap = 0.0;
  for (std::size_t i = a.size() - tail; i < a.size(); ++i) gap += std::abs(a[i] - b[i]);
  out.tail_gap = gap / static_cast<double>(tail);
  return out;
}

CurveDistance compare_curves(const WeightTrajectory& a, const WeightTrajectory& b) {
  return compare_curves(a.curve, b.curve);
}

double percentile(std::vector<double> values, double p) {
  if (values.empty()) throw ParameterError("percentile: empty sample");
  if (!(p >= 0.0 && p <= 100.0)) throw ParameterError("percentile: p must lie in [0, 100]");
  std::sort(values.begin(), values.end());
  const double pos = p / 100.0 * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return values[lo] + frac * (values[hi] - values[lo]);
}

std::vector<double> pointwise_median(const std::vector<std::vector<double>>& curves) {
  if (curves.empty()) return {};
  const std::size_t len = curves.front().size();
  std::vector<double> out(len);
  std::vector<double> column(curves.size());
  for (std::size_t i = 0; i < len; ++i) {
    for (std::size_t c = 0; c < curves.size(); ++c) {
      if (curves[c].size() != len) throw ShapeError("pointwise_median: curves differ in length");
      column[c] = curves[c][i];
    }
    out[i] = percentile(column, 50.0);
  }
  return out;
}

// ---------------------------------------------------------------------------

std::vector<LoopStep> trace_mb_epoch(const Dataset& d, const BatchPartition& part, const NoiseBank& bank,
                                     std::uint64_t t, const Vec& w0, double eta, LoopOrder order) {
  std::vector<Mat> noise;
  noise.reserve(bank.K() + 1);
  for (std::size_t k = 0; k <= bank.K(); ++k) noise.push_back(bank.noise(t, k));

  std::vector<LoopStep> steps;
  Vec w = w0;
  auto visit = [&](std::size_t k, std::size_t q) {
    Vec g = block_gradient(d, k == 0 ? nullptr : &noise[k], part.blocks[q], w);
    for (std::size_t j = 0; j < w.size(); ++j) w[j] -= eta * g[j];
    steps.push_back({InnerPosition{k, q + 1}, std::move(g), w});
  };
  if (order == LoopOrder::copies_outer) {
    for (std::size_t k = 0; k <= bank.K(); ++k)
      for (std::size_t q = 0; q < part.Q; ++q) visit(k, q);
  } else {
    for (std::size_t q = 0; q < part.Q; ++q)
      for (std::size_t k = 0; k <= bank.K(); ++k) visit(k, q);
  }
  return steps;
}

bool telescoping_check(const Dataset& d, const BatchPartition& part, const NoiseBank& bank, std::uint64_t t,
                       const Vec& w, double eta, LoopOrder order, double tol) {
  const auto steps = trace_mb_epoch(d, part, bank, t, w, eta, order);
  const std::size_t K = bank.K();
  const std::size_t Q = part.Q;
  std::map<std::pair<std::size_t, std::size_t>, const LoopStep*> at;
  for (const auto& s : steps) at[{s.pos.k, s.pos.q}] = &s;

  auto delta = [&](std::size_t k, std::size_t q) -> const Vec& { return at.at({k, q})->delta; };
  auto iterate = [&](std::size_t k, std::size_t q) -> const Vec& { return at.at({k, q})->w_after; };
  auto close = [tol](const Vec& a, const Vec& b) {
    for (std::size_t j = 0; j < a.size(); ++j)
      if (!(std::abs(a[j] - b[j]) <= tol * std::max(1.0, std::abs(a[j])))) return false;
    return true;
  };
  auto block_sum = [&](std::size_t k, std::size_t from, std::size_t to) {
    Vec s(w.size());
    for (std::size_t q = from; q <= to; ++q) s += delta(k, q);
    return s;
  };

  for (std::size_t k = 0; k <= K; ++k) {
    for (std::size_t q = 1; q <= Q; ++q) {
      Vec acc(w.size());
      for (std::size_t j = 0; j < k; ++j) acc += block_sum(j, 1, Q);
      acc += block_sum(k, 1, q);
      Vec expect = w;
      for (std::size_t j = 0; j < w.size(); ++j) expect[j] -= eta * acc[j];
      if (!close(iterate(k, q), expect)) return false;

      if (k >= 1) {
        Vec linked(w.size());
        if (q < Q) linked += block_sum(0, q + 1, Q);
        for (std::size_t j = 1; j < k; ++j) linked += block_sum(j, 1, Q);
        linked += block_sum(k, 1, q);
        Vec expect2 = iterate(0, q);
        for (std::size_t j = 0; j < w.size(); ++j) expect2[j] -= eta * linked[j];
        if (!close(iterate(k, q), expect2)) return false;
      }
    }
  }
  return true;
}

}  // namespace dagd
