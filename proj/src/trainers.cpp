#include "dagd/trainers.hpp"

#include <cmath>
#include <string>

namespace dagd {

namespace {

void require_weights(const Dataset& d, const Vec& w, const char* op) {
  if (w.size() != d.m()) {
    throw ShapeError(std::string(op) + ": weight vector has " + std::to_string(w.size()) +
                     " entries, data has m=" + std::to_string(d.m()));
  }
}

void require_bank(const Dataset& d, const NoiseBank& bank, const char* op) {
  if (bank.rows() != d.n() || bank.cols() != d.m()) {
    throw ShapeError(std::string(op) + ": noise bank is " + std::to_string(bank.rows()) + "x" +
                     std::to_string(bank.cols()) + ", data is " + std::to_string(d.n()) + "x" +
                     std::to_string(d.m()));
  }
}

void check_divergence(const Vec& w, std::size_t epoch) {
  for (std::size_t j = 0; j < w.size(); ++j) {
    if (!std::isfinite(w[j]) || std::abs(w[j]) > kDivergenceBound) {
      throw DivergenceError(epoch, "training diverged at epoch " + std::to_string(epoch) + ": |w[" +
                                       std::to_string(j) + "]| = " + std::to_string(std::abs(w[j])));
    }
  }
}

}  // namespace

Vec delta_s(const Dataset& d, const Vec& w) {
  require_weights(d, w, "delta_s");
  Vec g = matvec_t(d.X, d.y - matvec(d.X, w));
  g *= -2.0;
  return g;
}

Vec delta_c(const Dataset& d, const Vec& w, double lambda) {
  if (!(lambda >= 0.0)) throw ParameterError("delta_c: lambda must be >= 0");
  Vec g = delta_s(d, w);
  for (std::size_t j = 0; j < g.size(); ++j) g[j] += 2.0 * lambda * w[j];
  return g;
}

Vec r_sse(const Dataset& d, const NoiseBank& bank, std::uint64_t t, const Vec& w) {
  require_weights(d, w, "r_sse");
  require_bank(d, bank, "r_sse");
  Vec acc(d.m());
  if (bank.K() == 0) return acc;
  const Vec xw = matvec(d.X, w);
  for (std::size_t k = 1; k <= bank.K(); ++k) {
    const Mat u = bank.noise(t, k);
    const Vec uw = matvec(u, w);
    Vec resid = xw + uw;  // (X + U) w - y
    resid -= d.y;
    acc += matvec_t(u, resid);
    acc += matvec_t(d.X, uw);
  }
  return acc;
}

Vec delta_da_sse(const Dataset& d, const NoiseBank& bank, std::uint64_t t, const Vec& w) {
  const Vec g = delta_s(d, w);
  const Vec r = r_sse(d, bank, t, w);
  const double copies = static_cast<double>(bank.K() + 1);
  Vec out(g.size());
  for (std::size_t j = 0; j < g.size(); ++j) out[j] = copies * g[j] + 2.0 * r[j];
  return out;
}

Vec r_mse(const Dataset& d, const NoiseBank& bank, std::uint64_t t, const Vec& w) {
  Vec r = r_sse(d, bank, t, w);
  if (bank.K() == 0) return r;
  const double K = static_cast<double>(bank.K());
  for (auto& x : r) x /= K;
  return r;
}

Vec delta_mse(const Dataset& d, const Vec& w) {
  Vec g = delta_s(d, w);
  const double inv_n = 1.0 / static_cast<double>(d.n());
  for (auto& x : g) x = inv_n * x;
  return g;
}

Vec delta_da_mse(const Dataset& d, const NoiseBank& bank, std::uint64_t t, const Vec& w) {
  const Vec g = delta_s(d, w);
  const Vec r = r_mse(d, bank, t, w);
  const double n = static_cast<double>(d.n());
  const double K = static_cast<double>(bank.K());
  const double inv_n = 1.0 / n;
  const double c = (2.0 / n) * (K / (K + 1.0));
  Vec out(g.size());
  for (std::size_t j = 0; j < g.size(); ++j) out[j] = inv_n * g[j] + c * r[j];
  return out;
}

Vec block_gradient(const Dataset& d, const Mat* noise, const IndexSet& block, const Vec& w) {
  require_weights(d, w, "block_gradient");
  if (noise && (noise->rows() != d.n() || noise->cols() != d.m())) {
    throw ShapeError("block_gradient: noise matrix shape does not match data");
  }
  const std::size_t m = d.m();
  Vec g(m);
  std::vector<double> row(m);
  for (std::size_t i : block) {
    if (i >= d.n()) throw ShapeError("block_gradient: index " + std::to_string(i) + " out of range");
    const auto x = d.X.row(i);
    if (noise) {
      const auto u = noise->row(i);
      for (std::size_t j = 0; j < m; ++j) row[j] = x[j] + u[j];
    } else {
      for (std::size_t j = 0; j < m; ++j) row[j] = x[j];
    }
    double pred = 0.0;
    for (std::size_t j = 0; j < m; ++j) pred += row[j] * w[j];
    const double res = d.y[i] - pred;
    for (std::size_t j = 0; j < m; ++j) g[j] += row[j] * res;
  }
  g *= -2.0 / static_cast<double>(block.size());
  return g;
}

Vec mb_epoch_plain(const Dataset& d, const BatchPartition& part, Vec w, double eta) {
  for (const auto& block : part.blocks) {
    const Vec g = block_gradient(d, nullptr, block, w);
    for (std::size_t j = 0; j < w.size(); ++j) w[j] -= eta * g[j];
  }
  return w;
}

Vec mb_epoch_ridge(const Dataset& d, const BatchPartition& part, Vec w, double eta, double lambda) {
  for (const auto& block : part.blocks) {
    const Vec g = block_gradient(d, nullptr, block, w);
    for (std::size_t j = 0; j < w.size(); ++j) w[j] -= eta * (g[j] + 2.0 * lambda * w[j]);
  }
  return w;
}

Vec mb_epoch_da(const Dataset& d, const BatchPartition& part, const NoiseBank& bank, std::uint64_t t, Vec w,
                double eta) {
  require_bank(d, bank, "mb_epoch_da");
  for (std::size_t k = 0; k <= bank.K(); ++k) {
    const Mat u = k == 0 ? Mat() : bank.noise(t, k);
    for (const auto& block : part.blocks) {
      const Vec g = block_gradient(d, k == 0 ? nullptr : &u, block, w);
      for (std::size_t j = 0; j < w.size(); ++j) w[j] -= eta * g[j];
    }
  }
  return w;
}

Vec mb_epoch_ridge_equiv(const Dataset& d, const BatchPartition& part, Vec w, double eta, std::size_t K,
                         double tau) {
  const double rate = static_cast<double>(K + 1) * eta;
  return mb_epoch_ridge(d, part, std::move(w), rate, mse_equiv_lambda(K, tau, d.n()));
}

double sse_equiv_lambda(std::size_t K, double tau) {
  const double k = static_cast<double>(K);
  return k * tau * tau / (k + 1.0);
}

double mse_equiv_lambda(std::size_t K, double tau, std::size_t n) {
  const double k = static_cast<double>(K);
  return k * tau * tau / ((k + 1.0) * static_cast<double>(n));
}

double mse(const Dataset& d, const Vec& w) {
  require_weights(d, w, "mse");
  return sq_norm(d.y - matvec(d.X, w)) / static_cast<double>(d.n());
}

// ---------------------------------------------------------------------------

std::string_view to_string(Regime r) noexcept {
  switch (r) {
    case Regime::naive: return "naive";
    case Regime::ridge: return "ridge";
    case Regime::da_online: return "da-online";
    case Regime::da_offline: return "da-offline";
    case Regime::ridge_mb_equiv: return "ridge-mb-equiv";
  }
  return "?";
}

std::string_view to_string(Criterion c) noexcept {
  switch (c) {
    case Criterion::sse: return "SSE";
    case Criterion::mse: return "MSE";
    case Criterion::mb: return "MB";
  }
  return "?";
}

std::optional<Regime> parse_regime(std::string_view s) noexcept {
  for (auto r : {Regime::naive, Regime::ridge, Regime::da_online, Regime::da_offline, Regime::ridge_mb_equiv})
    if (s == to_string(r)) return r;
  return std::nullopt;
}

std::optional<Criterion> parse_criterion(std::string_view s) noexcept {
  for (auto c : {Criterion::sse, Criterion::mse, Criterion::mb})
    if (s == to_string(c)) return c;
  return std::nullopt;
}

void validate(const TrainerConfig& cfg, const Dataset& d) {
  if (!(cfg.eta > 0.0) || !std::isfinite(cfg.eta)) throw ConfigError("learning rate must be > 0", "eta");
  if (!(cfg.lambda >= 0.0) || !std::isfinite(cfg.lambda)) throw ConfigError("must be >= 0", "lambda");
  if (cfg.criterion == Criterion::mb) {
    if (!cfg.partition) throw ConfigError("criterion MB requires a mini-batch partition", "partition");
    if (cfg.partition->rho * cfg.partition->Q != d.n() || cfg.partition->blocks.size() != cfg.partition->Q) {
      throw ConfigError("partition does not cover n=" + std::to_string(d.n()), "partition");
    }
  }
  const bool da = cfg.regime == Regime::da_online || cfg.regime == Regime::da_offline;
  if (da && !cfg.aug) throw ConfigError("regime " + std::string(to_string(cfg.regime)) + " requires augmentation", "aug");
  if (cfg.regime == Regime::ridge_mb_equiv) {
    if (cfg.criterion != Criterion::mb) {
      throw ConfigError("regime ridge-mb-equiv is only defined for criterion MB, got " +
                            std::string(to_string(cfg.criterion)),
                        "criterion");
    }
    if (!cfg.aug) throw ConfigError("regime ridge-mb-equiv requires K and tau", "aug");
  }
  if (cfg.aug && !(cfg.aug->tau >= 0.0)) throw ConfigError("must be >= 0", "aug.tau");
  if (!cfg.w0.empty() && cfg.w0.size() != d.m()) {
    throw ConfigError("has " + std::to_string(cfg.w0.size()) + " entries, data has m=" + std::to_string(d.m()),
                      "w0");
  }
}

WeightTrajectory train(const Dataset& d, const TrainerConfig& cfg) {
  validate(cfg, d);

  std::optional<NoiseBank> bank;
  if (cfg.regime == Regime::da_online || cfg.regime == Regime::da_offline) {
    auto spec = *cfg.aug;
    spec.mode = cfg.regime == Regime::da_online ? NoiseMode::online : NoiseMode::offline;
    bank.emplace(make_noise_bank(d, spec));
  }

  Vec w = cfg.w0.empty() ? Vec(d.m()) : cfg.w0;
  WeightTrajectory traj;
  traj.states.reserve(cfg.epochs + 1);
  traj.curve.reserve(cfg.epochs + 1);
  traj.states.push_back(w);
  traj.curve.push_back(mse(d, w));

  const double eta = cfg.eta;
  const double lambda = cfg.lambda;
  auto step = [&w, eta](const Vec& delta) {
    for (std::size_t j = 0; j < w.size(); ++j) w[j] -= eta * delta[j];
  };

  for (std::size_t t = 1; t <= cfg.epochs; ++t) {
    switch (cfg.criterion) {
      case Criterion::sse:
        switch (cfg.regime) {
          case Regime::naive: step(delta_s(d, w)); break;
          case Regime::ridge: step(delta_c(d, w, lambda)); break;
          default: step(delta_da_sse(d, *bank, t, w)); break;
        }
        break;
      case Criterion::mse:
        switch (cfg.regime) {
          case Regime::naive: step(delta_mse(d, w)); break;
          case Regime::ridge: {
            Vec g = delta_mse(d, w);
            for (std::size_t j = 0; j < g.size(); ++j) g[j] += 2.0 * lambda * w[j];
            step(g);
            break;
          }
          default: step(delta_da_mse(d, *bank, t, w)); break;
        }
        break;
      case Criterion::mb:
        switch (cfg.regime) {
          case Regime::naive: w = mb_epoch_plain(d, *cfg.partition, std::move(w), eta); break;
          case Regime::ridge: w = mb_epoch_ridge(d, *cfg.partition, std::move(w), eta, lambda); break;
          case Regime::ridge_mb_equiv:
            w = mb_epoch_ridge_equiv(d, *cfg.partition, std::move(w), eta, cfg.aug->K, cfg.aug->tau);
            break;
          default: w = mb_epoch_da(d, *cfg.partition, *bank, t, std::move(w), eta); break;
        }
        break;
    }
    check_divergence(w, t);
    traj.states.push_back(w);
    traj.curve.push_back(mse(d, w));
  }
  return traj;
}

}  // namespace dagd
