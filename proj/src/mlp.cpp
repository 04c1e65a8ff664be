#include "dagd/mlp.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "dagd/trainers.hpp"

namespace dagd {

namespace {

constexpr std::uint64_t kTagInit = 0x4d4c50494e4954ull;     // "MLPINIT"
constexpr std::uint64_t kTagShuffle = 0x4d4c505348554full;  // "MLPSHUO"

double activate(Activation a, double z) noexcept { return a == Activation::relu ? (z > 0.0 ? z : 0.0) : z; }
double activate_slope(Activation a, double z) noexcept { return a == Activation::relu ? (z > 0.0 ? 1.0 : 0.0) : 1.0; }

// Per-layer pre-activations and activations for one sample.
struct Workspace {
  std::vector<std::vector<double>> z;  // z[l] for l = 1..L (index 0 unused)
  std::vector<std::vector<double>> a;  // a[0] = x, a[l] = act(z[l])
  std::vector<std::vector<double>> delta;

  explicit Workspace(const MlpParams& p) {
    const std::size_t L = p.W.size();
    z.resize(L + 1);
    a.resize(L + 1);
    delta.resize(L + 1);
    a[0].resize(p.W[0].cols());
    for (std::size_t l = 0; l < L; ++l) {
      z[l + 1].resize(p.W[l].rows());
      a[l + 1].resize(p.W[l].rows());
      delta[l + 1].resize(p.W[l].rows());
    }
  }
};

double forward_into(const MlpParams& p, std::span<const double> x, Workspace& ws) {
  const std::size_t L = p.W.size();
  std::copy(x.begin(), x.end(), ws.a[0].begin());
  for (std::size_t l = 0; l < L; ++l) {
    const Mat& W = p.W[l];
    const auto& in = ws.a[l];
    auto& z = ws.z[l + 1];
    auto& out = ws.a[l + 1];
    const bool hidden = l + 1 < L;
    for (std::size_t r = 0; r < W.rows(); ++r) {
      const auto wr = W.row(r);
      double s = p.b[l][r];
      for (std::size_t c = 0; c < wr.size(); ++c) s += wr[c] * in[c];
      z[r] = s;
      out[r] = hidden ? activate(p.hidden, s) : s;
    }
  }
  return ws.a[L][0];
}

// Adds the gradient of (y - f(x))² to g; returns the squared error.
double backprop_add(const MlpParams& p, std::span<const double> x, double y, Workspace& ws, MlpParams& g) {
  const std::size_t L = p.W.size();
  const double f = forward_into(p, x, ws);
  const double err = y - f;
  ws.delta[L][0] = -2.0 * err;
  for (std::size_t l = L; l-- > 0;) {
    const auto& delta = ws.delta[l + 1];
    const auto& in = ws.a[l];
    Mat& gW = g.W[l];
    for (std::size_t r = 0; r < gW.rows(); ++r) {
      const double dr = delta[r];
      if (dr == 0.0) continue;
      auto gr = gW.row(r);
      for (std::size_t c = 0; c < gr.size(); ++c) gr[c] += dr * in[c];
      g.b[l][r] += dr;
    }
    if (l == 0) break;
    auto& prev = ws.delta[l];
    std::fill(prev.begin(), prev.end(), 0.0);
    const Mat& W = p.W[l];
    for (std::size_t r = 0; r < W.rows(); ++r) {
      const double dr = delta[r];
      if (dr == 0.0) continue;
      const auto wr = W.row(r);
      for (std::size_t c = 0; c < wr.size(); ++c) prev[c] += wr[c] * dr;
    }
    for (std::size_t c = 0; c < prev.size(); ++c) prev[c] *= activate_slope(p.hidden, ws.z[l][c]);
  }
  return err * err;
}

void check_input(const MlpParams& p, std::size_t width) {
  if (p.W.empty() || p.W.front().cols() != width) {
    throw ShapeError("mlp: input has " + std::to_string(width) + " features, network expects " +
                     std::to_string(p.W.empty() ? 0 : p.W.front().cols()));
  }
}

// Mean gradient over the given rows.
MlpParams mean_grad(const MlpParams& p, const Mat& X, const Vec& y, std::span<const std::size_t> rows,
                    Workspace& ws) {
  MlpParams g = p.zeros_like();
  for (std::size_t i : rows) backprop_add(p, X.row(i), y[i], ws, g);
  const double inv = 1.0 / static_cast<double>(rows.size());
  for (auto& W : g.W)
    for (auto& v : W.entries()) v *= inv;
  for (auto& b : g.b) b *= inv;
  return g;
}

void running_mean(MlpParams& mean, const MlpParams& next, double weight) {
  // mean += weight * (next - mean)
  for (std::size_t l = 0; l < mean.W.size(); ++l) {
    auto m = mean.W[l].entries();
    const auto x = next.W[l].entries();
    for (std::size_t i = 0; i < m.size(); ++i) m[i] += weight * (x[i] - m[i]);
    for (std::size_t i = 0; i < mean.b[l].size(); ++i) mean.b[l][i] += weight * (next.b[l][i] - mean.b[l][i]);
  }
}

}  // namespace

std::size_t MlpParams::count() const noexcept {
  std::size_t c = 0;
  for (std::size_t l = 0; l < W.size(); ++l) c += W[l].rows() * W[l].cols() + b[l].size();
  return c;
}

bool MlpParams::all_finite() const noexcept {
  for (std::size_t l = 0; l < W.size(); ++l)
    if (!W[l].all_finite() || !b[l].all_finite()) return false;
  return true;
}

double MlpParams::max_abs() const noexcept {
  double m = 0.0;
  for (std::size_t l = 0; l < W.size(); ++l) {
    for (double v : W[l].entries()) m = std::max(m, std::abs(v));
    for (double v : b[l]) m = std::max(m, std::abs(v));
  }
  return m;
}

void MlpParams::axpy(double scale, const MlpParams& other) {
  for (std::size_t l = 0; l < W.size(); ++l) {
    auto w = W[l].entries();
    const auto o = other.W[l].entries();
    for (std::size_t i = 0; i < w.size(); ++i) w[i] += scale * o[i];
    for (std::size_t i = 0; i < b[l].size(); ++i) b[l][i] += scale * other.b[l][i];
  }
}

MlpParams MlpParams::zeros_like() const {
  MlpParams z;
  z.hidden = hidden;
  for (std::size_t l = 0; l < W.size(); ++l) {
    z.W.emplace_back(W[l].rows(), W[l].cols());
    z.b.emplace_back(b[l].size());
  }
  return z;
}

void validate(const MlpSpec& spec) {
  if (spec.widths.size() < 3) throw ParameterError("mlp: need input, at least one hidden layer, and output widths");
  if (spec.widths.back() != 1) throw ParameterError("mlp: output width must be 1");
  for (std::size_t w : spec.widths)
    if (w == 0) throw ParameterError("mlp: layer widths must be positive");
}

MlpParams init_params(const MlpSpec& spec) {
  validate(spec);
  MlpParams p;
  p.hidden = spec.hidden;
  for (std::size_t l = 0; l + 1 < spec.widths.size(); ++l) {
    const std::size_t fan_in = spec.widths[l];
    const double sd = std::sqrt(2.0 / static_cast<double>(fan_in));
    p.W.push_back(gauss_mat(GaussSource(spec.seed, derive_stream({kTagInit, l})), spec.widths[l + 1], fan_in, sd));
    p.b.emplace_back(spec.widths[l + 1]);
  }
  return p;
}

double forward(const MlpParams& p, std::span<const double> x) {
  check_input(p, x.size());
  Workspace ws(p);
  return forward_into(p, x, ws);
}

MlpParams grad(const MlpParams& p, const Mat& X, const Vec& y) {
  check_input(p, X.cols());
  if (X.rows() != y.size() || X.rows() == 0) throw ShapeError("mlp grad: X and y disagree or are empty");
  Workspace ws(p);
  std::vector<std::size_t> rows(X.rows());
  std::iota(rows.begin(), rows.end(), 0);
  return mean_grad(p, X, y, rows, ws);
}

double batch_mse(const MlpParams& p, const Mat& X, const Vec& y) {
  check_input(p, X.cols());
  if (X.rows() != y.size() || X.rows() == 0) throw ShapeError("mlp batch_mse: X and y disagree or are empty");
  Workspace ws(p);
  double s = 0.0;
  for (std::size_t i = 0; i < X.rows(); ++i) {
    const double e = y[i] - forward_into(p, X.row(i), ws);
    s += e * e;
  }
  return s / static_cast<double>(X.rows());
}

MlpRun sgd_train(const Dataset& d, const MlpSpec& spec, const AugmentationSpec& aug, std::optional<std::size_t> batch,
                 double eta, std::size_t epochs, const SgdOptions& options) {
  validate(spec);
  if (spec.widths.front() != d.m()) {
    throw ShapeError("sgd_train: network input width " + std::to_string(spec.widths.front()) + " vs m=" +
                     std::to_string(d.m()));
  }
  if (aug.mode == NoiseMode::online) throw ParameterError("sgd_train: only off-line augmentation is supported");
  if (!(eta > 0.0)) throw ParameterError("sgd_train: eta must be > 0");

  const std::size_t n = d.n();
  const std::size_t m = d.m();
  const NoiseBank bank = make_noise_bank(d, aug);
  const std::size_t copies = bank.K() + 1;
  const std::size_t N = copies * n;
  const std::size_t B = batch.value_or(N);
  if (B == 0 || N % B != 0) {
    throw ParameterError("sgd_train: batch size " + std::to_string(B) + " does not divide augmented size " +
                         std::to_string(N));
  }

  Mat X(N, m);
  Vec y(N);
  for (std::size_t k = 0; k < copies; ++k) {
    const Mat u = bank.noise(0, k);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < m; ++j) X(k * n + i, j) = d.X(i, j) + u(i, j);
      y[k * n + i] = d.y[i];
    }
  }

  MlpRun run;
  run.params = init_params(spec);
  Workspace ws(run.params);

  // Per-copy MSE combined by running mean: identical copies reproduce the
  // single-copy value exactly.
  auto training_mse = [&](const MlpParams& p) {
    double mean = 0.0;
    for (std::size_t k = 0; k < copies; ++k) {
      double s = 0.0;
      for (std::size_t i = k * n; i < (k + 1) * n; ++i) {
        const double e = y[i] - forward_into(p, X.row(i), ws);
        s += e * e;
      }
      mean += (s / static_cast<double>(n) - mean) / static_cast<double>(k + 1);
    }
    return mean;
  };

  std::vector<std::size_t> order(N);
  std::iota(order.begin(), order.end(), 0);
  run.curve.reserve(epochs + 1);
  run.curve.push_back(training_mse(run.params));

  for (std::size_t t = 1; t <= epochs; ++t) {
    if (options.shuffle) {
      const std::uint64_t stream = derive_stream({kTagShuffle, t});
      for (std::size_t i = N - 1; i > 0; --i) {
        const auto bits = philox4x32_10(
            {static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(std::uint64_t{i} >> 32),
             static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)},
            {static_cast<std::uint32_t>(options.shuffle_seed), static_cast<std::uint32_t>(options.shuffle_seed >> 32)});
        const std::uint64_t r = (static_cast<std::uint64_t>(bits[0]) << 32) | bits[1];
        std::swap(order[i], order[r % (i + 1)]);
      }
    }
    for (std::size_t s = 0; s < N; s += B) {
      const std::span<const std::size_t> rows(order.data() + s, B);
      MlpParams g;
      if (options.shuffle) {
        g = mean_grad(run.params, X, y, rows, ws);
      } else {
        // Split at copy boundaries and combine chunk means by weighted running mean.
        std::size_t done = 0;
        for (std::size_t lo = 0; lo < B;) {
          const std::size_t copy_end = (rows[lo] / n + 1) * n;
          const std::size_t len = std::min(B - lo, copy_end - rows[lo]);
          MlpParams chunk = mean_grad(run.params, X, y, rows.subspan(lo, len), ws);
          if (done == 0) {
            g = std::move(chunk);
          } else {
            running_mean(g, chunk, static_cast<double>(len) / static_cast<double>(done + len));
          }
          done += len;
          lo += len;
        }
      }
      run.params.axpy(-eta, g);
    }
    if (!run.params.all_finite() || run.params.max_abs() > kDivergenceBound) {
      throw DivergenceError(t, "sgd_train: network diverged at epoch " + std::to_string(t));
    }
    run.curve.push_back(training_mse(run.params));
  }
  return run;
}

}  // namespace dagd
