#include <doctest.h>

#include <cmath>
#include <random>
#include <set>
#include <string>

#include "dagd/data.hpp"
#include "support.hpp"

using namespace dagd;

namespace {

double entry_mean(const Mat& u) {
  double s = 0.0;
  for (double x : u.entries()) s += x;
  return s / static_cast<double>(u.entries().size());
}

}  // namespace

TEST_SUITE("data") {

TEST_CASE("synthetic data has the requested shape") {
  const Dataset d = gen_synthetic(SyntheticSpec{20, 15, 0.5, 0.2, 1});
  CHECK(d.n() == 20);
  CHECK(d.m() == 15);
  CHECK(gen_synthetic(SyntheticSpec{20, 15, 0.5, 0.2, 1}).X == d.X);
  CHECK_FALSE(gen_synthetic(SyntheticSpec{20, 15, 0.5, 0.2, 2}).X == d.X);
  CHECK_THROWS_AS(gen_synthetic(SyntheticSpec{20, 1, 0.5, 0.2, 1}), ParameterError);
}

TEST_CASE("noiseless synthetic targets are x1 - x2 exactly") {
  const Dataset d = gen_synthetic(SyntheticSpec{50, 4, 0.5, 0.0, 3});
  for (std::size_t i = 0; i < d.n(); ++i) CHECK(d.y[i] == d.X(i, 0) - d.X(i, 1));
}

TEST_CASE("least squares recovers the true model on noiseless data") {
  const Dataset d = gen_synthetic(SyntheticSpec{1000, 2, 0.5, 0.0, 4});
  const Vec w = test::ridge_solution(d, 0.0);
  CHECK(std::abs(w[0] - 1.0) <= 1e-8);
  CHECK(std::abs(w[1] + 1.0) <= 1e-8);
  const Vec r = d.y - matvec(d.X, w);
  CHECK(norm(r) <= 1e-10);
}

TEST_CASE("sample moments of synthetic inputs") {
  const Dataset d = gen_synthetic(SyntheticSpec{4000, 5, 0.5, 0.2, 5});
  const double n = static_cast<double>(d.X.entries().size());
  double s2 = 0.0;
  for (double x : d.X.entries()) s2 += x * x;
  CHECK(std::abs(s2 / n - 0.25) <= 5.0 * 0.25 * std::sqrt(2.0 / n));
}

TEST_CASE("csv ingestion") {
  test::TempDir dir("csv");
  SUBCASE("hand-parsed file") {
    const Dataset d = load_csv(dir.write("a.csv", "a,b,t\n1,2,3\n4,5,6\n7,8,9\n"), "t");
    CHECK(d.n() == 3);
    CHECK(d.m() == 2);
    CHECK(d.y == Vec{3, 6, 9});
    CHECK(d.X == Mat{{1, 2}, {4, 5}, {7, 8}});
    CHECK(d.feature_names == std::vector<std::string>{"a", "b"});
  }
  SUBCASE("target in the middle keeps feature order") {
    const Dataset d = load_csv(dir.write("b.csv", "a,t,b\n1,2,3\n4,5,6\n"), "t");
    CHECK(d.X == Mat{{1, 3}, {4, 6}});
    CHECK(d.y == Vec{2, 5});
  }
  SUBCASE("empty data section") {
    try {
      load_csv(dir.write("c.csv", "a,b,t\n"), "t");
      FAIL("expected an ingestion error");
    } catch (const IngestError& e) {
      CHECK(e.kind() == IngestError::Kind::empty_data);
    }
  }
  SUBCASE("absent target names the column") {
    try {
      load_csv(dir.write("d.csv", "a,b\n1,2\n"), "price");
      FAIL("expected an ingestion error");
    } catch (const IngestError& e) {
      CHECK(e.kind() == IngestError::Kind::missing_column);
      CHECK(std::string(e.what()).find("price") != std::string::npos);
    }
  }
  SUBCASE("non-numeric cell reports its location") {
    try {
      load_csv(dir.write("e.csv", "a,b,t\n1,2,3\n4,x,6\n"), "t");
      FAIL("expected an ingestion error");
    } catch (const IngestError& e) {
      CHECK(e.kind() == IngestError::Kind::non_numeric);
      CHECK(e.row() == 3);
      CHECK(e.col() == 2);
    }
  }
  SUBCASE("missing file") {
    try {
      load_csv(dir.path() / "nope.csv", "t");
      FAIL("expected an ingestion error");
    } catch (const IngestError& e) {
      CHECK(e.kind() == IngestError::Kind::missing_file);
    }
  }
  SUBCASE("ragged row") {
    try {
      load_csv(dir.write("f.csv", "a,b,t\n1,2,3\n4,5\n"), "t");
      FAIL("expected an ingestion error");
    } catch (const IngestError& e) {
      CHECK(e.kind() == IngestError::Kind::ragged_row);
      CHECK(e.row() == 3);
    }
  }
}

TEST_CASE("standardize uses the population convention") {
  const Dataset d(Mat{{1, 10}, {2, 20}, {3, 60}}, Vec{1, 2, 3});
  const Dataset s = standardize(d);
  const double sd = std::sqrt(2.0 / 3.0);
  CHECK(s.X(0, 0) == doctest::Approx(-1.0 / sd).epsilon(1e-14));
  CHECK(s.X(1, 0) == doctest::Approx(0.0));
  CHECK(s.X(2, 0) == doctest::Approx(1.0 / sd).epsilon(1e-14));
  CHECK(s.y == d.y);
  const Dataset again = standardize(s);
  CHECK(test::max_abs_diff(Vec(std::vector<double>(again.X.entries().begin(), again.X.entries().end())),
                           Vec(std::vector<double>(s.X.entries().begin(), s.X.entries().end()))) <= 1e-12);
}

TEST_CASE("standardize rejects a constant column by name") {
  Dataset d(Mat{{1, 5}, {2, 5}}, Vec{0, 1});
  d.feature_names = {"a", "flat"};
  try {
    standardize(d);
    FAIL("expected an error");
  } catch (const IngestError& e) {
    CHECK(e.kind() == IngestError::Kind::constant_column);
    CHECK(std::string(e.what()).find("flat") != std::string::npos);
  }
}

TEST_CASE("noise bank basics") {
  const Dataset d = gen_synthetic(SyntheticSpec{8, 3, 0.5, 0.2, 1});
  SUBCASE("tau = 0 gives zero matrices") {
    const NoiseBank b = make_noise_bank(d, AugmentationSpec{3, 0.0, NoiseMode::online, 1});
    for (std::size_t k = 0; k <= 3; ++k) CHECK(b.noise(5, k) == Mat(8, 3));
  }
  SUBCASE("copy zero is always noiseless") {
    const NoiseBank b = make_noise_bank(d, AugmentationSpec{2, 1.0, NoiseMode::online, 1});
    CHECK(b.noise(1, 0) == Mat(8, 3));
    CHECK(b.element_sd() == doctest::Approx(1.0 / std::sqrt(8.0)));
    CHECK_THROWS_AS(b.noise(1, 3), ParameterError);
  }
  SUBCASE("mode none has no copies") {
    const NoiseBank b = make_noise_bank(d, AugmentationSpec{4, 1.0, NoiseMode::none, 1});
    CHECK(b.K() == 0);
  }
  SUBCASE("off-line copies are fixed across epochs") {
    const NoiseBank b = make_noise_bank(d, AugmentationSpec{2, 1.0, NoiseMode::offline, 9});
    const Mat u = b.noise(1, 1);
    CHECK(b.noise(9, 1) == u);
    std::mt19937_64 rng(1);
    for (int i = 0; i < 10; ++i) CHECK(b.noise(rng() % 100000, 1) == u);
    CHECK_FALSE(b.noise(1, 2) == u);
  }
  SUBCASE("on-line copies are replayable and vary with the epoch") {
    const NoiseBank b = make_noise_bank(d, AugmentationSpec{2, 1.0, NoiseMode::online, 9});
    CHECK(b.noise(4, 1) == b.noise(4, 1));
    CHECK_FALSE(b.noise(4, 1) == b.noise(5, 1));
    CHECK_FALSE(b.noise(4, 1) == b.noise(4, 2));
  }
  SUBCASE("negated bank") {
    const NoiseBank b = make_noise_bank(d, AugmentationSpec{1, 1.0, NoiseMode::online, 9});
    const Mat u = b.noise(3, 1);
    const Mat v = b.negated().noise(3, 1);
    for (std::size_t i = 0; i < u.entries().size(); ++i) CHECK(v.entries()[i] == -u.entries()[i]);
  }
}

TEST_CASE("noise entries have mean 0 and variance tau^2/n") {
  const std::size_t n = 10, m = 10;
  const double tau = 2.0;
  const Dataset d(Mat(n, m, 1.0), Vec(n, 0.0));
  const NoiseBank b = make_noise_bank(d, AugmentationSpec{1, tau, NoiseMode::online, 77});
  double s = 0.0, s2 = 0.0;
  std::size_t count = 0;
  for (std::uint64_t t = 1; t <= 1000; ++t) {
    const Mat u = b.noise(t, 1);
    for (double x : u.entries()) {
      s += x;
      s2 += x * x;
      ++count;
    }
  }
  const double N = static_cast<double>(count);
  const double var = tau * tau / static_cast<double>(n);
  CHECK(std::abs(s / N) <= 5.0 * std::sqrt(var / N));
  CHECK(std::abs(s2 / N - var) <= 5.0 * var * std::sqrt(2.0 / N));
  CHECK(std::abs(entry_mean(b.noise(1, 1))) < 1.0);
}

TEST_CASE("on-line noise covariance over epochs is (tau^2/n) I") {
  const std::size_t n = 2, m = 2, dim = n * m;
  const double tau = 1.0;
  const Dataset d(Mat(n, m, 1.0), Vec(n, 0.0));
  const NoiseBank b = make_noise_bank(d, AugmentationSpec{1, tau, NoiseMode::online, 3});
  const std::size_t T = 10000;
  std::vector<double> c(dim * dim, 0.0);
  for (std::uint64_t t = 1; t <= T; ++t) {
    const Mat u = b.noise(t, 1);
    for (std::size_t i = 0; i < dim; ++i)
      for (std::size_t j = 0; j < dim; ++j) c[i * dim + j] += u.entries()[i] * u.entries()[j];
  }
  const double var = tau * tau / static_cast<double>(n);
  for (std::size_t i = 0; i < dim; ++i) {
    for (std::size_t j = 0; j < dim; ++j) {
      const double est = c[i * dim + j] / static_cast<double>(T);
      const double se = var * (i == j ? std::sqrt(2.0) : 1.0) / std::sqrt(static_cast<double>(T));
      CHECK(std::abs(est - (i == j ? var : 0.0)) <= 5.0 * se);
    }
  }
}

TEST_CASE("on-line noise of distinct epochs is uncorrelated") {
  const std::size_t n = 20, m = 50;
  const Dataset d(Mat(n, m, 1.0), Vec(n, 0.0));
  const NoiseBank b = make_noise_bank(d, AugmentationSpec{1, 1.0, NoiseMode::online, 5});
  const Mat u = b.noise(3, 1), v = b.noise(4, 1);
  const auto a = u.entries(), c = v.entries();
  const double N = static_cast<double>(a.size());
  double sa = 0, sc = 0, saa = 0, scc = 0, sac = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sa += a[i];
    sc += c[i];
    saa += a[i] * a[i];
    scc += c[i] * c[i];
    sac += a[i] * c[i];
  }
  const double cov = sac / N - sa * sc / (N * N);
  const double r = cov / std::sqrt((saa / N - sa * sa / (N * N)) * (scc / N - sc * sc / (N * N)));
  CHECK(std::abs(r) <= 5.0 / std::sqrt(N));
}

TEST_CASE("partition into contiguous blocks") {
  const BatchPartition p = partition(20, 5);
  CHECK(p.Q == 4);
  CHECK(p.rho == 5);
  CHECK(p.blocks[0] == IndexSet{0, 1, 2, 3, 4});
  std::set<std::size_t> seen;
  for (const auto& b : p.blocks) {
    CHECK(b.size() == 5);
    seen.insert(b.begin(), b.end());
  }
  CHECK(seen.size() == 20);
  CHECK(*seen.rbegin() == 19);

  const BatchPartition one = partition(7, 7);
  CHECK(one.Q == 1);
  CHECK(one.blocks[0] == IndexSet{0, 1, 2, 3, 4, 5, 6});

  try {
    partition(6, 4);
    FAIL("expected a parameter error");
  } catch (const ParameterError& e) {
    const std::string msg = e.what();
    CHECK(msg.find('6') != std::string::npos);
    CHECK(msg.find('4') != std::string::npos);
  }
}

TEST_CASE("slice keeps the requested order") {
  const Dataset d(Mat{{1, 2}, {3, 4}, {5, 6}}, Vec{7, 8, 9});
  auto [X, y] = slice(d, IndexSet{0, 1, 2});
  CHECK(X == d.X);
  CHECK(y == d.y);
  auto [X1, y1] = slice(d, IndexSet{1});
  CHECK(X1 == Mat{{3, 4}});
  CHECK(y1 == Vec{8});
  auto [X2, y2] = slice(d, IndexSet{2, 0});
  CHECK(X2 == Mat{{5, 6}, {1, 2}});
  CHECK(y2 == Vec{9, 7});
  CHECK_THROWS_AS(slice(d, IndexSet{3}), ShapeError);
}

TEST_CASE("dataset shape checks") {
  CHECK_THROWS_AS(Dataset(Mat(2, 2), Vec(3)), ShapeError);
  CHECK_THROWS_AS(Dataset(Mat(0, 2), Vec(0)), ShapeError);
}

}
