#include <doctest.h>

#include <cstdlib>
#include <fstream>
#include <string>

#include "dagd/experiment.hpp"
#include "support.hpp"

using namespace dagd;
using nlohmann::json;

namespace {

const RunSpec& run_named(const ExperimentConfig& c, const std::string& label) {
  for (const auto& r : c.runs)
    if (r.label == label) return r;
  FAIL("no run " << label);
  return c.runs.front();
}

std::string config_error_field(const json& doc) {
  try {
    parse_config(doc);
  } catch (const ConfigError& e) {
    return e.field();
  }
  return "<none>";
}

int cli(const std::string& args) {
  const std::string cmd = std::string(DAGD_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::size_t line_count(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::size_t n = 0;
  for (std::string line; std::getline(in, line);) ++n;
  return n;
}

}  // namespace

TEST_SUITE("experiment") {

TEST_CASE("preset parameter tables") {
  struct Row {
    const char* name;
    const char* criterion;
    std::size_t m, epochs, K;
    double tau, eta, ridge_eta, lambda;
    std::size_t batch;
  };
  const Row rows[] = {
      {"fig2a", "SSE", 15, 1000, 4, 1.0, 0.001, 0.005, 0.8, 0},
      {"fig2b", "MSE", 15, 1000, 4, 1.0, 0.02, 0.02, 0.04, 0},
      {"fig2c", "MB", 15, 1000, 4, 1.0, 0.004, 0.02, 0.04, 5},
      {"fig2d", "MB", 15, 1000, 1, 1.0, 0.004, 0.008, 0.025, 5},
      {"fig3a", "MB", 100, 3000, 2, 2.0, 0.0004, 0.0012, 8.0 / 60.0, 5},
      {"fig3b", "MB", 100, 3000, 5, 2.0, 0.0004, 0.0024, 20.0 / 120.0, 5},
  };
  for (const Row& r : rows) {
    CAPTURE(r.name);
    const ExperimentConfig c = preset(r.name);
    REQUIRE(c.dataset.synthetic);
    CHECK(c.dataset.synthetic->n == 20);
    CHECK(c.dataset.synthetic->m == r.m);
    CHECK(c.dataset.synthetic->sigma_x == 0.5);
    CHECK(c.dataset.synthetic->sigma == 0.2);
    CHECK(c.runs.size() == 4);
    CHECK(c.seeds.size() == 5);
    CHECK(c.reference == "ridge");
    for (const auto& run : c.runs) {
      CHECK(to_string(run.criterion) == r.criterion);
      CHECK(run.epochs == r.epochs);
      if (r.batch) {
        REQUIRE(run.batch);
        CHECK(*run.batch == r.batch);
      }
    }
    CHECK(run_named(c, "naive").eta == doctest::Approx(r.eta).epsilon(1e-12));
    for (const char* da : {"da-online", "da-offline"}) {
      CHECK(run_named(c, da).eta == doctest::Approx(r.eta).epsilon(1e-12));
      CHECK(run_named(c, da).K == r.K);
      CHECK(run_named(c, da).tau == r.tau);
    }
    CHECK(run_named(c, "ridge").eta == doctest::Approx(r.ridge_eta).epsilon(1e-12));
    CHECK(run_named(c, "ridge").lambda == doctest::Approx(r.lambda).epsilon(1e-12));
  }
}

TEST_CASE("network preset") {
  const ExperimentConfig c = preset("fig4-synthetic");
  REQUIRE(c.dataset.synthetic);
  CHECK(c.dataset.synthetic->n == 80);
  CHECK(c.dataset.synthetic->m == 8);
  for (const auto& r : c.runs) {
    CHECK(r.model == ModelKind::mlp);
    CHECK(r.hidden == std::vector<std::size_t>{32, 32});
    if (r.regime == Regime::da_offline) {
      CHECK(r.K == 2);
      CHECK(r.tau == 0.2);
    }
    if (r.criterion == Criterion::mb) CHECK(r.batch == std::optional<std::size_t>(20));
  }
}

TEST_CASE("unknown preset lists the valid names") {
  try {
    preset("fig9");
    FAIL("expected an error");
  } catch (const ConfigError& e) {
    const std::string msg = e.what();
    for (const auto& name : preset_names()) CHECK(msg.find(name) != std::string::npos);
  }
}

TEST_CASE("config round trip and overrides") {
  for (const auto& name : preset_names()) {
    const ExperimentConfig c = preset(name);
    CHECK(to_json(parse_config(to_json(c))) == to_json(c));
  }
  const ExperimentConfig c = parse_config(json{{"preset", "fig2a"}, {"epochs", 7}, {"seeds", {3}}});
  CHECK(c.seeds == std::vector<std::uint64_t>{3});
  for (const auto& r : c.runs) CHECK(r.epochs == 7);
  const ExperimentConfig d = parse_config(json{{"preset", "fig2a"}, {"dataset", {{"synthetic", {{"n", 40}}}}}});
  CHECK(d.dataset.synthetic->n == 40);
  CHECK(d.dataset.synthetic->m == 15);
}

TEST_CASE("schema violations name the field") {
  json doc = to_json(preset("fig2c"));
  doc["runs"][1].erase("batch");
  CHECK(config_error_field(doc) == "runs[1].batch");
  doc = to_json(preset("fig2a"));
  doc["runs"][0]["eta"] = "fast";
  CHECK(config_error_field(doc) == "runs[0].eta");
  doc = to_json(preset("fig2a"));
  doc["runs"][2]["regime"] = "sideways";
  CHECK(config_error_field(doc) == "runs[2].regime");
  doc = to_json(preset("fig2a"));
  doc["seeds"] = json::array();
  CHECK(config_error_field(doc) == "seeds");
  doc = to_json(preset("fig2a"));
  doc["reference"] = "nobody";
  CHECK(config_error_field(doc) == "reference");
  doc = to_json(preset("fig2a"));
  doc["runs"][0]["eta"] = -1.0;
  CHECK(config_error_field(doc) == "runs[0].eta");
  CHECK(config_error_field(json{{"preset", "nope"}}) == "preset");
}

TEST_CASE("zero epochs write only the initial error") {
  test::TempDir dir("zero");
  ExperimentConfig c = preset("fig2a");
  for (auto& r : c.runs) r.epochs = 0;
  c.out_dir = dir.path().string();
  const RunManifest m = run_experiment(c);
  CHECK(m.runs.size() == 20);
  for (const auto& r : m.runs) CHECK(line_count(dir.path() / r.path) == 2);
  const std::string first = test::slurp(dir.path() / m.runs.front().path);
  CHECK(first.rfind(std::string(kCurveHeader) + "\n0,naive,SSE,0,", 0) == 0);
}

TEST_CASE("manifest reproduces byte-identical outputs") {
  test::TempDir a("man-a"), b("man-b");
  ExperimentConfig c = preset("fig2c");
  for (auto& r : c.runs) r.epochs = 40;
  c.seeds = {4, 9};
  c.out_dir = a.path().string();
  const RunManifest m = run_experiment(c);
  REQUIRE(std::filesystem::exists(a.path() / "manifest.json"));
  const json man = json::parse(test::slurp(a.path() / "manifest.json"));
  CHECK(man.at("rng") == std::string(kRngIdentity));
  CHECK(man.at("version") == kVersion);
  ExperimentConfig again = parse_config(man);
  again.out_dir = b.path().string();
  run_experiment(again);
  for (const auto& r : m.runs) CHECK(test::slurp(a.path() / r.path) == test::slurp(b.path() / r.path));
  for (const auto& p : m.medians) CHECK(test::slurp(a.path() / p) == test::slurp(b.path() / p));
  CHECK(test::slurp(a.path() / "summary.csv") == test::slurp(b.path() / "summary.csv"));
  CHECK(line_count(a.path() / "summary.csv") == 1 + 3 * 2);
}

TEST_CASE("duplicate seeds are accepted and suffixed") {
  test::TempDir dir("dup");
  ExperimentConfig c = preset("fig2a");
  c.runs.resize(1);
  c.runs[0].epochs = 3;
  c.reference.clear();
  c.seeds = {2, 2};
  c.out_dir = dir.path().string();
  const RunManifest m = run_experiment(c);
  REQUIRE(m.runs.size() == 2);
  CHECK(m.runs[0].path != m.runs[1].path);
  CHECK(std::filesystem::exists(dir.path() / m.runs[1].path));
}

TEST_CASE("csv dataset with off-line mini-batch DA runs end to end") {
  test::TempDir dir("csv");
  std::string csv = "a,b,c,target\n";
  const Dataset src = gen_synthetic(SyntheticSpec{12, 3, 1.0, 0.1, 8});
  for (std::size_t i = 0; i < 12; ++i) {
    for (std::size_t j = 0; j < 3; ++j) csv += std::to_string(src.X(i, j)) + ",";
    csv += std::to_string(src.y[i]) + "\n";
  }
  const auto path = dir.write("data.csv", csv);
  const json doc = {{"name", "csv-smoke"},
                    {"dataset", {{"csv", {{"path", path.string()}, {"target", "target"}}}}},
                    {"runs",
                     {{{"regime", "da-offline"}, {"criterion", "MB"}, {"eta", 0.01}, {"epochs", 25}, {"batch", 4},
                       {"K", 2}, {"tau", 0.5}},
                      {{"regime", "naive"}, {"criterion", "MB"}, {"eta", 0.01}, {"epochs", 25}, {"batch", 4}}}},
                    {"seeds", {1, 2}},
                    {"reference", "naive"},
                    {"out", (dir.path() / "out").string()}};
  const RunManifest m = run_experiment(parse_config(doc));
  CHECK(m.runs.size() == 4);
  CHECK(line_count(dir.path() / "out" / m.runs[0].path) == 27);
  CHECK(line_count(dir.path() / "out" / "summary.csv") == 3);
}

TEST_CASE("batch size must divide n") {
  ExperimentConfig c = preset("fig2c");
  c.runs[0].batch = 3;
  c.out_dir = "unused";
  try {
    run_experiment(c);
    FAIL("expected a config error");
  } catch (const ConfigError& e) {
    CHECK(e.field() == "runs[0].batch");
  }
}

TEST_CASE("output root from the environment") {
  ExperimentConfig c = preset("fig2a");
  ::setenv(kOutputRootEnv, "/tmp/dagd-root", 1);
  CHECK(resolve_out_dir(c) == std::filesystem::path("/tmp/dagd-root/fig2a"));
  ::unsetenv(kOutputRootEnv);
  CHECK(resolve_out_dir(c) == std::filesystem::path("dagd-out/fig2a"));
  c.out_dir = "/x/y";
  CHECK(resolve_out_dir(c) == std::filesystem::path("/x/y"));
}

TEST_CASE("verify suite") {
  test::TempDir dir("verify");
  VerifyOptions opts;
  opts.out_dir = dir.path();
  const VerifyReport r = run_verify(VerifyLevel::quick, opts);
  CHECK(r.all_pass());
  for (const auto& c : r.certificates) CHECK(c.n_draws == 1000);
  CHECK(std::filesystem::exists(dir.path() / "certificates.txt"));
  CHECK(line_count(dir.path() / "certificates.csv") == r.certificates.size() + 1);
  std::size_t zero_tau = 0;
  for (const auto& c : r.certificates) {
    if (c.claim_id.find("[tau=0]") == std::string::npos) continue;
    ++zero_tau;
    CHECK(c.pass);
    for (double se : c.std_error) CHECK(se == 0.0);
  }
  CHECK(zero_tau == 3);
}

TEST_CASE("verify catches a sign error in r_sse") {
  VerifyOptions opts;
  opts.sampler_override = [](const Dataset& d, const Vec& w, const UpdateRule& rule) -> UpdateSampler {
    if (rule.kind != UpdateRule::Kind::sse) return rule_sampler(d, w, rule);
    return [&d, w](const NoiseBank& b, std::uint64_t t) {
      const double K1 = static_cast<double>(b.K() + 1);
      return K1 * delta_s(d, w) - 2.0 * r_sse(d, b, t, w);
    };
  };
  const VerifyReport r = run_verify(VerifyLevel::quick, opts);
  CHECK_FALSE(r.all_pass());
  for (const auto& c : r.certificates) {
    if (c.claim_id.rfind("sse#", 0) == 0) CHECK_FALSE(c.pass);
    if (c.claim_id.rfind("mse#", 0) == 0) CHECK(c.pass);
  }
}

TEST_CASE("command-line exit codes") {
  test::TempDir dir("cli");
  CHECK(cli("presets") == 0);
  CHECK(cli("run --preset fig9") == 2);
  CHECK(cli("run") == 2);
  CHECK(cli("verify --level quick --out " + dir.path().string()) == 0);
  const auto bad = dir.write("bad.json", R"({"preset":"fig2c","runs":[{"regime":"naive","criterion":"MB","eta":0.1,"epochs":1}]})");
  CHECK(cli("run --config " + bad.string()) == 2);
  const auto boom = dir.write(
      "boom.json", R"({"preset":"fig2a","runs":[{"regime":"naive","criterion":"SSE","eta":5.0,"epochs":500}],"reference":""})");
  CHECK(cli("run --config " + boom.string() + " --out " + (dir.path() / "boom").string()) == 3);
  CHECK(cli("run --preset fig2a --epochs 2 --seeds 1,2 --out " + (dir.path() / "ok").string()) == 0);
  CHECK(std::filesystem::exists(dir.path() / "ok" / "runs" / "naive_s2.csv"));
}

}
