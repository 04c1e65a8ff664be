#include "dagd/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

namespace dagd {

using nlohmann::json;

namespace {

// ---------------------------------------------------------------------------
// Presets

SyntheticSpec under_param_data() { return SyntheticSpec{20, 15, 0.5, 0.2, 1}; }
SyntheticSpec over_param_data() { return SyntheticSpec{20, 100, 0.5, 0.2, 1}; }

RunSpec linear_run(Regime regime, Criterion crit, double eta, std::size_t epochs, std::size_t K, double tau,
                   std::optional<std::size_t> batch, double lambda = 0.0) {
  RunSpec r;
  r.label = std::string(to_string(regime));
  r.model = ModelKind::linear;
  r.regime = regime;
  r.criterion = crit;
  r.eta = eta;
  r.lambda = lambda;
  r.epochs = epochs;
  r.batch = batch;
  r.K = K;
  r.tau = tau;
  return r;
}

// naive GD, GD-REG with the derived (rate, lambda), and both DA variants.
std::vector<RunSpec> figure_runs(Criterion crit, double eta, std::size_t epochs, std::size_t K, double tau,
                                 std::size_t n, std::optional<std::size_t> batch) {
  double ridge_eta = eta;
  double ridge_lambda = 0.0;
  switch (crit) {
    case Criterion::sse:
      ridge_eta = static_cast<double>(K + 1) * eta;
      ridge_lambda = sse_equiv_lambda(K, tau);
      break;
    case Criterion::mse:
      ridge_lambda = mse_equiv_lambda(K, tau, n);
      break;
    case Criterion::mb:
      ridge_eta = static_cast<double>(K + 1) * eta;
      ridge_lambda = mse_equiv_lambda(K, tau, n);
      break;
  }
  return {
      linear_run(Regime::naive, crit, eta, epochs, 0, 0.0, batch),
      linear_run(Regime::ridge, crit, ridge_eta, epochs, K, tau, batch, ridge_lambda),
      linear_run(Regime::da_offline, crit, eta, epochs, K, tau, batch),
      linear_run(Regime::da_online, crit, eta, epochs, K, tau, batch),
  };
}

ExperimentConfig linear_figure(std::string name, SyntheticSpec data, Criterion crit, double eta,
                               std::size_t epochs, std::size_t K, double tau, std::optional<std::size_t> batch) {
  ExperimentConfig c;
  c.name = std::move(name);
  c.dataset.synthetic = data;
  c.runs = figure_runs(crit, eta, epochs, K, tau, data.n, batch);
  c.seeds = {1, 2, 3, 4, 5};
  c.reference = "ridge";
  return c;
}

RunSpec mlp_run(std::string label, Regime regime, Criterion crit, double eta, std::size_t epochs, std::size_t K,
                double tau, std::optional<std::size_t> batch) {
  RunSpec r;
  r.label = std::move(label);
  r.model = ModelKind::mlp;
  r.regime = regime;
  r.criterion = crit;
  r.eta = eta;
  r.epochs = epochs;
  r.batch = batch;
  r.K = K;
  r.tau = tau;
  r.hidden = {32, 32};
  return r;
}

ExperimentConfig fig4_synthetic() {
  constexpr double kEtaMb = 5e-3;
  constexpr double kEtaFb = 2e-2;
  constexpr std::size_t kEpochs = 3000;
  constexpr std::size_t kK = 2;
  constexpr double kTau = 0.2;
  constexpr std::size_t kBatch = 20;
  ExperimentConfig c;
  c.name = "fig4-synthetic";
  c.dataset.synthetic = SyntheticSpec{80, 8, 1.0, 0.2, 1};
  c.runs = {
      mlp_run("naive-MB", Regime::naive, Criterion::mb, kEtaMb, kEpochs, 0, 0.0, kBatch),
      mlp_run("da-offline-MB", Regime::da_offline, Criterion::mb, kEtaMb, kEpochs, kK, kTau, kBatch),
      mlp_run("naive-FB", Regime::naive, Criterion::mse, kEtaFb, kEpochs, 0, 0.0, std::nullopt),
      mlp_run("da-offline-FB", Regime::da_offline, Criterion::mse, kEtaFb, kEpochs, kK, kTau, std::nullopt),
  };
  c.seeds = {1, 2, 3, 4, 5};
  return c;
}

// ---------------------------------------------------------------------------
// JSON helpers

bool is_count(const json& v) { return v.is_number_unsigned() || (v.is_number_integer() && v.get<std::int64_t>() >= 0); }

std::string join(const std::string& path, const std::string& key) { return path.empty() ? key : path + "." + key; }

const json* find(const json& j, const char* key) {
  const auto it = j.find(key);
  return it == j.end() ? nullptr : &*it;
}

double get_number(const json& j, const char* key, const std::string& path, std::optional<double> fallback = {}) {
  const json* v = find(j, key);
  if (!v) {
    if (fallback) return *fallback;
    throw ConfigError("required number is missing", join(path, key));
  }
  if (!v->is_number()) throw ConfigError("expected a number", join(path, key));
  return v->get<double>();
}

std::uint64_t get_uint(const json& j, const char* key, const std::string& path,
                       std::optional<std::uint64_t> fallback = {}) {
  const json* v = find(j, key);
  if (!v) {
    if (fallback) return *fallback;
    throw ConfigError("required integer is missing", join(path, key));
  }
  if (!is_count(*v)) {
    throw ConfigError("expected a non-negative integer", join(path, key));
  }
  return v->get<std::uint64_t>();
}

std::string get_string(const json& j, const char* key, const std::string& path,
                       std::optional<std::string> fallback = {}) {
  const json* v = find(j, key);
  if (!v) {
    if (fallback) return *fallback;
    throw ConfigError("required string is missing", join(path, key));
  }
  if (!v->is_string()) throw ConfigError("expected a string", join(path, key));
  return v->get<std::string>();
}

std::string fmt(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

RunSpec parse_run(const json& j, const std::string& path) {
  if (!j.is_object()) throw ConfigError("expected an object", path);
  RunSpec r;
  const std::string model = get_string(j, "model", path, "linear");
  if (model == "linear") {
    r.model = ModelKind::linear;
  } else if (model == "mlp") {
    r.model = ModelKind::mlp;
  } else {
    throw ConfigError("unknown model '" + model + "' (linear|mlp)", join(path, "model"));
  }
  const std::string regime = get_string(j, "regime", path);
  const auto rg = parse_regime(regime);
  if (!rg) throw ConfigError("unknown regime '" + regime + "'", join(path, "regime"));
  r.regime = *rg;
  const std::string crit = get_string(j, "criterion", path);
  const auto cr = parse_criterion(crit);
  if (!cr) throw ConfigError("unknown criterion '" + crit + "' (SSE|MSE|MB)", join(path, "criterion"));
  r.criterion = *cr;
  r.label = get_string(j, "label", path, std::string(to_string(r.regime)));
  r.eta = get_number(j, "eta", path);
  r.lambda = get_number(j, "lambda", path, 0.0);
  r.epochs = get_uint(j, "epochs", path);
  if (find(j, "batch") && !j.at("batch").is_null()) r.batch = get_uint(j, "batch", path);
  r.K = get_uint(j, "K", path, 0);
  r.tau = get_number(j, "tau", path, 0.0);
  if (const json* h = find(j, "hidden")) {
    if (!h->is_array()) throw ConfigError("expected an array of widths", join(path, "hidden"));
    for (std::size_t i = 0; i < h->size(); ++i) {
      const auto& v = (*h)[i];
      if (!is_count(v) || v.get<std::size_t>() == 0) {
        throw ConfigError("expected a positive integer", join(path, "hidden") + "[" + std::to_string(i) + "]");
      }
      r.hidden.push_back(v.get<std::size_t>());
    }
  }
  return r;
}

json run_to_json(const RunSpec& r) {
  json j = {{"label", r.label},
            {"model", r.model == ModelKind::linear ? "linear" : "mlp"},
            {"regime", std::string(to_string(r.regime))},
            {"criterion", std::string(to_string(r.criterion))},
            {"eta", r.eta},
            {"lambda", r.lambda},
            {"epochs", r.epochs},
            {"K", r.K},
            {"tau", r.tau}};
  j["batch"] = r.batch ? json(*r.batch) : json(nullptr);
  if (r.model == ModelKind::mlp) j["hidden"] = r.hidden;
  return j;
}

std::string safe_name(const std::string& s) {
  std::string out = s;
  for (auto& c : out)
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.')) c = '_';
  return out;
}

void write_file(const std::filesystem::path& path, const std::string& contents) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write '" + path.string() + "'");
  out << contents;
  if (!out) throw Error("failed writing '" + path.string() + "'");
}

std::string curve_csv(const RunSpec& r, std::uint64_t seed, const std::vector<double>& curve) {
  std::ostringstream os;
  os << kCurveHeader << '\n';
  const std::string prefix = "," + std::string(to_string(r.regime)) + "," + std::string(to_string(r.criterion)) + "," +
                             std::to_string(r.K) + "," + fmt(r.tau) + "," + fmt(r.eta) + "," + fmt(r.lambda) + "," +
                             std::to_string(seed) + ",";
  for (std::size_t t = 0; t < curve.size(); ++t) os << t << prefix << fmt(curve[t]) << '\n';
  return os.str();
}

}  // namespace

// ---------------------------------------------------------------------------

std::vector<std::string> preset_names() {
  return {"fig2a", "fig2b", "fig2c", "fig2d", "fig3a", "fig3b", "fig4-synthetic"};
}

ExperimentConfig preset(const std::string& name) {
  constexpr std::size_t kFig2Epochs = 1000;
  constexpr std::size_t kFig3Epochs = 3000;
  constexpr double kBaseEta = 0.001;
  constexpr double kOverEta = 0.0001;
  constexpr std::size_t kRho = 5;
  const auto d2 = under_param_data();
  const double Q = static_cast<double>(d2.n / kRho);

  if (name == "fig2a") return linear_figure(name, d2, Criterion::sse, kBaseEta, kFig2Epochs, 4, 1.0, std::nullopt);
  if (name == "fig2b") {
    return linear_figure(name, d2, Criterion::mse, kBaseEta * static_cast<double>(d2.n), kFig2Epochs, 4, 1.0,
                         std::nullopt);
  }
  if (name == "fig2c") return linear_figure(name, d2, Criterion::mb, kBaseEta * Q, kFig2Epochs, 4, 1.0, kRho);
  if (name == "fig2d") return linear_figure(name, d2, Criterion::mb, kBaseEta * Q, kFig2Epochs, 1, 1.0, kRho);
  if (name == "fig3a") {
    return linear_figure(name, over_param_data(), Criterion::mb, kOverEta * Q, kFig3Epochs, 2, 2.0, kRho);
  }
  if (name == "fig3b") {
    return linear_figure(name, over_param_data(), Criterion::mb, kOverEta * Q, kFig3Epochs, 5, 2.0, kRho);
  }
  if (name == "fig4-synthetic") return fig4_synthetic();

  std::string valid;
  for (const auto& p : preset_names()) valid += (valid.empty() ? "" : ", ") + p;
  throw ConfigError("unknown preset '" + name + "'; valid presets: " + valid, "preset");
}

json to_json(const ExperimentConfig& cfg) {
  json j;
  j["name"] = cfg.name;
  if (cfg.dataset.synthetic) {
    const auto& s = *cfg.dataset.synthetic;
    j["dataset"] = {{"synthetic", {{"n", s.n}, {"m", s.m}, {"sigma_x", s.sigma_x}, {"sigma", s.sigma}, {"seed", s.seed}}}};
  } else if (cfg.dataset.csv) {
    const auto& c = *cfg.dataset.csv;
    j["dataset"] = {{"csv", {{"path", c.path}, {"target", c.target}, {"standardize", c.standardize}}}};
  }
  j["runs"] = json::array();
  for (const auto& r : cfg.runs) j["runs"].push_back(run_to_json(r));
  j["seeds"] = cfg.seeds;
  j["out"] = cfg.out_dir;
  j["reference"] = cfg.reference;
  return j;
}

ExperimentConfig parse_config(const json& input) {
  if (!input.is_object()) throw ConfigError("config must be a JSON object");
  // A run manifest carries the resolved config under "config".
  const json& raw = input.contains("config") && input.at("config").is_object() ? input.at("config") : input;

  json doc = raw;
  if (const json* p = find(raw, "preset")) {
    if (!p->is_string()) throw ConfigError("expected a string", "preset");
    doc = to_json(preset(p->get<std::string>()));
    json patch = raw;
    patch.erase("preset");
    doc.merge_patch(patch);
  }

  ExperimentConfig cfg;
  cfg.name = get_string(doc, "name", "", "custom");

  const json* ds = find(doc, "dataset");
  if (!ds || !ds->is_object()) throw ConfigError("required object is missing", "dataset");
  const json* syn = find(*ds, "synthetic");
  const json* csv = find(*ds, "csv");
  if ((syn && !syn->is_null()) == (csv && !csv->is_null())) {
    throw ConfigError("exactly one of 'synthetic' or 'csv' must be given", "dataset");
  }
  if (syn && !syn->is_null()) {
    SyntheticSpec s;
    s.n = get_uint(*syn, "n", "dataset.synthetic");
    s.m = get_uint(*syn, "m", "dataset.synthetic");
    s.sigma_x = get_number(*syn, "sigma_x", "dataset.synthetic");
    s.sigma = get_number(*syn, "sigma", "dataset.synthetic");
    s.seed = get_uint(*syn, "seed", "dataset.synthetic", 1);
    cfg.dataset.synthetic = s;
  } else {
    CsvSource c;
    c.path = get_string(*csv, "path", "dataset.csv");
    c.target = get_string(*csv, "target", "dataset.csv");
    if (const json* st = find(*csv, "standardize")) {
      if (!st->is_boolean()) throw ConfigError("expected a boolean", "dataset.csv.standardize");
      c.standardize = st->get<bool>();
    }
    cfg.dataset.csv = c;
  }

  const json* runs = find(doc, "runs");
  if (!runs || !runs->is_array() || runs->empty()) throw ConfigError("need a non-empty array of runs", "runs");
  for (std::size_t i = 0; i < runs->size(); ++i) cfg.runs.push_back(parse_run((*runs)[i], "runs[" + std::to_string(i) + "]"));

  if (const json* e = find(raw, "epochs")) {
    if (!is_count(*e)) throw ConfigError("expected a non-negative integer", "epochs");
    for (auto& r : cfg.runs) r.epochs = e->get<std::size_t>();
  }

  const json* seeds = find(doc, "seeds");
  if (!seeds || !seeds->is_array() || seeds->empty()) throw ConfigError("need a non-empty array of seeds", "seeds");
  for (std::size_t i = 0; i < seeds->size(); ++i) {
    if (!is_count((*seeds)[i])) {
      throw ConfigError("expected a non-negative integer", "seeds[" + std::to_string(i) + "]");
    }
    cfg.seeds.push_back((*seeds)[i].get<std::uint64_t>());
  }
  cfg.out_dir = get_string(doc, "out", "", "");
  cfg.reference = get_string(doc, "reference", "", "");
  validate(cfg);
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path.string() + "'");
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("invalid JSON: ") + e.what());
  }
  return parse_config(doc);
}

void validate(const ExperimentConfig& cfg) {
  if (cfg.seeds.empty()) throw ConfigError("need at least one seed", "seeds");
  if (cfg.runs.empty()) throw ConfigError("need at least one run", "runs");
  if (cfg.dataset.synthetic.has_value() == cfg.dataset.csv.has_value()) {
    throw ConfigError("exactly one of 'synthetic' or 'csv' must be given", "dataset");
  }
  if (cfg.dataset.synthetic && cfg.dataset.synthetic->m < 2) {
    throw ConfigError("must be >= 2 (the true model uses two coordinates)", "dataset.synthetic.m");
  }
  std::set<std::string> labels;
  for (std::size_t i = 0; i < cfg.runs.size(); ++i) {
    const auto& r = cfg.runs[i];
    const std::string path = "runs[" + std::to_string(i) + "]";
    if (!labels.insert(r.label).second) throw ConfigError("duplicate label '" + r.label + "'", path + ".label");
    if (!(r.eta > 0.0)) throw ConfigError("must be > 0", path + ".eta");
    if (!(r.lambda >= 0.0)) throw ConfigError("must be >= 0", path + ".lambda");
    if (!(r.tau >= 0.0)) throw ConfigError("must be >= 0", path + ".tau");
    if (r.criterion == Criterion::mb && !r.batch) {
      throw ConfigError("criterion MB requires a mini-batch size", path + ".batch");
    }
    if (r.batch && *r.batch == 0) throw ConfigError("must be > 0", path + ".batch");
    if (r.model == ModelKind::linear) {
      if (r.regime == Regime::ridge_mb_equiv && r.criterion != Criterion::mb) {
        throw ConfigError("regime ridge-mb-equiv requires criterion MB", path + ".criterion");
      }
    } else {
      if (r.regime != Regime::naive && r.regime != Regime::da_offline) {
        throw ConfigError("network runs support regimes naive and da-offline", path + ".regime");
      }
      if (r.criterion == Criterion::sse) throw ConfigError("network runs use MSE (full batch) or MB", path + ".criterion");
      if (r.hidden.empty()) throw ConfigError("network runs need at least one hidden width", path + ".hidden");
    }
  }
  if (!cfg.reference.empty() && !labels.count(cfg.reference)) {
    throw ConfigError("no run is labelled '" + cfg.reference + "'", "reference");
  }
}

Dataset build_dataset(const DatasetSource& src) {
  if (src.synthetic) return gen_synthetic(*src.synthetic);
  if (!src.csv) throw ConfigError("no dataset source", "dataset");
  Dataset d = load_csv(src.csv->path, src.csv->target);
  return src.csv->standardize ? standardize(d) : d;
}

std::vector<double> execute_run(const Dataset& d, const RunSpec& run, std::uint64_t seed) {
  if (run.model == ModelKind::linear) {
    TrainerConfig cfg;
    cfg.regime = run.regime;
    cfg.criterion = run.criterion;
    cfg.eta = run.eta;
    cfg.lambda = run.lambda;
    cfg.epochs = run.epochs;
    if (run.criterion == Criterion::mb) cfg.partition = partition(d.n(), run.batch.value_or(0));
    cfg.aug = AugmentationSpec{run.K, run.tau, NoiseMode::none, seed};
    return train(d, cfg).curve;
  }
  MlpSpec spec;
  spec.widths.push_back(d.m());
  spec.widths.insert(spec.widths.end(), run.hidden.begin(), run.hidden.end());
  spec.widths.push_back(1);
  spec.seed = seed;
  const AugmentationSpec aug{run.K, run.tau, run.regime == Regime::da_offline ? NoiseMode::offline : NoiseMode::none,
                             seed};
  const std::optional<std::size_t> batch = run.criterion == Criterion::mb ? run.batch : std::nullopt;
  return sgd_train(d, spec, aug, batch, run.eta, run.epochs).curve;
}

std::filesystem::path resolve_out_dir(const ExperimentConfig& cfg) {
  if (!cfg.out_dir.empty()) return cfg.out_dir;
  const char* root = std::getenv(kOutputRootEnv);
  const std::filesystem::path base = root && *root ? std::filesystem::path(root) : std::filesystem::path("dagd-out");
  return base / safe_name(cfg.name);
}

json RunManifest::to_json() const {
  json j;
  j["artifact"] = "dagd";
  j["version"] = version;
  j["rng"] = rng_identity;
  j["conventions"] = {{"noise_element_sd", "tau/sqrt(n)"},
                      {"csv_standardization", "population (divide by n)"},
                      {"mlp_init", "weights N(0, 2/fan_in), biases 0"},
                      {"w0", "zero vector"}};
  j["config"] = config;
  j["out_dir"] = out_dir.string();
  j["runs"] = json::array();
  for (const auto& r : runs) j["runs"].push_back({{"label", r.label}, {"seed", r.seed}, {"path", r.path.string()}});
  j["medians"] = json::array();
  for (const auto& m : medians) j["medians"].push_back(m.string());
  j["summary"] = summary.string();
  return j;
}

RunManifest run_experiment(const ExperimentConfig& cfg) {
  validate(cfg);
  const Dataset d = build_dataset(cfg.dataset);
  for (std::size_t i = 0; i < cfg.runs.size(); ++i) {
    const auto& r = cfg.runs[i];
    if (r.criterion == Criterion::mb && r.model == ModelKind::linear && d.n() % *r.batch != 0) {
      throw ConfigError("batch size " + std::to_string(*r.batch) + " does not divide n=" + std::to_string(d.n()),
                        "runs[" + std::to_string(i) + "].batch");
    }
  }

  RunManifest man;
  man.config = to_json(cfg);
  man.rng_identity = std::string(kRngIdentity);
  man.version = kVersion;
  man.out_dir = resolve_out_dir(cfg);
  std::filesystem::create_directories(man.out_dir / "runs");

  std::map<std::string, int> used;
  for (const auto& r : cfg.runs) {
    for (std::uint64_t s : cfg.seeds) {
      std::string stem = safe_name(r.label) + "_s" + std::to_string(s);
      const int dup = ++used[stem];
      if (dup > 1) stem += "_dup" + std::to_string(dup);
      man.runs.push_back({r.label, s, std::filesystem::path("runs") / (stem + ".csv")});
    }
  }
  for (const auto& r : cfg.runs) man.medians.push_back("median_" + safe_name(r.label) + ".csv");
  if (!cfg.reference.empty()) man.summary = "summary.csv";
  write_file(man.out_dir / "manifest.json", man.to_json().dump(2) + "\n");

  // Independent (run, seed) jobs; results land in fixed slots.
  const std::size_t jobs = man.runs.size();
  const std::size_t per_run = cfg.seeds.size();
  std::vector<std::vector<double>> curves(jobs);
  std::vector<std::exception_ptr> errors(jobs);
  std::atomic<std::size_t> next{0};
  {
    const unsigned workers = std::max(1u, std::min<unsigned>(8u, std::thread::hardware_concurrency()));
    std::vector<std::jthread> pool;
    for (unsigned w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < jobs; i = next++) {
          try {
            curves[i] = execute_run(d, cfg.runs[i / per_run], man.runs[i].seed);
          } catch (...) {
            errors[i] = std::current_exception();
          }
        }
      });
    }
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);

  for (std::size_t i = 0; i < jobs; ++i) {
    write_file(man.out_dir / man.runs[i].path, curve_csv(cfg.runs[i / per_run], man.runs[i].seed, curves[i]));
  }

  for (std::size_t r = 0; r < cfg.runs.size(); ++r) {
    std::vector<std::vector<double>> group(curves.begin() + static_cast<std::ptrdiff_t>(r * per_run),
                                           curves.begin() + static_cast<std::ptrdiff_t>((r + 1) * per_run));
    const auto med = pointwise_median(group);
    std::ostringstream os;
    os << "epoch,median,min,max\n";
    for (std::size_t t = 0; t < med.size(); ++t) {
      double lo = group[0][t], hi = group[0][t];
      for (const auto& c : group) {
        lo = std::min(lo, c[t]);
        hi = std::max(hi, c[t]);
      }
      os << t << ',' << fmt(med[t]) << ',' << fmt(lo) << ',' << fmt(hi) << '\n';
    }
    write_file(man.out_dir / man.medians[r], os.str());
  }

  if (!cfg.reference.empty()) {
    std::size_t ref = 0;
    while (cfg.runs[ref].label != cfg.reference) ++ref;
    std::ostringstream os;
    os << "run,reference,seed,max_abs,rms,tail_gap\n";
    for (std::size_t r = 0; r < cfg.runs.size(); ++r) {
      if (r == ref) continue;
      for (std::size_t s = 0; s < per_run; ++s) {
        const auto dist = compare_curves(curves[r * per_run + s], curves[ref * per_run + s]);
        os << cfg.runs[r].label << ',' << cfg.reference << ',' << cfg.seeds[s] << ',' << fmt(dist.max_abs) << ','
           << fmt(dist.rms) << ',' << fmt(dist.tail_gap) << '\n';
      }
    }
    write_file(man.out_dir / man.summary, os.str());
  }
  return man;
}

// ---------------------------------------------------------------------------

bool VerifyReport::all_pass() const {
  return std::all_of(certificates.begin(), certificates.end(), [](const Certificate& c) { return c.pass; });
}

std::string VerifyReport::lines() const {
  std::ostringstream os;
  for (const auto& c : certificates) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.4g", c.z_max);
    os << c.claim_id << ' ' << c.n_draws << ' ' << buf << ' ' << (c.pass ? "PASS" : "FAIL") << '\n';
  }
  return os.str();
}

std::string VerifyReport::csv() const {
  std::ostringstream os;
  os << "claim_id,n_draws,z_max,threshold,verdict\n";
  for (const auto& c : certificates) {
    os << c.claim_id << ',' << c.n_draws << ',' << fmt(c.z_max) << ',' << fmt(c.threshold) << ','
       << (c.pass ? "pass" : "fail") << '\n';
  }
  return os.str();
}

SmallInstance make_small_instance(std::uint64_t seed) {
  const auto bits = philox4x32_10({0x534d414cu, 0, static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)},
                                  {0x494e5354u, 0x414e4345u});
  const std::size_t n = 2 + bits[0] % 9;
  const std::size_t m = 1 + bits[1] % 5;
  constexpr std::size_t kKs[] = {1, 2, 4, 8};
  constexpr double kTaus[] = {0.5, 1.0, 2.0};
  const std::size_t K = kKs[bits[2] % 4];
  const double tau = kTaus[bits[3] % 3];

  std::vector<std::size_t> divisors;
  for (std::size_t r = 1; r <= n; ++r)
    if (n % r == 0) divisors.push_back(r);
  const std::size_t rho = divisors[(bits[0] >> 8) % divisors.size()];

  const GaussSource src(seed, derive_stream({0x534d414c4c, 1}));
  Mat X = gauss_mat(src, n, m, 1.0);
  Vec y(n), w(m);
  for (std::size_t i = 0; i < n; ++i) y[i] = src(n * m + i);
  for (std::size_t j = 0; j < m; ++j) w[j] = src(n * m + n + j);
  return SmallInstance{Dataset(std::move(X), std::move(y)), std::move(w),
                       AugmentationSpec{K, tau, NoiseMode::online, seed ^ 0xa5a5a5a5ull}, partition(n, rho)};
}

VerifyReport run_verify(VerifyLevel level, const VerifyOptions& options) {
  const std::size_t draws = level == VerifyLevel::quick ? 1000 : 10000;
  const std::size_t instances = level == VerifyLevel::quick ? 5 : 20;
  VerifyReport report;

  auto sampler_for = [&](const Dataset& d, const Vec& w, const UpdateRule& rule) {
    return options.sampler_override ? options.sampler_override(d, w, rule) : rule_sampler(d, w, rule);
  };
  auto add = [&](const std::string& id, const SmallInstance& inst, const AugmentationSpec& aug,
                 const UpdateRule& rule) {
    const Vec cf = expected_update(inst.d, inst.w, aug, rule);
    report.certificates.push_back(
        certify(id, inst.d.n(), inst.d.m(), aug, sampler_for(inst.d, inst.w, rule), cf, draws));
  };

  for (std::size_t i = 0; i < instances; ++i) {
    const auto inst = make_small_instance(1000 + i);
    const std::string tag = "#" + std::to_string(i + 1) + "[n=" + std::to_string(inst.d.n()) +
                            ",m=" + std::to_string(inst.d.m()) + ",K=" + std::to_string(inst.aug.K) +
                            ",tau=" + fmt(inst.aug.tau) + "]";
    add("sse" + tag, inst, inst.aug, UpdateRule::sse());
    add("mse" + tag, inst, inst.aug, UpdateRule::mse());
    const std::size_t k = 1 + (5 * i + 2) % inst.aug.K;
    const std::size_t q = (7 * i + 3) % inst.part.Q;
    const auto rule = UpdateRule::mb(inst.part, k, q);
    add(rule.id() + tag, inst, inst.aug, rule);
  }

  const auto inst = make_small_instance(999);
  AugmentationSpec zero = inst.aug;
  zero.tau = 0.0;
  add("sse[tau=0]", inst, zero, UpdateRule::sse());
  add("mse[tau=0]", inst, zero, UpdateRule::mse());
  add("mb(k=1,q=1)[tau=0]", inst, zero, UpdateRule::mb(inst.part, 1, 0));

  if (!options.out_dir.empty()) {
    std::filesystem::create_directories(options.out_dir);
    write_file(options.out_dir / "certificates.txt", report.lines());
    write_file(options.out_dir / "certificates.csv", report.csv());
  }
  return report;
}

}  // namespace dagd
