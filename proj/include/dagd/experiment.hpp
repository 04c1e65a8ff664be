#pragma once

// Experiment runner behind the command-line tool: presets, JSON configs,
// run manifests, curve CSVs and the certificate suite.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "dagd/data.hpp"
#include "dagd/mlp.hpp"
#include "dagd/oracle.hpp"
#include "dagd/trainers.hpp"

namespace dagd {

inline constexpr const char* kVersion = "1.0.0";

/// Header of every curve CSV.
inline constexpr const char* kCurveHeader = "epoch,regime,criterion,K,tau,eta,lambda,seed,mse_original";

/// Environment variable naming the default output root.
inline constexpr const char* kOutputRootEnv = "DAGD_OUTPUT_ROOT";

struct CsvSource {
  std::string path;
  std::string target;
  bool standardize = true;
};

struct DatasetSource {
  std::optional<SyntheticSpec> synthetic;
  std::optional<CsvSource> csv;
};

enum class ModelKind { linear, mlp };

struct RunSpec {
  std::string label;
  ModelKind model = ModelKind::linear;
  Regime regime = Regime::naive;
  /// For the network, MSE means full batch and MB uses `batch`.
  Criterion criterion = Criterion::sse;
  double eta = 1e-3;
  double lambda = 0.0;
  std::size_t epochs = 0;
  std::optional<std::size_t> batch;
  std::size_t K = 0;
  double tau = 0.0;
  std::vector<std::size_t> hidden;  // network hidden widths
};

struct ExperimentConfig {
  std::string name;
  DatasetSource dataset;
  std::vector<RunSpec> runs;
  std::vector<std::uint64_t> seeds;
  std::string out_dir;
  /// Label of the run every other run is compared against in summary.csv;
  /// empty disables the summary.
  std::string reference;
};

std::vector<std::string> preset_names();
/// Throws ConfigError listing the valid names for unknown presets.
ExperimentConfig preset(const std::string& name);

nlohmann::json to_json(const ExperimentConfig& cfg);
/// Parses and validates a config document. A "preset" key seeds the config
/// and the remaining keys override it (JSON merge patch); a top-level
/// "epochs" overrides every run. Errors name the offending field path.
ExperimentConfig parse_config(const nlohmann::json& doc);
ExperimentConfig load_config(const std::filesystem::path& path);

/// Schema and cross-field checks; throws ConfigError with a field path.
void validate(const ExperimentConfig& cfg);

Dataset build_dataset(const DatasetSource& src);

struct RunOutput {
  std::string label;
  std::uint64_t seed = 0;
  std::filesystem::path path;
};

struct RunManifest {
  nlohmann::json config;
  std::string rng_identity;
  std::string version;
  std::filesystem::path out_dir;
  std::vector<RunOutput> runs;
  std::vector<std::filesystem::path> medians;
  std::filesystem::path summary;

  nlohmann::json to_json() const;
};

/// Resolves the output directory: explicit, else $DAGD_OUTPUT_ROOT/<name>,
/// else ./dagd-out/<name>.
std::filesystem::path resolve_out_dir(const ExperimentConfig& cfg);

/// Runs every (run, seed) pair and writes manifest.json first, then one CSV
/// per pair, the pointwise median/envelope per run and summary.csv.
RunManifest run_experiment(const ExperimentConfig& cfg);

/// Curve of one (run, seed) pair.
std::vector<double> execute_run(const Dataset& d, const RunSpec& run, std::uint64_t seed);

// ---------------------------------------------------------------------------

enum class VerifyLevel { quick, full };

struct VerifyOptions {
  /// Replaces the update under test; used to inject faults in tests.
  std::function<UpdateSampler(const Dataset&, const Vec&, const UpdateRule&)> sampler_override;
  std::filesystem::path out_dir;  // empty: no files written
};

struct VerifyReport {
  std::vector<Certificate> certificates;
  bool all_pass() const;
  /// One line per claim: claim-id n_draws z_max verdict.
  std::string lines() const;
  std::string csv() const;
};

/// A small random regression problem for certificate suites.
struct SmallInstance {
  Dataset d;
  Vec w;
  AugmentationSpec aug;
  BatchPartition part;
};

/// n in [2,10], m in [1,5], K in {1,2,4,8}, tau in {0.5,1,2}; rho divides n.
SmallInstance make_small_instance(std::uint64_t seed);

VerifyReport run_verify(VerifyLevel level, const VerifyOptions& options = {});

}  // namespace dagd
