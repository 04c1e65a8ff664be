// dagd: run experiment presets/configs and the certificate suite.
//
// Exit codes: 0 ok, 1 unexpected error, 2 invalid input, 3 divergence,
// 4 certificate failure.

#include <cstdio>
#include <cstdlib>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "dagd/errors.hpp"
#include "dagd/experiment.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitOther = 1;
constexpr int kExitInput = 2;
constexpr int kExitDiverged = 3;
constexpr int kExitCertificate = 4;

int cmd_run(const std::string& preset, const std::string& config, const std::string& out,
            const std::vector<std::uint64_t>& seeds, std::optional<std::size_t> epochs) {
  dagd::ExperimentConfig cfg = config.empty() ? dagd::preset(preset) : dagd::load_config(config);
  if (!out.empty()) cfg.out_dir = out;
  if (!seeds.empty()) cfg.seeds = seeds;
  if (epochs)
    for (auto& r : cfg.runs) r.epochs = *epochs;
  const auto man = dagd::run_experiment(cfg);
  std::cout << "wrote " << man.runs.size() << " curves to " << man.out_dir.string() << '\n';
  return kExitOk;
}

int cmd_verify(const std::string& level, const std::string& out) {
  dagd::VerifyOptions options;
  options.out_dir = out;
  const auto report = dagd::run_verify(level == "full" ? dagd::VerifyLevel::full : dagd::VerifyLevel::quick, options);
  std::cout << report.lines();
  return report.all_pass() ? kExitOk : kExitCertificate;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Gradient descent with noise-augmented data: experiments and certificates"};
  app.set_version_flag("--version", std::string(dagd::kVersion));
  app.require_subcommand(1);

  auto* run = app.add_subcommand("run", "Train every run of a preset or config over all seeds");
  std::string preset, config, out;
  std::vector<std::uint64_t> seeds;
  std::optional<std::size_t> epochs;
  auto* preset_opt = run->add_option("--preset", preset, "Built-in experiment (see 'dagd presets')");
  auto* config_opt = run->add_option("--config", config, "JSON config file or run manifest")->check(CLI::ExistingFile);
  preset_opt->excludes(config_opt);
  run->add_option("--out", out, "Output directory (default $DAGD_OUTPUT_ROOT/<name> or ./dagd-out/<name>)");
  run->add_option("--seeds", seeds, "Comma-separated seeds")->delimiter(',');
  run->add_option("--epochs", epochs, "Override the epoch count of every run");

  auto* verify = app.add_subcommand("verify", "Monte-Carlo certificates of the expected-update identities");
  std::string level = "quick";
  std::string verify_out;
  verify->add_option("--level", level, "quick (1e3 draws) or full (1e4 draws)")
      ->check(CLI::IsMember({"quick", "full"}));
  verify->add_option("--out", verify_out, "Directory for certificates.txt and certificates.csv");

  auto* presets = app.add_subcommand("presets", "List built-in experiments");
  bool as_json = false;
  presets->add_flag("--json", as_json, "Print each preset's full config");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) {
      if (preset.empty() && config.empty()) {
        std::cerr << "error: run needs --preset or --config\n";
        return kExitInput;
      }
      return cmd_run(preset, config, out, seeds, epochs);
    }
    if (*verify) return cmd_verify(level, verify_out);
    if (*presets) {
      for (const auto& name : dagd::preset_names()) {
        if (as_json) {
          std::cout << dagd::to_json(dagd::preset(name)).dump(2) << '\n';
        } else {
          std::cout << name << '\n';
        }
      }
      return kExitOk;
    }
  } catch (const dagd::DivergenceError& e) {
    std::cerr << "diverged: " << e.what() << '\n';
    return kExitDiverged;
  } catch (const dagd::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitInput;
  } catch (const dagd::IngestError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kExitInput;
  } catch (const dagd::ShapeError& e) {
    std::cerr << "invalid input: " << e.what() << '\n';
    return kExitInput;
  } catch (const dagd::ParameterError& e) {
    std::cerr << "invalid input: " << e.what() << '\n';
    return kExitInput;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitOther;
  }
  return kExitOther;
}
