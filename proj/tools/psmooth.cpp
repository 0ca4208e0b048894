#include "psmooth/experiments.hpp"

#include <CLI11.hpp>

#include <iostream>

int main(int argc, char** argv) {
  CLI::App app{"Experiments for partly smooth functions: prox Jacobians, second subderivatives, "
               "generalized-equation sensitivity and SAA limits."};
  std::string config;
  std::string subcommand;
  std::optional<std::uint64_t> seed;
  std::optional<int> jobs;
  std::optional<std::string> out;
  bool validate = false;
  app.add_option("subcommand", subcommand, "Optional; must match the config's subcommand")
      ->check(CLI::IsMember(psmooth::subcommands()));
  app.add_option("--config", config, "Experiment config (JSON)")->required()->check(CLI::ExistingFile);
  app.add_option("--seed", seed, "Override the config seed");
  app.add_option("--out", out, "Output directory (overrides the config)");
  app.add_option("--jobs", jobs, "Worker threads")->check(CLI::PositiveNumber);
  app.add_flag("--validate", validate, "Print the normalized config and exit");
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    const nlohmann::json cfg = psmooth::load_config(config);
    psmooth::RunOverrides ov;
    ov.seed = seed;
    ov.jobs = jobs;
    if (out) ov.out_dir = *out;
    if (!subcommand.empty() && cfg.value("subcommand", std::string()) != subcommand)
      throw psmooth::Error(psmooth::ErrorKind::ConfigInvalid,
                           "config subcommand does not match '" + subcommand + "'");
    if (validate) {
      std::cout << psmooth::normalize_config(cfg, ov).dump(2) << '\n';
      return 0;
    }
    const psmooth::ExperimentResult res = psmooth::run_experiment(cfg, ov);
    int failed = 0;
    for (const auto& a : res.assertions)
      if (!a.passed) {
        ++failed;
        std::cerr << "FAIL " << a.name << ": " << psmooth::format_double(a.value) << ' ' << a.op << ' '
                  << psmooth::format_double(a.threshold) << (a.detail.empty() ? "" : " (" + a.detail + ")") << '\n';
      }
    std::cout << res.summary.at("subcommand").get<std::string>() << ": " << res.assertions.size() - failed << '/'
              << res.assertions.size() << " assertions passed in "
              << res.summary.at("timing").at("wall_seconds").get<double>() << " s\n";
    for (const auto& f : res.files) std::cout << "  " << f.string() << '\n';
    return res.exit_code;
  } catch (const psmooth::Error& e) {
    std::cerr << e.what() << '\n';
    return e.kind() == psmooth::ErrorKind::ConfigInvalid ? 2 : 1;
  }
}
