#include <cstdint>
#include <exception>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "mildsim/config.hpp"
#include "mildsim/runner.hpp"

int main(int argc, char** argv) {
  CLI::App app{"mildsim: experiment runner for dissipative stochastic evolution equations"};
  std::string config_path;
  std::string output;
  std::optional<std::uint64_t> seed;
  std::vector<std::string> only;
  int verbosity = 0;
  app.add_option("-c,--config", config_path, "Config file")->required()->check(CLI::ExistingFile);
  app.add_option("-o,--output", output, "Output directory (overrides output.directory)");
  app.add_option("-s,--seed", seed, "Seed (overrides experiment.seed)");
  app.add_option("--only", only, "Run only these experiments")->delimiter(',');
  app.add_flag("-v,--verbose", verbosity, "Verbose progress (repeatable)");
  CLI11_PARSE(app, argc, argv);

  try {
    const mildsim::cli::RunConfig config = mildsim::cli::parse_config(config_path);
    mildsim::cli::RunOptions options;
    if (!output.empty()) {
      options.output = output;
    }
    options.seed = seed;
    options.only = only;
    options.verbosity = verbosity;
    options.log = &std::cerr;
    const auto result = mildsim::cli::run(config, options);
    std::cout << "wrote " << result.artifacts.size() << " files to " << result.directory.string() << '\n';
    return result.exit_status;
  } catch (const mildsim::cli::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
}
