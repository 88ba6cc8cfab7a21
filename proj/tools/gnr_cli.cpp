#include "gnr/pipeline.hpp"

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include <fstream>
#include <iostream>

#ifndef GNR_FIXTURE_DIR
#define GNR_FIXTURE_DIR "data/fixture"
#endif

namespace {

namespace fs = std::filesystem;
using gnr::pipeline::RunConfig;

void mark_failed(const RunConfig& cfg, const std::string& command, const std::exception& e) {
  std::error_code ec;
  if (cfg.paths.output_dir.empty() || !fs::exists(cfg.paths.output_dir, ec)) return;
  std::ofstream out(cfg.paths.output_dir / "FAILED", std::ios::app);
  out << command << ": " << e.what() << '\n';
}

void print_result(const gnr::pipeline::CommandResult& res) {
  for (const auto& a : res.artifacts) std::cout << "wrote " << a.string() << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Generative news recommendation pipeline"};
  app.require_subcommand(0, 1);
  bool print_defaults = false;
  std::string log_level = "info";
  app.add_flag("--print-defaults", print_defaults, "Print the default configuration as JSON");
  app.add_option("--log-level", log_level, "trace, debug, info, warn, error")->capture_default_str();

  std::string config_path;
  std::vector<std::pair<std::string, CLI::App*>> stages;
  for (const auto& name : gnr::pipeline::command_names()) {
    auto* sub = app.add_subcommand(name, "Run the " + name + " stage");
    sub->add_option("--config,-c", config_path, "JSON configuration file")->required()->check(CLI::ExistingFile);
    stages.emplace_back(name, sub);
  }
  std::string demo_output = "gnr-demo-out";
  std::string fixture_dir = GNR_FIXTURE_DIR;
  auto* demo = app.add_subcommand("demo", "Run every stage offline on the bundled fixture");
  demo->add_option("--output,-o", demo_output, "Output directory")->capture_default_str();
  demo->add_option("--fixture-dir", fixture_dir, "Fixture directory")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }
  spdlog::set_level(spdlog::level::from_str(log_level));

  if (print_defaults) {
    std::cout << gnr::pipeline::default_config_json().dump(2) << '\n';
    return 0;
  }

  RunConfig cfg;
  std::string command;
  try {
    if (demo->parsed()) {
      command = "demo";
      cfg = gnr::pipeline::demo_config(fixture_dir, demo_output);
      const auto res = gnr::pipeline::run_demo(cfg);
      print_result(res);
      return 0;
    }
    for (const auto& [name, sub] : stages) {
      if (!sub->parsed()) continue;
      command = name;
      cfg = gnr::pipeline::load_config(config_path);
      gnr::pipeline::validate(cfg);
      fs::create_directories(cfg.paths.output_dir);
      std::ofstream(cfg.paths.output_dir / "config.resolved.json") << gnr::pipeline::to_json(cfg).dump(2) << '\n';
      const auto res = gnr::pipeline::run_command(name, cfg);
      print_result(res);
      return 0;
    }
    std::cout << app.help();
    return 2;
  } catch (const std::exception& e) {
    spdlog::error("{}: {}", command.empty() ? "gnr" : command, e.what());
    mark_failed(cfg, command, e);
    return gnr::pipeline::exit_code_for(e);
  }
}
