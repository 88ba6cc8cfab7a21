#pragma once

#include "gnr/encoder.hpp"
#include "gnr/explorer.hpp"
#include "gnr/gateway.hpp"
#include "gnr/ranker.hpp"
#include "gnr/relation.hpp"
#include "gnr/uift.hpp"

#include <json.hpp>

#include <filesystem>
#include <string>
#include <vector>

namespace gnr::pipeline {

struct Paths {
  std::filesystem::path news;
  std::filesystem::path behaviors;
  std::filesystem::path relation_pairs;
  std::filesystem::path themes;  // optional sidecar; falls back to <output>/themes.tsv
  std::filesystem::path output_dir = "gnr-out";
};

struct DataFilter {
  std::string category = "politics";
  std::size_t min_history = 5;
  std::size_t max_history = 15;
};

struct UiftSettings {
  uift::GeneratorConfig generator;
  uift::GenTrainConfig sft{nn::OptimizerConfig{nn::OptimizerKind::kAdam, 1e-2}, 20, 8, 42};
  uift::GenTrainConfig uift{nn::OptimizerConfig{nn::OptimizerKind::kAdam, 1e-3}, 10, 8, 42};
  std::string rank_mode = "recommender";  // or "fixed"
  std::size_t max_tokens = 40;
};

struct EvalSettings {
  std::size_t k = 5;
  std::string judge = "builtin";  // or "llm"
};

struct SweepSettings {
  std::vector<double> alphas{0.6, 0.7, 0.8};
  std::vector<std::size_t> t_max{2, 3, 4, 5, 6};
};

struct RunConfig {
  std::uint64_t seed = 42;
  Paths paths;
  DataFilter data;
  llm::ProviderConfig provider;
  textenc::EncoderConfig encoder;
  ranker::View news_view = ranker::View::kDual;
  ranker::View user_view = ranker::View::kDual;
  ranker::TrainConfig ranker;
  relation::RelationConfig relation;
  explorer::ExplorerConfig explorer;
  UiftSettings uift;
  EvalSettings eval;
  SweepSettings sweep;
};

nlohmann::json default_config_json();
nlohmann::json to_json(const RunConfig& config);
// Merges `overrides` onto the defaults. Unknown keys and bad values throw
// ConfigError naming the field. Relative paths resolve against `base_dir`.
RunConfig parse_config(const nlohmann::json& overrides, const std::filesystem::path& base_dir = {});
RunConfig load_config(const std::filesystem::path& path);
// Checks cross-field constraints and that input files exist.
void validate(const RunConfig& config);

// Bundled offline configuration over the fixture directory.
RunConfig demo_config(const std::filesystem::path& fixture_dir, const std::filesystem::path& output_dir);

struct CommandResult {
  std::vector<std::filesystem::path> artifacts;
  nlohmann::json summary;
};

CommandResult run_command(const std::string& command, const RunConfig& config);
const std::vector<std::string>& command_names();

// Runs every stage on the stub provider and writes report.json.
CommandResult run_demo(const RunConfig& config);

// Process exit code for an exception family: 2 config, 3 data, 4 provider, 5 internal.
int exit_code_for(const std::exception& e);

}  // namespace gnr::pipeline
