#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "cpod/burgers.hpp"
#include "cpod/ensemble.hpp"

namespace cpod {

// Inflow-strength generator choice plus its parameters. The hat variant
// cycles through heights round-robin over the sample index, so a sample's
// height is a pure function of (config, index).
struct GeneratorConfig {
  std::string type = "trig";  // "trig" or "hat"
  TrigStrengthParams trig;
  std::vector<double> hat_heights = {0.8, 0.9, 1.0, 1.1, 1.2};
  double hat_sigma = 1.5;
};

// Whole-experiment configuration. Serialized as JSON; every field has a
// desk-scale default so a minimal config file is {}.
struct PipelineConfig {
  FomConfig fom;
  GeneratorConfig generator;
  Eigen::Index n_train = 60;
  Eigen::Index n_test = 40;
  std::vector<Eigen::Index> k_list = {1, 2, 3};
  double energy_ratio = 0.97;
  Eigen::Index restarts = 5;
  Eigen::Index max_iter = 50;
  Eigen::Index stride = 1;
  std::uint64_t master_seed = 0;
  // Optional per-K subspace dimensions; keys are K values, each mapping to
  // K per-cluster dimensions. Absent K values use the shared rule (the
  // K = 1 spectrum cut at energy_ratio).
  std::vector<std::pair<Eigen::Index, std::vector<Eigen::Index>>> dims_override;

  void validate() const;
};

PipelineConfig config_from_json_text(const std::string& text);
PipelineConfig load_config(const std::filesystem::path& path);
std::string config_to_json_text(const PipelineConfig& config);

// FNV-1a over the canonical JSON dump, as 16 hex digits.
std::string config_hash(const PipelineConfig& config);

// Height driving hat sample i (round-robin); trig samples have no height.
double hat_height_of(const GeneratorConfig& generator, Eigen::Index index);

// The strength signal for sample `index` of the train or test population.
RandomInput sample_input(const PipelineConfig& config, bool training,
                         Eigen::Index index);

// Pipeline stages. Each writes its artifacts under out_dir and returns
// nothing; failures surface as Error. Stages communicate only through the
// files, so any stage can be rerun in place.
void cmd_generate(const PipelineConfig& config,
                  const std::filesystem::path& out_dir);
void cmd_train(const PipelineConfig& config,
               const std::filesystem::path& out_dir);
void cmd_evaluate(const PipelineConfig& config,
                  const std::filesystem::path& out_dir);
void cmd_report(const PipelineConfig& config,
                const std::filesystem::path& out_dir);

// Structural check of a summary document against the published schema;
// throws Error("format") naming the first violated requirement.
void validate_summary_text(const std::string& json_text);

}  // namespace cpod
