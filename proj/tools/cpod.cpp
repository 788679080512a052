// cpod: cluster-based reduced-order modeling pipeline for the 1D stochastic
// Burgers problem. Four stages, each reading/writing artifacts under --out:
//   generate  sample inputs, run the full-order solver, store ensembles
//   train     lifting, clustering, per-cluster bases, input classifier
//   evaluate  reduced solves on the test set, errors and confusion
//   report    one summary.json / summary.csv from the stage artifacts
#include <cstdint>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"

#include "cpod/error.hpp"
#include "cpod/pipeline.hpp"

namespace {

struct StageArgs {
  std::string config_path;
  std::string out_dir = "out";
  std::uint64_t seed = 0;
  bool seed_given = false;
};

void add_stage(CLI::App& app, const std::string& name, const std::string& help,
               StageArgs& args, int& selected, int id) {
  CLI::App* sub = app.add_subcommand(name, help);
  sub->add_option("--config", args.config_path, "configuration JSON file");
  sub->add_option("--out", args.out_dir, "artifact directory")
      ->capture_default_str();
  sub->add_option("--seed", args.seed, "override the master seed")
      ->each([&args](const std::string&) { args.seed_given = true; });
  sub->callback([&selected, id]() { selected = id; });
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"cluster-based POD reduced-order modeling pipeline"};
  app.require_subcommand(1);

  StageArgs args;
  int selected = -1;
  add_stage(app, "generate", "sample inputs and run the full-order solver",
            args, selected, 0);
  add_stage(app, "train", "cluster the training ensemble and fit the classifier",
            args, selected, 1);
  add_stage(app, "evaluate", "run reduced models on the test ensemble",
            args, selected, 2);
  add_stage(app, "report", "collect stage artifacts into a summary",
            args, selected, 3);

  CLI11_PARSE(app, argc, argv);

  try {
    cpod::PipelineConfig config;
    if (!args.config_path.empty()) config = cpod::load_config(args.config_path);
    if (args.seed_given) config.master_seed = args.seed;

    switch (selected) {
      case 0: cpod::cmd_generate(config, args.out_dir); break;
      case 1: cpod::cmd_train(config, args.out_dir); break;
      case 2: cpod::cmd_evaluate(config, args.out_dir); break;
      case 3: cpod::cmd_report(config, args.out_dir); break;
      default: return 1;
    }
  } catch (const cpod::Error& e) {
    std::cerr << nlohmann::json{
                     {"error", {{"kind", e.kind()}, {"message", e.what()}}}}
                     .dump()
              << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << nlohmann::json{
                     {"error", {{"kind", "internal"}, {"message", e.what()}}}}
                     .dump()
              << "\n";
    return 1;
  }
  return 0;
}
