#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "cpod/error.hpp"
#include "cpod/pipeline.hpp"

using namespace cpod;
namespace fs = std::filesystem;
using njson = nlohmann::json;

namespace {

PipelineConfig tiny_config() {
  PipelineConfig config;
  config.fom.node_count = 17;
  config.fom.horizon = 0.5;
  config.fom.steps = 20;
  config.fom.reynolds = 100.0;
  config.generator.trig.terms = 8;
  config.generator.trig.sigma = 8.0;
  config.n_train = 6;
  config.n_test = 3;
  config.k_list = {1, 2};
  config.energy_ratio = 0.95;
  config.restarts = 2;
  config.max_iter = 15;
  config.master_seed = 11;
  return config;
}

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

void run_all(const PipelineConfig& config, const fs::path& dir) {
  cmd_generate(config, dir);
  cmd_train(config, dir);
  cmd_evaluate(config, dir);
  cmd_report(config, dir);
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  return std::string(std::istreambuf_iterator<char>(in), {});
}

}  // namespace

TEST_CASE("config json: defaults, round trip, unknown keys") {
  const auto defaults = config_from_json_text("{}");
  CHECK(defaults.n_train == 60);
  CHECK(defaults.n_test == 40);
  CHECK(defaults.k_list == std::vector<Eigen::Index>{1, 2, 3});
  CHECK(defaults.fom.node_count == 129);
  CHECK(defaults.fom.steps == 400);
  CHECK(defaults.generator.type == "trig");
  CHECK(defaults.energy_ratio == 0.97);
  CHECK(defaults.master_seed == 0);

  const auto text = config_to_json_text(tiny_config());
  const auto back = config_from_json_text(text);
  CHECK(config_to_json_text(back) == text);
  CHECK(config_hash(back) == config_hash(tiny_config()));

  CHECK_THROWS_AS(config_from_json_text(R"({"bogus": 1})"), Error);
  CHECK_THROWS_AS(config_from_json_text(R"({"fom": {"bogus": 1}})"), Error);
  CHECK_THROWS_AS(config_from_json_text(R"({"generator": {"spare": 2}})"), Error);
  CHECK_THROWS_AS(config_from_json_text("not json"), Error);
}

TEST_CASE("config validation rejects inconsistent setups") {
  auto config = tiny_config();
  config.n_train = 3;  // below twice the largest K
  CHECK_THROWS_AS(config.validate(), Error);

  config = tiny_config();
  config.k_list = {2, 2};
  CHECK_THROWS_AS(config.validate(), Error);

  config = tiny_config();
  config.energy_ratio = 1.5;
  CHECK_THROWS_AS(config.validate(), Error);

  config = tiny_config();
  config.stride = 40;  // beyond the step count
  CHECK_THROWS_AS(config.validate(), Error);

  config = tiny_config();
  config.generator.type = "square";
  CHECK_THROWS_AS(config.validate(), Error);

  config = tiny_config();
  config.dims_override = {{2, {1}}};  // needs one entry per cluster
  CHECK_THROWS_AS(config.validate(), Error);
}

TEST_CASE("config hash: 16 hex digits, sensitive to every field") {
  const auto base = config_hash(tiny_config());
  CHECK(base.size() == 16);
  CHECK(base.find_first_not_of("0123456789abcdef") == std::string::npos);

  auto seeded = tiny_config();
  seeded.master_seed = 12;
  CHECK(config_hash(seeded) != base);
  auto wider = tiny_config();
  wider.energy_ratio = 0.96;
  CHECK(config_hash(wider) != base);
}

TEST_CASE("hat heights cycle round-robin") {
  GeneratorConfig generator;
  generator.hat_heights = {0.8, 0.9, 1.0, 1.1, 1.2};
  CHECK(hat_height_of(generator, 0) == 0.8);
  CHECK(hat_height_of(generator, 4) == 1.2);
  CHECK(hat_height_of(generator, 5) == 0.8);
  CHECK(hat_height_of(generator, 7) == 1.0);
}

TEST_CASE("sample inputs: deterministic, populations disjoint") {
  const auto config = tiny_config();
  const auto a = sample_input(config, true, 2);
  const auto b = sample_input(config, true, 2);
  CHECK(a.strength == b.strength);
  CHECK(a.kind == StrengthKind::Trig);
  CHECK(a.strength.size() == config.fom.steps + 1);

  CHECK(sample_input(config, true, 3).strength != a.strength);
  CHECK(sample_input(config, false, 2).strength != a.strength);

  auto hat = config;
  hat.generator.type = "hat";
  CHECK(sample_input(hat, true, 0).kind == StrengthKind::Hat);
}

TEST_CASE("pipeline end to end: artifacts, schema, shared invariants") {
  const auto config = tiny_config();
  const auto dir = fresh_dir("cpod_pipe_smoke");
  run_all(config, dir);

  for (const char* name :
       {"config_used.json", "config.schema.json", "manifest.json", "train.ens",
        "test.ens", "modified.ens", "lifting.csv", "spectrum.csv",
        "train_info.json", "eval_info.json", "summary.json", "summary.csv",
        "summary.schema.json", "error_table_true.csv", "error_table_pred.csv",
        "labels_K1.csv", "labels_K2.csv", "spectra_K1.csv", "modes_K1_c1.csv",
        "nb_K1.csv", "predictions_K1.csv", "confusion_K1.csv",
        "alpha_K1_sample1.csv", "generate_wall.json", "train_wall.json",
        "evaluate_wall.json"})
    CHECK_MESSAGE(fs::exists(dir / name), name);

  const auto summary_text = slurp(dir / "summary.json");
  validate_summary_text(summary_text);

  const auto summary = njson::parse(summary_text);
  CHECK(summary.at("config_hash").get<std::string>() == config_hash(config));
  CHECK(summary.at("n_train").get<long long>() == 6);
  CHECK(summary.at("generator").get<std::string>() == "trig");
  CHECK(summary.at("per_k").size() == 2);

  // K = 1 has a single cluster, so true and predicted labels coincide and
  // the two error tables must agree row for row.
  const auto true_table = slurp(dir / "error_table_true.csv");
  const auto pred_table = slurp(dir / "error_table_pred.csv");
  const auto first_row = [](const std::string& text) {
    const auto head = text.find('\n');
    return text.substr(head + 1, text.find('\n', head + 1) - head - 1);
  };
  CHECK(first_row(true_table) == first_row(pred_table));

  fs::remove_all(dir);
}

TEST_CASE("pipeline reruns are byte-identical apart from wall times") {
  const auto config = tiny_config();
  const auto dir1 = fresh_dir("cpod_pipe_rep1");
  const auto dir2 = fresh_dir("cpod_pipe_rep2");
  run_all(config, dir1);
  run_all(config, dir2);

  for (const auto& entry : fs::directory_iterator(dir1)) {
    const auto name = entry.path().filename().string();
    if (name.find("_wall.json") != std::string::npos) continue;
    if (name == "summary.json") {
      auto a = njson::parse(slurp(entry.path()));
      auto b = njson::parse(slurp(dir2 / name));
      a.erase("wall");
      b.erase("wall");
      CHECK_MESSAGE(a.dump() == b.dump(), name);
      continue;
    }
    if (name == "summary.csv") continue;  // derived from summary.json sans wall
    CHECK_MESSAGE(slurp(entry.path()) == slurp(dir2 / name), name);
  }
  CHECK(slurp(dir1 / "summary.csv") == slurp(dir2 / "summary.csv"));

  fs::remove_all(dir1);
  fs::remove_all(dir2);
}

TEST_CASE("master seed changes the generated data") {
  auto config = tiny_config();
  const auto dir1 = fresh_dir("cpod_pipe_seed1");
  const auto dir2 = fresh_dir("cpod_pipe_seed2");
  cmd_generate(config, dir1);
  config.master_seed = 12;
  cmd_generate(config, dir2);
  CHECK(slurp(dir1 / "train.ens") != slurp(dir2 / "train.ens"));
  fs::remove_all(dir1);
  fs::remove_all(dir2);
}

TEST_CASE("evaluate refuses artifacts from a different config") {
  auto config = tiny_config();
  config.k_list = {1};
  const auto dir = fresh_dir("cpod_pipe_mismatch");
  cmd_generate(config, dir);
  cmd_train(config, dir);

  auto other = config;
  other.master_seed = 99;
  CHECK_THROWS_AS(cmd_evaluate(other, dir), Error);
  fs::remove_all(dir);
}

TEST_CASE("report on an empty directory names the missing artifact") {
  const auto dir = fresh_dir("cpod_pipe_empty");
  try {
    cmd_report(tiny_config(), dir);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("missing artifact") != std::string::npos);
  }
  fs::remove_all(dir);
}

TEST_CASE("summary validation rejects structural violations") {
  const auto config = tiny_config();
  const auto dir = fresh_dir("cpod_pipe_schema");
  run_all(config, dir);
  const auto good = njson::parse(slurp(dir / "summary.json"));
  fs::remove_all(dir);

  validate_summary_text(good.dump());

  auto bad = good;
  bad["config_hash"] = "xyz";
  CHECK_THROWS_AS(validate_summary_text(bad.dump()), Error);

  bad = good;
  bad["per_k"][0]["populations"][0] = 999;
  CHECK_THROWS_AS(validate_summary_text(bad.dump()), Error);

  bad = good;
  bad["per_k"][0]["confusion"] = njson::array({njson::array({1, 2, 3})});
  CHECK_THROWS_AS(validate_summary_text(bad.dump()), Error);

  bad = good;
  if (bad["per_k"][0].contains("error_rate"))
    bad["per_k"][0]["error_rate"] = 1.5;
  else
    bad["per_k"][0]["error_rate"] = -0.25;
  CHECK_THROWS_AS(validate_summary_text(bad.dump()), Error);

  bad = good;
  bad.erase("n_test");
  CHECK_THROWS_AS(validate_summary_text(bad.dump()), Error);

  CHECK_THROWS_AS(validate_summary_text("not json"), Error);
}

TEST_CASE("hat generator records the height crosstab") {
  auto config = tiny_config();
  config.generator.type = "hat";
  config.generator.hat_heights = {0.9, 1.1};
  config.generator.hat_sigma = 1.0;
  config.k_list = {1};
  const auto dir = fresh_dir("cpod_pipe_hat");
  run_all(config, dir);

  CHECK(fs::exists(dir / "height_crosstab_K1.csv"));
  const auto summary = njson::parse(slurp(dir / "summary.json"));
  CHECK(summary.at("generator").get<std::string>() == "hat");
  CHECK(summary.at("per_k")[0].contains("height_crosstab"));
  fs::remove_all(dir);
}
