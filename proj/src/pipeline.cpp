#include "cpod/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>

#include "json.hpp"

#include "cpod/csv.hpp"
#include "cpod/ensemble_io.hpp"
#include "cpod/error.hpp"
#include "cpod/nbayes.hpp"
#include "cpod/pod.hpp"
#include "cpod/rng.hpp"
#include "cpod/rom.hpp"
#include "cpod/tgcvt.hpp"

namespace cpod {

namespace fs = std::filesystem;
using njson = nlohmann::json;

namespace {

constexpr const char* kConfigSchema = R"({
  "$schema": "http://json-schema.org/draft-07/schema#",
  "title": "cpod pipeline configuration",
  "type": "object",
  "additionalProperties": false,
  "properties": {
    "fom": {
      "type": "object",
      "additionalProperties": false,
      "properties": {
        "reynolds": {"type": "number", "exclusiveMinimum": 0},
        "nodes": {"type": "integer", "minimum": 3},
        "horizon": {"type": "number", "exclusiveMinimum": 0},
        "steps": {"type": "integer", "minimum": 1},
        "inlet_scale": {"type": "number"},
        "theta": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
        "lift_hi": {"type": "number"},
        "lift_lo": {"type": "number"}
      }
    },
    "generator": {
      "type": "object",
      "additionalProperties": false,
      "properties": {
        "type": {"enum": ["trig", "hat"]},
        "base": {"type": "number"},
        "sigma": {"type": "number", "minimum": 0},
        "terms": {"type": "integer", "minimum": 1},
        "heights": {"type": "array", "items": {"type": "number"}, "minItems": 1},
        "hat_sigma": {"type": "number", "minimum": 0}
      }
    },
    "n_train": {"type": "integer", "minimum": 1},
    "n_test": {"type": "integer", "minimum": 1},
    "k_list": {
      "type": "array",
      "items": {"type": "integer", "minimum": 1},
      "minItems": 1,
      "uniqueItems": true
    },
    "energy_ratio": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
    "restarts": {"type": "integer", "minimum": 1},
    "max_iter": {"type": "integer", "minimum": 1},
    "stride": {"type": "integer", "minimum": 1},
    "master_seed": {"type": "integer", "minimum": 0},
    "dims": {
      "type": "object",
      "additionalProperties": {
        "type": "array",
        "items": {"type": "integer", "minimum": 0}
      }
    }
  }
}
)";

constexpr const char* kSummarySchema = R"({
  "$schema": "http://json-schema.org/draft-07/schema#",
  "title": "cpod pipeline summary",
  "type": "object",
  "required": ["config_hash", "generator", "n_train", "n_test", "shared_d",
               "k_values", "per_k"],
  "properties": {
    "config_hash": {"type": "string", "pattern": "^[0-9a-f]{16}$"},
    "generator": {"enum": ["trig", "hat"]},
    "n_train": {"type": "integer", "minimum": 1},
    "n_test": {"type": "integer", "minimum": 1},
    "shared_d": {"type": "integer", "minimum": 0},
    "k_values": {"type": "array", "items": {"type": "integer", "minimum": 1}},
    "heights": {"type": "array", "items": {"type": "number"}},
    "wall": {"type": "object", "additionalProperties": {"type": "number"}},
    "per_k": {
      "type": "array",
      "items": {
        "type": "object",
        "required": ["k", "nb_ok", "populations", "dims", "energy",
                     "energy_ratios", "converged", "iterations", "identity"],
        "properties": {
          "k": {"type": "integer", "minimum": 1},
          "nb_ok": {"type": "boolean"},
          "nb_error": {"type": "string"},
          "populations": {"type": "array", "items": {"type": "integer", "minimum": 0}},
          "dims": {"type": "array", "items": {"type": "integer", "minimum": 0}},
          "energy": {"type": "number", "minimum": 0},
          "energy_ratios": {"type": "array", "items": {"type": "number"}},
          "converged": {"type": "boolean"},
          "iterations": {"type": "integer", "minimum": 0},
          "identity": {
            "type": "object",
            "required": ["direct", "spectral", "rel_gap"],
            "properties": {
              "direct": {"type": "number"},
              "spectral": {"type": "number"},
              "rel_gap": {"type": "number"}
            }
          },
          "error_rate": {"type": ["number", "null"]},
          "accuracy": {"type": "number"},
          "exclusions": {"type": "integer", "minimum": 0},
          "errors_true": {"$ref": "#/$defs/stats"},
          "errors_pred": {"$ref": "#/$defs/stats"},
          "confusion": {
            "type": "array",
            "items": {"type": "array", "items": {"type": "integer", "minimum": 0}}
          },
          "height_crosstab": {
            "type": "array",
            "items": {"type": "array", "items": {"type": "integer", "minimum": 0}}
          }
        }
      }
    }
  },
  "$defs": {
    "stats": {
      "type": "object",
      "required": ["mean", "variance", "mean_rel", "variance_rel"],
      "properties": {
        "mean": {"type": "number", "minimum": 0},
        "variance": {"type": "number", "minimum": 0},
        "mean_rel": {"type": "number", "minimum": 0},
        "variance_rel": {"type": "number", "minimum": 0}
      }
    }
  }
}
)";

struct Paths {
  fs::path root;

  fs::path config_used() const { return root / "config_used.json"; }
  fs::path config_schema() const { return root / "config.schema.json"; }
  fs::path manifest() const { return root / "manifest.json"; }
  fs::path train_ens() const { return root / "train.ens"; }
  fs::path test_ens() const { return root / "test.ens"; }
  fs::path modified_ens() const { return root / "modified.ens"; }
  fs::path lifting() const { return root / "lifting.csv"; }
  fs::path spectrum() const { return root / "spectrum.csv"; }
  fs::path train_info() const { return root / "train_info.json"; }
  fs::path eval_info() const { return root / "eval_info.json"; }
  fs::path summary_json() const { return root / "summary.json"; }
  fs::path summary_csv() const { return root / "summary.csv"; }
  fs::path summary_schema() const { return root / "summary.schema.json"; }
  fs::path error_table(bool predicted) const {
    return root / (predicted ? "error_table_pred.csv" : "error_table_true.csv");
  }
  fs::path wall(const std::string& cmd) const {
    return root / (cmd + "_wall.json");
  }

  static std::string tag(Eigen::Index k) { return "K" + std::to_string(k); }
  fs::path labels(Eigen::Index k) const {
    return root / ("labels_" + tag(k) + ".csv");
  }
  fs::path spectra(Eigen::Index k) const {
    return root / ("spectra_" + tag(k) + ".csv");
  }
  fs::path modes(Eigen::Index k, Eigen::Index c) const {
    return root / ("modes_" + tag(k) + "_c" + std::to_string(c + 1) + ".csv");
  }
  fs::path nb_model(Eigen::Index k) const {
    return root / ("nb_" + tag(k) + ".csv");
  }
  fs::path predictions(Eigen::Index k) const {
    return root / ("predictions_" + tag(k) + ".csv");
  }
  fs::path confusion_csv(Eigen::Index k) const {
    return root / ("confusion_" + tag(k) + ".csv");
  }
  fs::path alpha_sample(Eigen::Index k) const {
    return root / ("alpha_" + tag(k) + "_sample1.csv");
  }
  fs::path crosstab(Eigen::Index k) const {
    return root / ("height_crosstab_" + tag(k) + ".csv");
  }
};

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("io", "cannot open " + path.string() + " for writing");
  out << text;
  if (!out) throw Error("io", "write failed for " + path.string());
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("io", "missing artifact: " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

njson parse_json(const std::string& text, const std::string& what) {
  try {
    return njson::parse(text);
  } catch (const njson::exception& e) {
    throw Error("format", what + ": " + e.what());
  }
}

njson read_json_file(const fs::path& path) {
  return parse_json(read_text(path), path.string());
}

void write_json_file(const fs::path& path, const njson& j) {
  write_text(path, j.dump(2) + "\n");
}

double wall_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
      .count();
}

void write_wall(const Paths& paths, const std::string& cmd, double seconds) {
  write_json_file(paths.wall(cmd), njson{{"seconds", seconds}});
}

// --- config <-> json ---

void reject_unknown_keys(const njson& j, std::initializer_list<const char*> allowed,
                         const std::string& where) {
  for (const auto& item : j.items()) {
    bool known = false;
    for (const char* key : allowed)
      if (item.key() == key) known = true;
    if (!known)
      throw Error("config", "unknown key '" + item.key() + "' in " + where);
  }
}

template <typename T>
void maybe(const njson& j, const char* key, T& target) {
  if (j.contains(key)) target = j.at(key).get<T>();
}

void maybe_index(const njson& j, const char* key, Eigen::Index& target) {
  if (j.contains(key)) target = static_cast<Eigen::Index>(j.at(key).get<long long>());
}

njson fom_to_json(const FomConfig& fom) {
  return njson{{"reynolds", fom.reynolds},
               {"nodes", static_cast<long long>(fom.node_count)},
               {"horizon", fom.horizon},
               {"steps", static_cast<long long>(fom.steps)},
               {"inlet_scale", fom.inlet_scale},
               {"theta", fom.theta},
               {"lift_hi", fom.lift_hi},
               {"lift_lo", fom.lift_lo}};
}

FomConfig fom_from_json(const njson& j) {
  reject_unknown_keys(j,
                      {"reynolds", "nodes", "horizon", "steps", "inlet_scale",
                       "theta", "lift_hi", "lift_lo"},
                      "fom");
  FomConfig fom;
  maybe(j, "reynolds", fom.reynolds);
  maybe_index(j, "nodes", fom.node_count);
  maybe(j, "horizon", fom.horizon);
  maybe_index(j, "steps", fom.steps);
  maybe(j, "inlet_scale", fom.inlet_scale);
  maybe(j, "theta", fom.theta);
  maybe(j, "lift_hi", fom.lift_hi);
  maybe(j, "lift_lo", fom.lift_lo);
  return fom;
}

njson generator_to_json(const GeneratorConfig& gen) {
  return njson{{"type", gen.type},
               {"base", gen.trig.base},
               {"sigma", gen.trig.sigma},
               {"terms", static_cast<long long>(gen.trig.terms)},
               {"heights", gen.hat_heights},
               {"hat_sigma", gen.hat_sigma}};
}

GeneratorConfig generator_from_json(const njson& j) {
  reject_unknown_keys(
      j, {"type", "base", "sigma", "terms", "heights", "hat_sigma"},
      "generator");
  GeneratorConfig gen;
  maybe(j, "type", gen.type);
  maybe(j, "base", gen.trig.base);
  maybe(j, "sigma", gen.trig.sigma);
  maybe_index(j, "terms", gen.trig.terms);
  maybe(j, "heights", gen.hat_heights);
  maybe(j, "hat_sigma", gen.hat_sigma);
  return gen;
}

njson config_to_json(const PipelineConfig& config) {
  njson j{{"fom", fom_to_json(config.fom)},
          {"generator", generator_to_json(config.generator)},
          {"n_train", static_cast<long long>(config.n_train)},
          {"n_test", static_cast<long long>(config.n_test)},
          {"energy_ratio", config.energy_ratio},
          {"restarts", static_cast<long long>(config.restarts)},
          {"max_iter", static_cast<long long>(config.max_iter)},
          {"stride", static_cast<long long>(config.stride)},
          {"master_seed", config.master_seed}};
  njson ks = njson::array();
  for (Eigen::Index k : config.k_list) ks.push_back(static_cast<long long>(k));
  j["k_list"] = ks;
  if (!config.dims_override.empty()) {
    njson dims = njson::object();
    for (const auto& [k, d] : config.dims_override) {
      njson arr = njson::array();
      for (Eigen::Index v : d) arr.push_back(static_cast<long long>(v));
      dims[std::to_string(k)] = arr;
    }
    j["dims"] = dims;
  }
  return j;
}

PipelineConfig config_from_json(const njson& j) {
  reject_unknown_keys(j,
                      {"fom", "generator", "n_train", "n_test", "k_list",
                       "energy_ratio", "restarts", "max_iter", "stride",
                       "master_seed", "dims"},
                      "config");
  PipelineConfig config;
  try {
    if (j.contains("fom")) config.fom = fom_from_json(j.at("fom"));
    if (j.contains("generator"))
      config.generator = generator_from_json(j.at("generator"));
    maybe_index(j, "n_train", config.n_train);
    maybe_index(j, "n_test", config.n_test);
    if (j.contains("k_list")) {
      config.k_list.clear();
      for (const auto& v : j.at("k_list"))
        config.k_list.push_back(static_cast<Eigen::Index>(v.get<long long>()));
    }
    maybe(j, "energy_ratio", config.energy_ratio);
    maybe_index(j, "restarts", config.restarts);
    maybe_index(j, "max_iter", config.max_iter);
    maybe_index(j, "stride", config.stride);
    maybe(j, "master_seed", config.master_seed);
    if (j.contains("dims")) {
      for (const auto& item : j.at("dims").items()) {
        std::vector<Eigen::Index> dims;
        for (const auto& v : item.value())
          dims.push_back(static_cast<Eigen::Index>(v.get<long long>()));
        config.dims_override.emplace_back(
            static_cast<Eigen::Index>(csv::parse_int(item.key())), dims);
      }
    }
  } catch (const njson::exception& e) {
    throw Error("config", std::string("bad config value: ") + e.what());
  }
  config.validate();
  return config;
}

// --- small artifact helpers ---

void save_lifting_csv(const fs::path& path, const SpatialGrid& grid,
                      const LiftingData& lifting) {
  csv::Writer out(path);
  out.row("x", "lift", "mean_state");
  for (Eigen::Index i = 0; i < grid.size(); ++i)
    out.row(grid.nodes(i), lifting.lift(i), lifting.mean_state(i));
}

LiftingData load_lifting_csv(const fs::path& path, const SpatialGrid& grid) {
  const auto rows = csv::read_table(path);
  if (rows.empty() || rows[0] != std::vector<std::string>{"x", "lift", "mean_state"})
    throw Error("format", path.string() + ": unexpected header");
  if (static_cast<Eigen::Index>(rows.size()) != grid.size() + 1)
    throw Error("format", path.string() + ": row count does not match the grid");
  LiftingData lifting;
  lifting.lift.resize(grid.size());
  lifting.mean_state.resize(grid.size());
  for (Eigen::Index i = 0; i < grid.size(); ++i) {
    const auto& row = rows[static_cast<std::size_t>(i) + 1];
    if (row.size() != 3)
      throw Error("format", path.string() + ": malformed row");
    if (csv::parse_double(row[0]) != grid.nodes(i))
      throw Error("format", path.string() + ": grid mismatch");
    lifting.lift(i) = csv::parse_double(row[1]);
    lifting.mean_state(i) = csv::parse_double(row[2]);
  }
  return lifting;
}

void save_labels_csv(const fs::path& path,
                     const std::vector<Eigen::Index>& labels) {
  csv::Writer out(path);
  out.row("sample", "label");
  for (std::size_t i = 0; i < labels.size(); ++i)
    out.row(static_cast<long long>(i + 1), static_cast<long long>(labels[i] + 1));
}

std::vector<Eigen::Index> load_labels_csv(const fs::path& path,
                                          Eigen::Index expected_n,
                                          Eigen::Index cluster_count) {
  const auto rows = csv::read_table(path);
  if (rows.empty() || rows[0] != std::vector<std::string>{"sample", "label"})
    throw Error("format", path.string() + ": unexpected header");
  if (static_cast<Eigen::Index>(rows.size()) != expected_n + 1)
    throw Error("format", path.string() + ": row count mismatch");
  std::vector<Eigen::Index> labels(static_cast<std::size_t>(expected_n));
  for (Eigen::Index i = 0; i < expected_n; ++i) {
    const auto& row = rows[static_cast<std::size_t>(i) + 1];
    if (row.size() != 2 || csv::parse_int(row[0]) != i + 1)
      throw Error("format", path.string() + ": malformed row");
    const long long label = csv::parse_int(row[1]);
    if (label < 1 || label > cluster_count)
      throw Error("format", path.string() + ": label out of range");
    labels[static_cast<std::size_t>(i)] = static_cast<Eigen::Index>(label - 1);
  }
  return labels;
}

void save_modes_csv(const fs::path& path, const SpatialGrid& grid,
                    const Eigen::MatrixXd& modes) {
  csv::Writer out(path);
  std::vector<std::string> cells{"x"};
  for (Eigen::Index l = 0; l < modes.cols(); ++l)
    cells.push_back("mode_" + std::to_string(l + 1));
  out.row_vec(cells);
  for (Eigen::Index i = 0; i < grid.size(); ++i) {
    cells.clear();
    cells.push_back(csv::fmt(grid.nodes(i)));
    for (Eigen::Index l = 0; l < modes.cols(); ++l)
      cells.push_back(csv::fmt(modes(i, l)));
    out.row_vec(cells);
  }
}

Eigen::MatrixXd load_modes_csv(const fs::path& path, const SpatialGrid& grid) {
  const auto rows = csv::read_table(path);
  if (rows.empty() || rows[0].empty() || rows[0][0] != "x")
    throw Error("format", path.string() + ": unexpected header");
  if (static_cast<Eigen::Index>(rows.size()) != grid.size() + 1)
    throw Error("format", path.string() + ": row count does not match the grid");
  const Eigen::Index dim = static_cast<Eigen::Index>(rows[0].size()) - 1;
  Eigen::MatrixXd modes(grid.size(), dim);
  for (Eigen::Index i = 0; i < grid.size(); ++i) {
    const auto& row = rows[static_cast<std::size_t>(i) + 1];
    if (static_cast<Eigen::Index>(row.size()) != dim + 1)
      throw Error("format", path.string() + ": malformed row");
    if (csv::parse_double(row[0]) != grid.nodes(i))
      throw Error("format", path.string() + ": grid mismatch");
    for (Eigen::Index l = 0; l < dim; ++l)
      modes(i, l) = csv::parse_double(row[static_cast<std::size_t>(l) + 1]);
  }
  return modes;
}

void save_spectra_csv(const fs::path& path,
                      const std::vector<PodBasis>& centroids) {
  csv::Writer out(path);
  out.row("cluster", "index", "eigenvalue");
  for (std::size_t c = 0; c < centroids.size(); ++c)
    for (Eigen::Index i = 0; i < centroids[c].eigvals.size(); ++i)
      out.row(static_cast<long long>(c + 1), static_cast<long long>(i + 1),
              centroids[c].eigvals(i));
}

std::vector<Eigen::VectorXd> load_spectra_csv(const fs::path& path,
                                              Eigen::Index cluster_count) {
  const auto rows = csv::read_table(path);
  if (rows.empty() ||
      rows[0] != std::vector<std::string>{"cluster", "index", "eigenvalue"})
    throw Error("format", path.string() + ": unexpected header");
  std::vector<std::vector<double>> collected(
      static_cast<std::size_t>(cluster_count));
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& row = rows[r];
    if (row.size() != 3) throw Error("format", path.string() + ": malformed row");
    const long long c = csv::parse_int(row[0]);
    if (c < 1 || c > cluster_count)
      throw Error("format", path.string() + ": cluster id out of range");
    auto& bucket = collected[static_cast<std::size_t>(c - 1)];
    if (csv::parse_int(row[1]) != static_cast<long long>(bucket.size()) + 1)
      throw Error("format", path.string() + ": indices out of order");
    bucket.push_back(csv::parse_double(row[2]));
  }
  std::vector<Eigen::VectorXd> spectra(static_cast<std::size_t>(cluster_count));
  for (std::size_t c = 0; c < spectra.size(); ++c) {
    if (collected[c].empty())
      throw Error("format", path.string() + ": cluster with no spectrum");
    spectra[c] = Eigen::Map<const Eigen::VectorXd>(
        collected[c].data(), static_cast<Eigen::Index>(collected[c].size()));
  }
  return spectra;
}

void save_spectrum_csv(const fs::path& path,
                       const Eigen::Ref<const Eigen::VectorXd>& eigvals) {
  csv::Writer out(path);
  out.row("index", "eigenvalue");
  for (Eigen::Index i = 0; i < eigvals.size(); ++i)
    out.row(static_cast<long long>(i + 1), eigvals(i));
}

void check_ensemble(const Ensemble& ensemble, const PipelineConfig& config,
                    Eigen::Index expected_n, const std::string& which) {
  if (ensemble.grid.size() != config.fom.node_count ||
      ensemble.time.snapshot_count != config.fom.steps ||
      ensemble.time.dt != config.fom.dt())
    throw Error("config", which + " ensemble does not match the configuration");
  if (ensemble.sample_count() != expected_n)
    throw Error("config", which + " ensemble has the wrong sample count");
}

std::vector<Eigen::Index> dims_for(const PipelineConfig& config,
                                   Eigen::Index k, Eigen::Index shared_d) {
  for (const auto& [key, dims] : config.dims_override)
    if (key == k) return dims;
  return std::vector<Eigen::Index>(static_cast<std::size_t>(k), shared_d);
}

njson stats_to_json(const ErrorStats& stats) {
  return njson{{"mean", stats.mean},
               {"variance", stats.variance},
               {"mean_rel", stats.mean_rel},
               {"variance_rel", stats.variance_rel}};
}

// Re-assemble the per-K tessellation that cmd_train persisted.
Tessellation load_tessellation(const Paths& paths,
                               const PipelineConfig& config, Eigen::Index k,
                               const SpatialGrid& grid) {
  Tessellation tess;
  tess.cluster_count = k;
  tess.stride = config.stride;
  tess.labels = load_labels_csv(paths.labels(k), config.n_train, k);
  const auto spectra = load_spectra_csv(paths.spectra(k), k);
  tess.centroids.resize(static_cast<std::size_t>(k));
  tess.populations.assign(static_cast<std::size_t>(k), 0);
  for (Eigen::Index label : tess.labels)
    ++tess.populations[static_cast<std::size_t>(label)];
  for (Eigen::Index c = 0; c < k; ++c) {
    PodBasis& basis = tess.centroids[static_cast<std::size_t>(c)];
    basis.modes = load_modes_csv(paths.modes(k, c), grid);
    basis.eigvals = spectra[static_cast<std::size_t>(c)];
    basis.dim = basis.modes.cols();
    basis.grid = grid;
    basis.validate();
  }
  return tess;
}

}  // namespace

void PipelineConfig::validate() const {
  fom.validate();
  if (generator.type != "trig" && generator.type != "hat")
    throw Error("config", "generator type must be trig or hat");
  if (generator.type == "trig" && generator.trig.terms < 1)
    throw Error("config", "trig generator needs at least one term");
  if (generator.type == "hat" && generator.hat_heights.empty())
    throw Error("config", "hat generator needs at least one height");
  if (generator.trig.sigma < 0.0 || generator.hat_sigma < 0.0)
    throw Error("config", "noise amplitude must be nonnegative");
  if (n_train < 1 || n_test < 1)
    throw Error("config", "sample counts must be positive");
  if (k_list.empty()) throw Error("config", "k_list must not be empty");
  Eigen::Index k_max = 0;
  std::set<Eigen::Index> seen;
  for (Eigen::Index k : k_list) {
    if (k < 1) throw Error("config", "cluster counts must be at least 1");
    if (!seen.insert(k).second)
      throw Error("config", "k_list has duplicate entries");
    k_max = std::max(k_max, k);
  }
  if (n_train < 2 * k_max)
    throw Error("config", "n_train must be at least twice the largest K");
  if (!(energy_ratio > 0.0 && energy_ratio <= 1.0))
    throw Error("config", "energy_ratio must lie in (0, 1]");
  if (restarts < 1) throw Error("config", "restarts must be at least 1");
  if (max_iter < 1) throw Error("config", "max_iter must be at least 1");
  if (stride < 1 || stride > fom.steps)
    throw Error("config", "stride must lie in [1, steps]");
  for (const auto& [k, dims] : dims_override) {
    if (std::find(k_list.begin(), k_list.end(), k) == k_list.end())
      throw Error("config", "dims override for a K not in k_list");
    if (static_cast<Eigen::Index>(dims.size()) != k)
      throw Error("config", "dims override needs one entry per cluster");
    for (Eigen::Index d : dims)
      if (d < 0) throw Error("config", "subspace dimensions must be >= 0");
  }
}

PipelineConfig config_from_json_text(const std::string& text) {
  return config_from_json(parse_json(text, "config"));
}

PipelineConfig load_config(const fs::path& path) {
  return config_from_json(read_json_file(path));
}

std::string config_to_json_text(const PipelineConfig& config) {
  return config_to_json(config).dump(2) + "\n";
}

std::string config_hash(const PipelineConfig& config) {
  const std::uint64_t h = fnv1a64(config_to_json(config).dump());
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(h));
  return buf;
}

double hat_height_of(const GeneratorConfig& generator, Eigen::Index index) {
  const auto count = static_cast<Eigen::Index>(generator.hat_heights.size());
  return generator.hat_heights[static_cast<std::size_t>(index % count)];
}

RandomInput sample_input(const PipelineConfig& config, bool training,
                         Eigen::Index index) {
  const TimeGrid time = config.fom.make_time_grid();
  const std::uint64_t seed =
      derive_seed(config.master_seed, training ? "train-input" : "test-input",
                  static_cast<std::uint64_t>(index));
  if (config.generator.type == "trig")
    return sample_trig_strength(config.generator.trig, time, seed);
  return sample_hat_strength(hat_height_of(config.generator, index),
                             config.generator.hat_sigma, time, seed);
}

void cmd_generate(const PipelineConfig& config, const fs::path& out_dir) {
  const auto t0 = std::chrono::steady_clock::now();
  config.validate();
  const Paths paths{out_dir};
  fs::create_directories(out_dir);

  write_text(paths.config_used(), config_to_json_text(config));
  write_text(paths.config_schema(), kConfigSchema);

  const auto build = [&](bool training, Eigen::Index count) {
    Ensemble ensemble;
    ensemble.grid = config.fom.make_grid();
    ensemble.time = config.fom.make_time_grid();
    ensemble.trajectories.reserve(static_cast<std::size_t>(count));
    for (Eigen::Index i = 0; i < count; ++i) {
      const RandomInput input = sample_input(config, training, i);
      try {
        ensemble.trajectories.push_back(solve_fom(config.fom, input));
      } catch (const Error& e) {
        throw Error(e.kind(), std::string(training ? "train" : "test") +
                                  " sample " + std::to_string(i + 1) + ": " +
                                  e.what());
      }
    }
    ensemble.validate();
    return ensemble;
  };

  save_ensemble(build(true, config.n_train), paths.train_ens());
  save_ensemble(build(false, config.n_test), paths.test_ens());

  write_json_file(paths.manifest(),
                  njson{{"config_hash", config_hash(config)},
                        {"generator", config.generator.type},
                        {"n_train", static_cast<long long>(config.n_train)},
                        {"n_test", static_cast<long long>(config.n_test)},
                        {"train", "train.ens"},
                        {"test", "test.ens"}});
  write_wall(paths, "generate", wall_since(t0));
}

void cmd_train(const PipelineConfig& config, const fs::path& out_dir) {
  const auto t0 = std::chrono::steady_clock::now();
  config.validate();
  const Paths paths{out_dir};

  const Ensemble train = load_ensemble(paths.train_ens());
  check_ensemble(train, config, config.n_train, "train");
  const SpatialGrid& grid = train.grid;

  LiftingData lifting;
  lifting.lift = build_lifting(config.fom);
  lifting.mean_state = ensemble_mean(train, lifting.lift);
  save_lifting_csv(paths.lifting(), grid, lifting);

  const Ensemble modified = modified_ensemble(train, lifting);
  save_ensemble(modified, paths.modified_ens());

  // Shared subspace dimension from the all-sample spectrum.
  std::vector<Eigen::Index> everyone(static_cast<std::size_t>(config.n_train));
  for (Eigen::Index i = 0; i < config.n_train; ++i)
    everyone[static_cast<std::size_t>(i)] = i;
  const Eigen::MatrixXd all_snaps =
      stack_snapshots(modified, everyone, config.stride);
  const PodBasis probe = pod_basis(all_snaps, grid, 1);
  const Eigen::Index shared_d =
      select_dimension(probe.eigvals, config.energy_ratio);
  save_spectrum_csv(paths.spectrum(), probe.eigvals);

  njson per_k = njson::array();
  for (Eigen::Index k : config.k_list) {
    LloydOptions options;
    options.dims = dims_for(config, k, shared_d);
    options.max_iter = config.max_iter;
    options.restarts = config.restarts;
    options.stride = config.stride;
    const Tessellation tess =
        lloyd_tgcvt(modified, k, options,
                    derive_seed(config.master_seed, "lloyd",
                                static_cast<std::uint64_t>(k)));

    save_labels_csv(paths.labels(k), tess.labels);
    save_spectra_csv(paths.spectra(k), tess.centroids);
    for (Eigen::Index c = 0; c < k; ++c)
      save_modes_csv(paths.modes(k, c), grid,
                     tess.centroids[static_cast<std::size_t>(c)].modes);

    const EnergyIdentity identity = training_energy_identity(modified, tess);

    bool nb_ok = true;
    std::string nb_error;
    try {
      LabelledInputs data;
      data.inputs.resize(config.n_train, config.fom.steps + 1);
      for (Eigen::Index i = 0; i < config.n_train; ++i)
        data.inputs.row(i) = train.trajectories[static_cast<std::size_t>(i)]
                                 .input.strength.transpose();
      data.labels = tess.labels;
      data.class_count = k;
      data.validate();
      save_model_csv(fit(data), paths.nb_model(k));
    } catch (const Error& e) {
      nb_ok = false;
      nb_error = e.what();
    }

    njson entry{{"k", static_cast<long long>(k)},
                {"dims", options.dims},
                {"populations", tess.populations},
                {"energy", tess.energy},
                {"iterations", static_cast<long long>(tess.iterations)},
                {"converged", tess.converged},
                {"reseed_count", static_cast<long long>(tess.reseed_count)},
                {"restart_index", static_cast<long long>(tess.restart_index)},
                {"energy_history", tess.energy_history},
                {"identity",
                 njson{{"direct", identity.direct},
                       {"spectral", identity.spectral},
                       {"rel_gap", identity.rel_gap}}},
                {"nb_ok", nb_ok}};
    std::vector<double> ratios(tess.energy_ratios.data(),
                               tess.energy_ratios.data() + tess.energy_ratios.size());
    entry["energy_ratios"] = ratios;
    if (!nb_ok) entry["nb_error"] = nb_error;
    per_k.push_back(entry);
  }

  write_json_file(paths.train_info(),
                  njson{{"config_hash", config_hash(config)},
                        {"shared_d", static_cast<long long>(shared_d)},
                        {"per_k", per_k}});
  write_wall(paths, "train", wall_since(t0));
}

void cmd_evaluate(const PipelineConfig& config, const fs::path& out_dir) {
  const auto t0 = std::chrono::steady_clock::now();
  config.validate();
  const Paths paths{out_dir};

  const njson train_info = read_json_file(paths.train_info());
  if (train_info.at("config_hash").get<std::string>() != config_hash(config))
    throw Error("config", "training artifacts come from a different config");

  const Ensemble test = load_ensemble(paths.test_ens());
  check_ensemble(test, config, config.n_test, "test");
  const SpatialGrid& grid = test.grid;
  const TimeGrid time = test.time;
  const LiftingData lifting = load_lifting_csv(paths.lifting(), grid);

  std::map<Eigen::Index, bool> nb_ok_by_k;
  for (const auto& entry : train_info.at("per_k"))
    nb_ok_by_k[static_cast<Eigen::Index>(entry.at("k").get<long long>())] =
        entry.at("nb_ok").get<bool>();
  for (Eigen::Index k : config.k_list)
    if (!nb_ok_by_k.count(k))
      throw Error("io", "missing training artifacts for K = " + std::to_string(k));

  struct TableRow {
    Eigen::Index k;
    ErrorStats stats;
  };
  std::vector<TableRow> table_true, table_pred;
  njson per_k = njson::array();

  for (Eigen::Index k : config.k_list) {
    if (!nb_ok_by_k[k]) {
      per_k.push_back(njson{{"k", static_cast<long long>(k)}, {"nb_ok", false}});
      continue;
    }
    const Tessellation tess = load_tessellation(paths, config, k, grid);
    const NaiveBayesModel model = load_model_csv(paths.nb_model(k));
    if (model.class_count() != k ||
        model.feature_count() != config.fom.steps + 1)
      throw Error("config", "classifier artifacts do not match the config");

    std::vector<ReducedOperators> ops;
    ops.reserve(static_cast<std::size_t>(k));
    for (Eigen::Index c = 0; c < k; ++c)
      ops.push_back(build_reduced(
          config.fom, tess.centroids[static_cast<std::size_t>(c)], lifting));

    std::vector<Eigen::Index> labels_true, labels_pred;
    std::vector<EvaluatedPair> pairs_true, pairs_pred;
    std::vector<int> excluded(static_cast<std::size_t>(config.n_test), 0);
    std::vector<EvaluatedPair> row_true(static_cast<std::size_t>(config.n_test)),
        row_pred(static_cast<std::size_t>(config.n_test));
    njson failures = njson::array();

    const std::uint64_t predict_seed = derive_seed(
        config.master_seed, "predict", static_cast<std::uint64_t>(k));
    for (Eigen::Index i = 0; i < config.n_test; ++i) {
      const Trajectory& fom_traj = test.trajectories[static_cast<std::size_t>(i)];
      const Trajectory modified = modified_state(fom_traj, lifting, time);
      const Eigen::Index t_label = true_label(modified, tess);
      RandomStream tie_rng(
          derive_seed(predict_seed, "sample", static_cast<std::uint64_t>(i)));
      const Eigen::Index p_label =
          predict(model, fom_traj.input.strength, tie_rng);
      labels_true.push_back(t_label);
      labels_pred.push_back(p_label);

      try {
        const RomResult rom_t =
            solve_rom(ops[static_cast<std::size_t>(t_label)], fom_traj.input);
        row_true[static_cast<std::size_t>(i)] = rom_error(
            fom_traj, rom_t, ops[static_cast<std::size_t>(t_label)]);
        if (p_label == t_label) {
          row_pred[static_cast<std::size_t>(i)] =
              row_true[static_cast<std::size_t>(i)];
        } else {
          const RomResult rom_p = solve_rom(
              ops[static_cast<std::size_t>(p_label)], fom_traj.input);
          row_pred[static_cast<std::size_t>(i)] = rom_error(
              fom_traj, rom_p, ops[static_cast<std::size_t>(p_label)]);
        }
        if (i == 0)
          save_alpha_csv(rom_t, config.fom.dt(),
                         paths.alpha_sample(k).string());
        pairs_true.push_back(row_true[static_cast<std::size_t>(i)]);
        pairs_pred.push_back(row_pred[static_cast<std::size_t>(i)]);
      } catch (const Error& e) {
        excluded[static_cast<std::size_t>(i)] = 1;
        failures.push_back(njson{{"sample", static_cast<long long>(i + 1)},
                                 {"kind", e.kind()},
                                 {"message", e.what()}});
      }
    }

    {
      csv::Writer out(paths.predictions(k));
      out.row("sample", "true_label", "predicted_label", "err_true",
              "err_pred", "ref_sq_norm", "excluded");
      for (Eigen::Index i = 0; i < config.n_test; ++i) {
        const auto idx = static_cast<std::size_t>(i);
        if (excluded[idx])
          out.row(static_cast<long long>(i + 1),
                  static_cast<long long>(labels_true[idx] + 1),
                  static_cast<long long>(labels_pred[idx] + 1), "", "", "", 1);
        else
          out.row(static_cast<long long>(i + 1),
                  static_cast<long long>(labels_true[idx] + 1),
                  static_cast<long long>(labels_pred[idx] + 1),
                  row_true[idx].err_sq, row_pred[idx].err_sq,
                  row_true[idx].ref_sq_norm, 0);
      }
    }

    const ConfusionMatrix cm = confusion(labels_true, labels_pred, k);
    save_confusion_csv(cm, paths.confusion_csv(k));

    njson entry{{"k", static_cast<long long>(k)},
                {"nb_ok", true},
                {"accuracy", cm.accuracy()},
                {"exclusions",
                 static_cast<long long>(std::count(excluded.begin(),
                                                   excluded.end(), 1))},
                {"failures", failures}};
    njson counts = njson::array();
    for (Eigen::Index r = 0; r < k; ++r) {
      njson row = njson::array();
      for (Eigen::Index c = 0; c < k; ++c)
        row.push_back(static_cast<long long>(cm.counts(r, c)));
      counts.push_back(row);
    }
    entry["confusion"] = counts;

    try {
      entry["error_rate"] = error_rate_estimate(cm, model.priors);
    } catch (const Error& e) {
      entry["error_rate"] = nullptr;
      entry["error_rate_note"] = e.what();
    }

    if (!pairs_true.empty()) {
      const ErrorStats stats_true = error_stats(pairs_true);
      const ErrorStats stats_pred = error_stats(pairs_pred);
      entry["errors_true"] = stats_to_json(stats_true);
      entry["errors_pred"] = stats_to_json(stats_pred);
      table_true.push_back({k, stats_true});
      table_pred.push_back({k, stats_pred});
    }
    per_k.push_back(entry);
  }

  for (bool predicted : {false, true}) {
    csv::Writer out(paths.error_table(predicted));
    out.row("K", "E", "E_rel", "V", "V_rel");
    for (const TableRow& row : predicted ? table_pred : table_true)
      out.row(static_cast<long long>(row.k), row.stats.mean,
              row.stats.mean_rel, row.stats.variance, row.stats.variance_rel);
  }

  write_json_file(paths.eval_info(),
                  njson{{"config_hash", config_hash(config)}, {"per_k", per_k}});
  write_wall(paths, "evaluate", wall_since(t0));
}

void cmd_report(const PipelineConfig& config, const fs::path& out_dir) {
  const auto t0 = std::chrono::steady_clock::now();
  config.validate();
  const Paths paths{out_dir};

  const njson manifest = read_json_file(paths.manifest());
  const njson train_info = read_json_file(paths.train_info());
  const njson eval_info = read_json_file(paths.eval_info());
  const std::string hash = config_hash(config);
  for (const njson* doc : {&manifest, &train_info, &eval_info})
    if (doc->at("config_hash").get<std::string>() != hash)
      throw Error("config", "artifacts come from a different config");

  std::map<long long, njson> eval_by_k;
  for (const auto& entry : eval_info.at("per_k"))
    eval_by_k[entry.at("k").get<long long>()] = entry;

  njson summary{{"config_hash", hash},
                {"generator", config.generator.type},
                {"n_train", static_cast<long long>(config.n_train)},
                {"n_test", static_cast<long long>(config.n_test)},
                {"shared_d", train_info.at("shared_d")},
                {"k_values", njson::array()}};
  for (Eigen::Index k : config.k_list)
    summary["k_values"].push_back(static_cast<long long>(k));

  const bool hat = config.generator.type == "hat";
  if (hat) summary["heights"] = config.generator.hat_heights;

  njson per_k = njson::array();
  for (const auto& trained : train_info.at("per_k")) {
    const long long k = trained.at("k").get<long long>();
    njson entry = trained;
    entry.erase("energy_history");
    entry.erase("reseed_count");
    entry.erase("restart_index");
    const auto found = eval_by_k.find(k);
    if (found == eval_by_k.end())
      throw Error("io", "missing evaluation artifacts for K = " + std::to_string(k));
    for (const auto& item : found->second.items())
      if (item.key() != "k" && item.key() != "nb_ok" && item.key() != "failures")
        entry[item.key()] = item.value();

    if (hat) {
      const auto labels = load_labels_csv(
          paths.labels(static_cast<Eigen::Index>(k)), config.n_train,
          static_cast<Eigen::Index>(k));
      const auto h_count =
          static_cast<Eigen::Index>(config.generator.hat_heights.size());
      Eigen::MatrixXi crosstab =
          Eigen::MatrixXi::Zero(static_cast<Eigen::Index>(k), h_count);
      for (Eigen::Index i = 0; i < config.n_train; ++i)
        ++crosstab(labels[static_cast<std::size_t>(i)], i % h_count);
      njson rows = njson::array();
      {
        csv::Writer out(paths.crosstab(static_cast<Eigen::Index>(k)));
        std::vector<std::string> cells{"label"};
        for (double h : config.generator.hat_heights)
          cells.push_back("height_" + csv::fmt(h));
        out.row_vec(cells);
        for (Eigen::Index r = 0; r < crosstab.rows(); ++r) {
          cells.clear();
          cells.push_back(std::to_string(r + 1));
          njson row = njson::array();
          for (Eigen::Index c = 0; c < h_count; ++c) {
            cells.push_back(std::to_string(crosstab(r, c)));
            row.push_back(crosstab(r, c));
          }
          out.row_vec(cells);
          rows.push_back(row);
        }
      }
      entry["height_crosstab"] = rows;
    }
    per_k.push_back(entry);
  }
  summary["per_k"] = per_k;

  njson wall = njson::object();
  for (const char* cmd : {"generate", "train", "evaluate"}) {
    const fs::path p = paths.wall(cmd);
    if (fs::exists(p)) wall[cmd] = read_json_file(p).at("seconds");
  }
  summary["wall"] = wall;

  const std::string text = summary.dump(2) + "\n";
  validate_summary_text(text);
  write_text(paths.summary_json(), text);
  write_text(paths.summary_schema(), kSummarySchema);

  {
    csv::Writer out(paths.summary_csv());
    out.row("K", "E_true", "E_rel_true", "V_true", "V_rel_true", "E_pred",
            "E_rel_pred", "V_pred", "V_rel_pred", "error_rate");
    for (const auto& entry : per_k) {
      if (!entry.at("nb_ok").get<bool>() || !entry.contains("errors_true"))
        continue;
      const njson& st = entry.at("errors_true");
      const njson& sp = entry.at("errors_pred");
      out.row(entry.at("k").get<long long>(),
              st.at("mean").get<double>(), st.at("mean_rel").get<double>(),
              st.at("variance").get<double>(),
              st.at("variance_rel").get<double>(),
              sp.at("mean").get<double>(), sp.at("mean_rel").get<double>(),
              sp.at("variance").get<double>(),
              sp.at("variance_rel").get<double>(),
              entry.at("error_rate").is_null()
                  ? std::string("")
                  : csv::fmt(entry.at("error_rate").get<double>()));
    }
  }
  write_wall(paths, "report", wall_since(t0));
}

namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw Error("format", "summary violates schema: " + what);
}

void check_stats_json(const njson& stats, const std::string& where) {
  require(stats.is_object(), where + " must be an object");
  for (const char* key : {"mean", "variance", "mean_rel", "variance_rel"}) {
    require(stats.contains(key), where + " needs " + key);
    require(stats.at(key).is_number(), where + "." + key + " must be numeric");
    require(stats.at(key).get<double>() >= 0.0,
            where + "." + key + " must be nonnegative");
  }
}

}  // namespace

void validate_summary_text(const std::string& json_text) {
  const njson j = parse_json(json_text, "summary");
  require(j.is_object(), "top level must be an object");
  for (const char* key : {"config_hash", "generator", "n_train", "n_test",
                          "shared_d", "k_values", "per_k"})
    require(j.contains(key), std::string("missing key ") + key);

  const std::string hash = j.at("config_hash").get<std::string>();
  require(hash.size() == 16 &&
              hash.find_first_not_of("0123456789abcdef") == std::string::npos,
          "config_hash must be 16 hex digits");
  const std::string generator = j.at("generator").get<std::string>();
  require(generator == "trig" || generator == "hat",
          "generator must be trig or hat");
  require(j.at("n_train").is_number_integer() &&
              j.at("n_train").get<long long>() >= 1,
          "n_train must be a positive integer");
  require(j.at("n_test").is_number_integer() &&
              j.at("n_test").get<long long>() >= 1,
          "n_test must be a positive integer");
  require(j.at("shared_d").is_number_integer() &&
              j.at("shared_d").get<long long>() >= 0,
          "shared_d must be a nonnegative integer");
  require(j.at("k_values").is_array() && !j.at("k_values").empty(),
          "k_values must be a nonempty array");
  require(j.at("per_k").is_array(), "per_k must be an array");
  require(j.at("per_k").size() == j.at("k_values").size(),
          "per_k must have one entry per K");

  const long long n_train = j.at("n_train").get<long long>();
  for (const auto& entry : j.at("per_k")) {
    require(entry.is_object(), "per_k entries must be objects");
    for (const char* key : {"k", "nb_ok"})
      require(entry.contains(key), std::string("per_k entry missing ") + key);
    require(entry.at("k").is_number_integer() &&
                entry.at("k").get<long long>() >= 1,
            "per_k k must be a positive integer");
    require(entry.at("nb_ok").is_boolean(), "nb_ok must be boolean");
    const long long k = entry.at("k").get<long long>();
    if (!entry.at("nb_ok").get<bool>()) continue;

    for (const char* key : {"populations", "dims", "energy", "energy_ratios",
                            "converged", "iterations", "identity"})
      require(entry.contains(key), std::string("per_k entry missing ") + key);
    require(entry.at("populations").is_array() &&
                static_cast<long long>(entry.at("populations").size()) == k,
            "populations must have K entries");
    long long total = 0;
    for (const auto& p : entry.at("populations")) {
      require(p.is_number_integer() && p.get<long long>() >= 0,
              "populations must be nonnegative integers");
      total += p.get<long long>();
    }
    require(total == n_train, "populations must sum to n_train");
    require(entry.at("energy").is_number() &&
                entry.at("energy").get<double>() >= 0.0,
            "energy must be nonnegative");
    require(entry.at("converged").is_boolean(), "converged must be boolean");
    const njson& identity = entry.at("identity");
    require(identity.is_object(), "identity must be an object");
    for (const char* key : {"direct", "spectral", "rel_gap"})
      require(identity.contains(key) && identity.at(key).is_number(),
              std::string("identity needs numeric ") + key);

    if (entry.contains("error_rate") && !entry.at("error_rate").is_null()) {
      require(entry.at("error_rate").is_number(), "error_rate must be numeric");
      const double rate = entry.at("error_rate").get<double>();
      require(rate >= 0.0 && rate <= 1.0, "error_rate must lie in [0, 1]");
    }
    if (entry.contains("errors_true"))
      check_stats_json(entry.at("errors_true"), "errors_true");
    if (entry.contains("errors_pred"))
      check_stats_json(entry.at("errors_pred"), "errors_pred");
    if (entry.contains("confusion")) {
      const njson& cm = entry.at("confusion");
      require(cm.is_array() && static_cast<long long>(cm.size()) == k,
              "confusion must be K x K");
      for (const auto& row : cm) {
        require(row.is_array() && static_cast<long long>(row.size()) == k,
                "confusion must be K x K");
        for (const auto& cell : row)
          require(cell.is_number_integer() && cell.get<long long>() >= 0,
                  "confusion entries must be nonnegative integers");
      }
    }
  }
}

}  // namespace cpod
