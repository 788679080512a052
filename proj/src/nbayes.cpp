#include "cpod/nbayes.hpp"

#include <cmath>
#include <numbers>

#include "cpod/csv.hpp"
#include "cpod/error.hpp"

namespace cpod {

namespace {

constexpr double kTieTol = 1e-12;
// Variance floor guards single-valued features; scaled by the global
// per-feature variance so it is unit-free, with an absolute backstop.
constexpr double kVarFloorRel = 1e-9;
constexpr double kVarFloorAbs = 1e-300;

}  // namespace

void LabelledInputs::validate() const {
  const auto n = static_cast<Eigen::Index>(labels.size());
  if (inputs.rows() != n)
    throw Error("dimension", "one label per input row required");
  if (class_count < 1) throw Error("config", "need at least one class");
  std::vector<Eigen::Index> pop(static_cast<std::size_t>(class_count), 0);
  for (Eigen::Index l : labels) {
    if (l < 0 || l >= class_count) throw Error("domain", "label out of range");
    ++pop[static_cast<std::size_t>(l)];
  }
  for (Eigen::Index k = 0; k < class_count; ++k)
    if (pop[static_cast<std::size_t>(k)] < 2)
      throw Error("domain", "class " + std::to_string(k) +
                                " has fewer than two members");
}

NaiveBayesModel fit(const LabelledInputs& data) {
  data.validate();
  const Eigen::Index n = data.inputs.rows();
  const Eigen::Index p = data.inputs.cols();
  const Eigen::Index kc = data.class_count;

  // Global per-feature variance sets the scale of the floor.
  const Eigen::RowVectorXd global_mean = data.inputs.colwise().mean();
  const Eigen::RowVectorXd global_var =
      (data.inputs.rowwise() - global_mean).array().square().colwise().sum() /
      static_cast<double>(n > 1 ? n - 1 : 1);

  NaiveBayesModel model;
  model.priors.resize(kc);
  model.means.resize(kc, p);
  model.variances.resize(kc, p);

  for (Eigen::Index k = 0; k < kc; ++k) {
    Eigen::Index nk = 0;
    Eigen::RowVectorXd mean = Eigen::RowVectorXd::Zero(p);
    for (Eigen::Index i = 0; i < n; ++i)
      if (data.labels[static_cast<std::size_t>(i)] == k) {
        mean += data.inputs.row(i);
        ++nk;
      }
    mean /= static_cast<double>(nk);
    Eigen::RowVectorXd var = Eigen::RowVectorXd::Zero(p);
    for (Eigen::Index i = 0; i < n; ++i)
      if (data.labels[static_cast<std::size_t>(i)] == k)
        var += (data.inputs.row(i) - mean).array().square().matrix();
    var /= static_cast<double>(nk - 1);

    model.priors(k) = static_cast<double>(nk) / static_cast<double>(n);
    model.means.row(k) = mean;
    for (Eigen::Index f = 0; f < p; ++f)
      model.variances(k, f) =
          std::max(var(f), kVarFloorRel * global_var(f) + kVarFloorAbs);
  }
  return model;
}

double log_discriminant(const NaiveBayesModel& model,
                        const Eigen::Ref<const Eigen::VectorXd>& x,
                        Eigen::Index k) {
  if (k < 0 || k >= model.class_count())
    throw Error("domain", "class index out of range");
  if (x.size() != model.feature_count())
    throw Error("dimension", "feature length disagrees with model");
  double acc = std::log(model.priors(k));
  for (Eigen::Index f = 0; f < x.size(); ++f) {
    const double var = model.variances(k, f);
    const double diff = x(f) - model.means(k, f);
    acc -= 0.5 * (std::log(2.0 * std::numbers::pi * var) + diff * diff / var);
  }
  return acc;
}

Eigen::VectorXd posterior(const NaiveBayesModel& model,
                          const Eigen::Ref<const Eigen::VectorXd>& x) {
  const Eigen::Index kc = model.class_count();
  Eigen::VectorXd logd(kc);
  for (Eigen::Index k = 0; k < kc; ++k) logd(k) = log_discriminant(model, x, k);
  const double shift = logd.maxCoeff();
  Eigen::VectorXd p = (logd.array() - shift).exp();
  return p / p.sum();
}

Eigen::Index predict(const NaiveBayesModel& model,
                     const Eigen::Ref<const Eigen::VectorXd>& x,
                     RandomStream& rng) {
  const Eigen::Index kc = model.class_count();
  Eigen::VectorXd logd(kc);
  for (Eigen::Index k = 0; k < kc; ++k) logd(k) = log_discriminant(model, x, k);
  const double best = logd.maxCoeff();
  const double cut = best - kTieTol * std::abs(best);
  std::vector<Eigen::Index> tied;
  for (Eigen::Index k = 0; k < kc; ++k)
    if (logd(k) >= cut) tied.push_back(k);
  if (tied.size() == 1) return tied.front();
  return tied[rng.pick(tied.size())];
}

Eigen::VectorXd ConfusionMatrix::row_sums() const {
  return counts.cast<double>().rowwise().sum();
}

double ConfusionMatrix::accuracy() const {
  const double total = static_cast<double>(counts.sum());
  if (!(total > 0.0)) throw Error("domain", "empty confusion matrix");
  return static_cast<double>(counts.diagonal().sum()) / total;
}

ConfusionMatrix confusion(const std::vector<Eigen::Index>& true_labels,
                          const std::vector<Eigen::Index>& predicted_labels,
                          Eigen::Index class_count) {
  if (true_labels.size() != predicted_labels.size())
    throw Error("dimension", "label list lengths differ");
  if (class_count < 1) throw Error("config", "need at least one class");
  ConfusionMatrix cm;
  cm.counts.setZero(class_count, class_count);
  for (std::size_t i = 0; i < true_labels.size(); ++i) {
    const Eigen::Index t = true_labels[i];
    const Eigen::Index p = predicted_labels[i];
    if (t < 0 || t >= class_count || p < 0 || p >= class_count)
      throw Error("domain", "label out of range");
    ++cm.counts(t, p);
  }
  return cm;
}

double error_rate_estimate(const ConfusionMatrix& cm,
                           const Eigen::Ref<const Eigen::VectorXd>& priors) {
  const Eigen::Index kc = cm.counts.rows();
  if (priors.size() != kc)
    throw Error("dimension", "one prior per class required");
  double err = 0.0;
  for (Eigen::Index k = 0; k < kc; ++k) {
    const double nk = static_cast<double>(cm.counts.row(k).sum());
    if (nk == 0.0) {
      if (priors(k) > 0.0)
        throw Error("domain",
                    "class " + std::to_string(k) +
                        " has positive prior but no test samples");
      continue;
    }
    for (Eigen::Index i = 0; i < kc; ++i)
      if (i != k) err += priors(k) * static_cast<double>(cm.counts(k, i)) / nk;
  }
  return err;
}

void save_model_csv(const NaiveBayesModel& model,
                    const std::filesystem::path& path) {
  csv::Writer w(path);
  w.row("class", "feature", "prior", "mean", "variance");
  for (Eigen::Index k = 0; k < model.class_count(); ++k)
    for (Eigen::Index f = 0; f < model.feature_count(); ++f)
      w.row(static_cast<long long>(k + 1), static_cast<long long>(f),
            model.priors(k), model.means(k, f), model.variances(k, f));
}

NaiveBayesModel load_model_csv(const std::filesystem::path& path) {
  const auto rows = csv::read_table(path);
  if (rows.size() < 2 || rows.front().size() != 5)
    throw Error("format", "malformed classifier file " + path.string());
  Eigen::Index kc = 0, p = 0;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    kc = std::max<Eigen::Index>(kc, csv::parse_int(rows[r][0]));
    p = std::max<Eigen::Index>(p, csv::parse_int(rows[r][1]) + 1);
  }
  if (kc < 1 || p < 1 ||
      rows.size() != static_cast<std::size_t>(kc * p) + 1)
    throw Error("format", "classifier file has missing rows");
  NaiveBayesModel model;
  model.priors.setZero(kc);
  model.means.setZero(kc, p);
  model.variances.setZero(kc, p);
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& cells = rows[r];
    if (cells.size() != 5)
      throw Error("format", "malformed classifier row " + std::to_string(r));
    const Eigen::Index k = csv::parse_int(cells[0]) - 1;
    const Eigen::Index f = csv::parse_int(cells[1]);
    if (k < 0 || k >= kc || f < 0 || f >= p)
      throw Error("format", "classifier row indices out of range");
    model.priors(k) = csv::parse_double(cells[2]);
    model.means(k, f) = csv::parse_double(cells[3]);
    model.variances(k, f) = csv::parse_double(cells[4]);
  }
  return model;
}

void save_confusion_csv(const ConfusionMatrix& cm,
                        const std::filesystem::path& path) {
  csv::Writer w(path);
  std::vector<std::string> cells{"true_class"};
  for (Eigen::Index i = 0; i < cm.counts.cols(); ++i)
    cells.push_back("predicted_" + std::to_string(i + 1));
  w.row_vec(cells);
  for (Eigen::Index k = 0; k < cm.counts.rows(); ++k) {
    cells.clear();
    cells.push_back(std::to_string(k + 1));
    for (Eigen::Index i = 0; i < cm.counts.cols(); ++i)
      cells.push_back(std::to_string(cm.counts(k, i)));
    w.row_vec(cells);
  }
}

}  // namespace cpod
