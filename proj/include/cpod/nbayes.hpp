#pragma once

#include <filesystem>
#include <vector>

#include "cpod/ensemble.hpp"
#include "cpod/rng.hpp"

namespace cpod {

// Training set for the input-space pre-classifier: one feature row per
// sample (the time-discretized strength values) and the cluster label the
// tessellation gave that sample.
struct LabelledInputs {
  Eigen::MatrixXd inputs;            // n x p, row per sample
  std::vector<Eigen::Index> labels;  // values in [0, class_count)
  Eigen::Index class_count = 0;

  void validate() const;  // every class needs at least two members
};

// Gaussian naive Bayes: class priors plus per-class, per-feature means and
// variances (features treated as independent given the class).
struct NaiveBayesModel {
  Eigen::VectorXd priors;     // K
  Eigen::MatrixXd means;      // K x p
  Eigen::MatrixXd variances;  // K x p, floored strictly positive

  Eigen::Index class_count() const { return priors.size(); }
  Eigen::Index feature_count() const { return means.cols(); }
};

NaiveBayesModel fit(const LabelledInputs& data);

// log pi_k + sum_i log N(x_i; mean_ki, var_ki); log-space keeps hundreds of
// factor products from underflowing.
double log_discriminant(const NaiveBayesModel& model,
                        const Eigen::Ref<const Eigen::VectorXd>& x,
                        Eigen::Index k);

// Softmax of the log discriminants.
Eigen::VectorXd posterior(const NaiveBayesModel& model,
                          const Eigen::Ref<const Eigen::VectorXd>& x);

// Argmax class; ties at relative tolerance 1e-12 are broken uniformly.
Eigen::Index predict(const NaiveBayesModel& model,
                     const Eigen::Ref<const Eigen::VectorXd>& x,
                     RandomStream& rng);

struct ConfusionMatrix {
  Eigen::Matrix<std::int64_t, Eigen::Dynamic, Eigen::Dynamic> counts;  // true x predicted

  Eigen::VectorXd row_sums() const;
  double accuracy() const;
};

ConfusionMatrix confusion(const std::vector<Eigen::Index>& true_labels,
                          const std::vector<Eigen::Index>& predicted_labels,
                          Eigen::Index class_count);

// Misclassification estimate sum_k prior_k * sum_{i != k} n_ki / N_k, with
// N_k the true-class row total of the confusion matrix.
double error_rate_estimate(const ConfusionMatrix& cm,
                           const Eigen::Ref<const Eigen::VectorXd>& priors);

// Flat CSV with one row per (class, feature): class,feature,prior,mean,variance.
void save_model_csv(const NaiveBayesModel& model,
                    const std::filesystem::path& path);
NaiveBayesModel load_model_csv(const std::filesystem::path& path);

void save_confusion_csv(const ConfusionMatrix& cm,
                        const std::filesystem::path& path);

}  // namespace cpod
