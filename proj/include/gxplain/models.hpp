#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "gxplain/tabular.hpp"

namespace gxplain {

// Anything mapping an encoded instance to class scores. predict() is the
// argmax with lowest-index tie-break.
class PredictiveModel {
 public:
  virtual ~PredictiveModel() = default;
  virtual std::vector<double> predict_proba(std::span<const double> encoded) const = 0;
  virtual int n_classes() const = 0;
  int predict(std::span<const double> encoded) const;
};

// Lightweight copy of a dataset's one-hot geometry so fitted models do not
// keep the dataset alive.
struct EncodingLayout {
  struct Col {
    std::string name;
    FeatureKind kind;
    FeatureRole role;
    int offset;
    int width;
  };
  std::vector<Col> inputs;
  int dim = 0;
  int n_classes = 2;

  static EncodingLayout of(const Dataset& ds);
  int find(const std::string& name) const;  // -1 if absent
  double numeric_at(std::span<const double> encoded, int input) const;
  int level_at(std::span<const double> encoded, int input) const;  // argmax
};

// Single-feature test evaluated on encoded instances.
struct FeaturePredicate {
  enum class Kind { cat_equals, num_above };
  Kind kind = Kind::cat_equals;
  int input = 0;
  int level = 0;          // cat_equals
  double threshold = 0;   // num_above
  bool eval(const EncodingLayout& layout, std::span<const double> encoded) const;
};

// Deterministic rule model: XOR of its predicates selects class_true with
// confidence one. Depends only on the named features by construction.
class RuleModel : public PredictiveModel {
 public:
  RuleModel() = default;
  RuleModel(EncodingLayout layout, std::vector<FeaturePredicate> predicates,
            int class_true, int class_false);
  std::vector<double> predict_proba(std::span<const double> encoded) const override;
  int n_classes() const override { return layout_.n_classes; }
  const std::vector<FeaturePredicate>& predicates() const { return predicates_; }
  const EncodingLayout& layout() const { return layout_; }
  int class_true() const { return class_true_; }
  int class_false() const { return class_false_; }

 private:
  EncodingLayout layout_;
  std::vector<FeaturePredicate> predicates_;
  int class_true_ = 1;
  int class_false_ = 0;
};

// Biased model b: output depends only on the sensitive feature.
RuleModel make_biased(const Dataset& ds, const std::string& sensitive,
                      const FeaturePredicate& rule, int class_if_true);

// Unbiased model psi: output depends only on unrelated features (XOR when
// two are given). allow_existing permits predictor-role features, for
// attacks that reuse an existing column instead of injected randomness.
RuleModel make_unbiased(const Dataset& ds, const std::vector<std::string>& unrelated,
                        int class_if_true, bool allow_existing = false);

// Convenience predicate builders resolving names/levels against a dataset.
FeaturePredicate cat_equals(const Dataset& ds, const std::string& feature,
                            const std::string& level);
FeaturePredicate num_above(const Dataset& ds, const std::string& feature,
                           double threshold);
// Threshold at the dataset's (training) mean of the feature.
FeaturePredicate num_above_mean(const Dataset& ds, const std::string& feature);

enum class ClassifierVariant {
  gaussian_naive_bayes,
  linear,
  random_forest,
  feedforward_net,
};

std::string to_string(ClassifierVariant v);
ClassifierVariant classifier_variant_from_string(const std::string& s);

struct FitReport {
  double train_accuracy = 0.0;
  bool non_convergence = false;
};

class TrainedClassifier : public PredictiveModel {
 public:
  virtual ClassifierVariant variant() const = 0;
  virtual nlohmann::json to_json() const = 0;
};

// Trains the requested variant. hyper is a JSON object of overrides; every
// variant is deterministic given (data, hyper, seed). weights, when given,
// are per-instance importance weights.
std::unique_ptr<TrainedClassifier> fit_classifier(
    ClassifierVariant variant, const Dataset& ds, const nlohmann::json& hyper,
    std::uint64_t seed, FitReport* report = nullptr,
    const std::vector<double>* weights = nullptr);

std::unique_ptr<TrainedClassifier> classifier_from_json(const nlohmann::json& j);

double eval_accuracy(const PredictiveModel& m, const Dataset& ds);

}  // namespace gxplain
