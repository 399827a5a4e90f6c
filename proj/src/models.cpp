#include "gxplain/models.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <nlohmann/json.hpp>

#include "gxplain/nn.hpp"
#include "gxplain/rng.hpp"

namespace gxplain {

int PredictiveModel::predict(std::span<const double> encoded) const {
  const auto p = predict_proba(encoded);
  int best = 0;
  for (std::size_t i = 1; i < p.size(); ++i) {
    if (p[i] > p[best]) best = int(i);
  }
  return best;
}

EncodingLayout EncodingLayout::of(const Dataset& ds) {
  EncodingLayout l;
  l.dim = ds.encoded_dim();
  l.n_classes = ds.n_classes();
  for (std::size_t i = 0; i < ds.inputs().size(); ++i) {
    const auto& f = ds.inputs()[i];
    const auto& b = ds.blocks()[i];
    l.inputs.push_back({f.name, f.kind, f.role, b.offset, b.width});
  }
  return l;
}

int EncodingLayout::find(const std::string& name) const {
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    if (inputs[i].name == name) return int(i);
  }
  return -1;
}

double EncodingLayout::numeric_at(std::span<const double> encoded, int input) const {
  return encoded[inputs[input].offset];
}

int EncodingLayout::level_at(std::span<const double> encoded, int input) const {
  const auto& c = inputs[input];
  int best = 0;
  for (int j = 1; j < c.width; ++j) {
    if (encoded[c.offset + j] > encoded[c.offset + best]) best = j;
  }
  return best;
}

bool FeaturePredicate::eval(const EncodingLayout& layout,
                            std::span<const double> encoded) const {
  if (kind == Kind::cat_equals) return layout.level_at(encoded, input) == level;
  return layout.numeric_at(encoded, input) > threshold;
}

RuleModel::RuleModel(EncodingLayout layout, std::vector<FeaturePredicate> predicates,
                     int class_true, int class_false)
    : layout_(std::move(layout)),
      predicates_(std::move(predicates)),
      class_true_(class_true),
      class_false_(class_false) {}

std::vector<double> RuleModel::predict_proba(std::span<const double> encoded) const {
  bool v = false;
  for (const auto& p : predicates_) v ^= p.eval(layout_, encoded);
  std::vector<double> out(layout_.n_classes, 0.0);
  out[v ? class_true_ : class_false_] = 1.0;
  return out;
}

FeaturePredicate cat_equals(const Dataset& ds, const std::string& feature,
                            const std::string& level) {
  const int idx = ds.input_index(feature);
  if (idx < 0) throw RoleMismatchError("no such feature '" + feature + "'");
  const auto& f = ds.inputs()[idx];
  if (f.kind != FeatureKind::categorical) {
    throw RoleMismatchError("feature '" + feature + "' is not categorical");
  }
  FeaturePredicate p;
  p.kind = FeaturePredicate::Kind::cat_equals;
  p.input = idx;
  p.level = f.level_index(level);
  return p;
}

FeaturePredicate num_above(const Dataset& ds, const std::string& feature,
                           double threshold) {
  const int idx = ds.input_index(feature);
  if (idx < 0) throw RoleMismatchError("no such feature '" + feature + "'");
  if (ds.inputs()[idx].kind != FeatureKind::numeric) {
    throw RoleMismatchError("feature '" + feature + "' is not numeric");
  }
  FeaturePredicate p;
  p.kind = FeaturePredicate::Kind::num_above;
  p.input = idx;
  p.threshold = threshold;
  return p;
}

FeaturePredicate num_above_mean(const Dataset& ds, const std::string& feature) {
  const int idx = ds.input_index(feature);
  if (idx < 0) throw RoleMismatchError("no such feature '" + feature + "'");
  return num_above(ds, feature, ds.normalization().per_input[idx].mean);
}

RuleModel make_biased(const Dataset& ds, const std::string& sensitive,
                      const FeaturePredicate& rule, int class_if_true) {
  const int idx = ds.input_index(sensitive);
  if (idx < 0 || ds.inputs()[idx].role != FeatureRole::sensitive) {
    throw RoleMismatchError("'" + sensitive + "' is not a sensitive feature");
  }
  if (rule.input != idx) {
    throw RoleMismatchError("biased rule must test the sensitive feature");
  }
  return RuleModel(EncodingLayout::of(ds), {rule}, class_if_true, 1 - class_if_true);
}

RuleModel make_unbiased(const Dataset& ds, const std::vector<std::string>& unrelated,
                        int class_if_true, bool allow_existing) {
  std::vector<FeaturePredicate> preds;
  for (const auto& name : unrelated) {
    const int idx = ds.input_index(name);
    if (idx < 0) throw RoleMismatchError("no such feature '" + name + "'");
    const auto& f = ds.inputs()[idx];
    if (f.role != FeatureRole::unrelated &&
        !(allow_existing && f.role == FeatureRole::predictor)) {
      throw RoleMismatchError("'" + name + "' does not have the unrelated role");
    }
    FeaturePredicate p;
    if (f.kind == FeatureKind::categorical) {
      p.kind = FeaturePredicate::Kind::cat_equals;
      p.input = idx;
      p.level = int(f.levels.size()) - 1;  // "1" for the injected {0,1} columns
    } else {
      p = num_above_mean(ds, name);
    }
    preds.push_back(p);
  }
  return RuleModel(EncodingLayout::of(ds), std::move(preds), class_if_true,
                   1 - class_if_true);
}

std::string to_string(ClassifierVariant v) {
  switch (v) {
    case ClassifierVariant::gaussian_naive_bayes: return "gaussian_naive_bayes";
    case ClassifierVariant::linear: return "linear";
    case ClassifierVariant::random_forest: return "random_forest";
    case ClassifierVariant::feedforward_net: return "feedforward_net";
  }
  return "random_forest";
}

ClassifierVariant classifier_variant_from_string(const std::string& s) {
  if (s == "gaussian_naive_bayes" || s == "naive_bayes") {
    return ClassifierVariant::gaussian_naive_bayes;
  }
  if (s == "linear") return ClassifierVariant::linear;
  if (s == "random_forest") return ClassifierVariant::random_forest;
  if (s == "feedforward_net" || s == "neural_net") {
    return ClassifierVariant::feedforward_net;
  }
  throw FormatError("unknown classifier variant '" + s + "'");
}

namespace {

double hyper_num(const nlohmann::json& h, const char* key, double dflt) {
  if (h.is_object() && h.contains(key)) return h.at(key).get<double>();
  return dflt;
}

std::string hyper_str(const nlohmann::json& h, const char* key, const char* dflt) {
  if (h.is_object() && h.contains(key)) return h.at(key).get<std::string>();
  return dflt;
}

void check_classes_present(const Dataset& ds, int min_per_class) {
  std::vector<int> counts(ds.n_classes(), 0);
  for (std::size_t i = 0; i < ds.size(); ++i) counts[ds.label(i)]++;
  for (int c = 0; c < ds.n_classes(); ++c) {
    if (counts[c] < min_per_class) {
      throw DegenerateClassError("class '" + ds.schema().target().levels[c] +
                                 "' has " + std::to_string(counts[c]) +
                                 " training rows (need >= " +
                                 std::to_string(min_per_class) + ")");
    }
  }
}

// z-score scaler shared by the gradient-trained variants.
struct Scaler {
  std::vector<double> mean, sd;
  void fit(const std::vector<std::vector<double>>& X) {
    const std::size_t d = X.empty() ? 0 : X[0].size();
    mean.assign(d, 0.0);
    sd.assign(d, 1.0);
    for (const auto& r : X) {
      for (std::size_t j = 0; j < d; ++j) mean[j] += r[j];
    }
    for (std::size_t j = 0; j < d; ++j) mean[j] /= double(X.size());
    std::vector<double> var(d, 0.0);
    for (const auto& r : X) {
      for (std::size_t j = 0; j < d; ++j) {
        var[j] += (r[j] - mean[j]) * (r[j] - mean[j]);
      }
    }
    for (std::size_t j = 0; j < d; ++j) {
      var[j] /= double(X.size());
      sd[j] = var[j] > 0.0 ? std::sqrt(var[j]) : 1.0;
    }
  }
  std::vector<double> apply(std::span<const double> x) const {
    std::vector<double> out(x.size());
    for (std::size_t j = 0; j < x.size(); ++j) out[j] = (x[j] - mean[j]) / sd[j];
    return out;
  }
  nlohmann::json to_json() const { return {{"mean", mean}, {"sd", sd}}; }
  static Scaler from_json(const nlohmann::json& j) {
    Scaler s;
    s.mean = j.at("mean").get<std::vector<double>>();
    s.sd = j.at("sd").get<std::vector<double>>();
    return s;
  }
};

std::vector<std::vector<double>> encode_all(const Dataset& ds) {
  std::vector<std::vector<double>> X;
  X.reserve(ds.size());
  for (std::size_t i = 0; i < ds.size(); ++i) X.push_back(ds.encode(ds.row(i)));
  return X;
}

// ---------------------------------------------------------------------------
// Gaussian naive Bayes

class GnbClassifier final : public TrainedClassifier {
 public:
  int n_classes() const override { return int(log_prior_.size()); }
  ClassifierVariant variant() const override {
    return ClassifierVariant::gaussian_naive_bayes;
  }

  std::vector<double> predict_proba(std::span<const double> x) const override {
    const int k = n_classes();
    std::vector<double> logp(k);
    for (int c = 0; c < k; ++c) {
      double lp = log_prior_[c];
      for (std::size_t j = 0; j < x.size(); ++j) {
        const double v = var_[c][j];
        const double d = x[j] - mean_[c][j];
        lp += -0.5 * (std::log(2.0 * M_PI * v) + d * d / v);
      }
      logp[c] = lp;
    }
    const double m = *std::max_element(logp.begin(), logp.end());
    double total = 0.0;
    std::vector<double> out(k);
    for (int c = 0; c < k; ++c) {
      out[c] = std::exp(logp[c] - m);
      total += out[c];
    }
    for (double& v : out) v /= total;
    return out;
  }

  nlohmann::json to_json() const override {
    return {{"variant", "gaussian_naive_bayes"},
            {"log_prior", log_prior_},
            {"mean", mean_},
            {"var", var_}};
  }

  static std::unique_ptr<GnbClassifier> from_json(const nlohmann::json& j) {
    auto m = std::make_unique<GnbClassifier>();
    m->log_prior_ = j.at("log_prior").get<std::vector<double>>();
    m->mean_ = j.at("mean").get<std::vector<std::vector<double>>>();
    m->var_ = j.at("var").get<std::vector<std::vector<double>>>();
    return m;
  }

  static std::unique_ptr<GnbClassifier> fit(const Dataset& ds,
                                            const std::vector<double>* weights) {
    check_classes_present(ds, 2);
    const auto X = encode_all(ds);
    const int k = ds.n_classes();
    const std::size_t d = std::size_t(ds.encoded_dim());
    auto m = std::make_unique<GnbClassifier>();
    m->mean_.assign(k, std::vector<double>(d, 0.0));
    m->var_.assign(k, std::vector<double>(d, 0.0));
    std::vector<double> wsum(k, 0.0);
    auto w_of = [&](std::size_t i) { return weights ? (*weights)[i] : 1.0; };
    for (std::size_t i = 0; i < X.size(); ++i) {
      const int c = ds.label(i);
      wsum[c] += w_of(i);
      for (std::size_t j = 0; j < d; ++j) m->mean_[c][j] += w_of(i) * X[i][j];
    }
    for (int c = 0; c < k; ++c) {
      for (std::size_t j = 0; j < d; ++j) m->mean_[c][j] /= wsum[c];
    }
    for (std::size_t i = 0; i < X.size(); ++i) {
      const int c = ds.label(i);
      for (std::size_t j = 0; j < d; ++j) {
        const double dev = X[i][j] - m->mean_[c][j];
        m->var_[c][j] += w_of(i) * dev * dev;
      }
    }
    double total = 0.0;
    for (int c = 0; c < k; ++c) total += wsum[c];
    m->log_prior_.resize(k);
    for (int c = 0; c < k; ++c) {
      m->log_prior_[c] = std::log(wsum[c] / total);
      for (std::size_t j = 0; j < d; ++j) {
        m->var_[c][j] = std::max(m->var_[c][j] / wsum[c], 1e-9);
      }
    }
    return m;
  }

  std::vector<double> log_prior_;
  std::vector<std::vector<double>> mean_, var_;
};

// ---------------------------------------------------------------------------
// Linear classifier: logistic loss by default, hinge behind the "loss" flag.

class LinearClassifier final : public TrainedClassifier {
 public:
  int n_classes() const override { return 2; }
  ClassifierVariant variant() const override { return ClassifierVariant::linear; }

  double score(std::span<const double> x) const {
    const auto z = scaler_.apply(x);
    double s = bias_;
    for (std::size_t j = 0; j < z.size(); ++j) s += w_[j] * z[j];
    return s;
  }

  std::vector<double> predict_proba(std::span<const double> x) const override {
    const double p = 1.0 / (1.0 + std::exp(-score(x)));
    return {1.0 - p, p};
  }

  nlohmann::json to_json() const override {
    return {{"variant", "linear"},
            {"w", w_},
            {"bias", bias_},
            {"loss", hinge_ ? "hinge" : "logistic"},
            {"scaler", scaler_.to_json()}};
  }

  static std::unique_ptr<LinearClassifier> from_json(const nlohmann::json& j) {
    auto m = std::make_unique<LinearClassifier>();
    m->w_ = j.at("w").get<std::vector<double>>();
    m->bias_ = j.at("bias").get<double>();
    m->hinge_ = j.at("loss").get<std::string>() == "hinge";
    m->scaler_ = Scaler::from_json(j.at("scaler"));
    return m;
  }

  static std::unique_ptr<LinearClassifier> fit(const Dataset& ds,
                                               const nlohmann::json& hyper,
                                               const std::vector<double>* weights) {
    check_classes_present(ds, 1);
    if (ds.n_classes() != 2) {
      throw DegenerateClassError("linear classifier is binary only");
    }
    auto m = std::make_unique<LinearClassifier>();
    auto X = encode_all(ds);
    m->scaler_.fit(X);
    for (auto& r : X) r = m->scaler_.apply(r);
    const std::size_t d = X.empty() ? 0 : X[0].size();
    m->w_.assign(d, 0.0);
    m->bias_ = 0.0;
    m->hinge_ = hyper_str(hyper, "loss", "logistic") == std::string("hinge");
    const int epochs = int(hyper_num(hyper, "epochs", 300));
    const double lr = hyper_num(hyper, "lr", 0.5);
    const double l2 = hyper_num(hyper, "l2", 1e-4);
    double wtotal = 0.0;
    for (std::size_t i = 0; i < X.size(); ++i) wtotal += weights ? (*weights)[i] : 1.0;
    for (int e = 0; e < epochs; ++e) {
      std::vector<double> gw(d, 0.0);
      double gb = 0.0;
      for (std::size_t i = 0; i < X.size(); ++i) {
        const double wi = weights ? (*weights)[i] : 1.0;
        double s = m->bias_;
        for (std::size_t j = 0; j < d; ++j) s += m->w_[j] * X[i][j];
        double g;
        if (m->hinge_) {
          const double ylab = ds.label(i) ? 1.0 : -1.0;
          g = (ylab * s < 1.0) ? -ylab : 0.0;
        } else {
          const double p = 1.0 / (1.0 + std::exp(-s));
          g = p - double(ds.label(i));
        }
        g *= wi;
        for (std::size_t j = 0; j < d; ++j) gw[j] += g * X[i][j];
        gb += g;
      }
      const double step = lr / wtotal;
      for (std::size_t j = 0; j < d; ++j) {
        m->w_[j] -= step * gw[j] + lr * l2 * m->w_[j];
      }
      m->bias_ -= step * gb;
    }
    return m;
  }

  std::vector<double> w_;
  double bias_ = 0.0;
  bool hinge_ = false;
  Scaler scaler_;
};

// ---------------------------------------------------------------------------
// Random forest: bootstrap per tree, Gini splits over ceil(sqrt(d)) features
// per node, unlimited depth, minimum leaf size 2.

struct ForestNode {
  int feature = -1;  // encoded column; -1 marks a leaf
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  std::vector<double> proba;  // leaf class distribution
};

class ForestClassifier final : public TrainedClassifier {
 public:
  int n_classes() const override { return k_; }
  ClassifierVariant variant() const override { return ClassifierVariant::random_forest; }

  std::vector<double> predict_proba(std::span<const double> x) const override {
    std::vector<double> acc(k_, 0.0);
    for (const auto& tree : trees_) {
      int n = 0;
      while (tree[n].feature >= 0) {
        n = x[tree[n].feature] <= tree[n].threshold ? tree[n].left : tree[n].right;
      }
      for (int c = 0; c < k_; ++c) acc[c] += tree[n].proba[c];
    }
    for (double& v : acc) v /= double(trees_.size());
    return acc;
  }

  nlohmann::json to_json() const override {
    nlohmann::json jt = nlohmann::json::array();
    for (const auto& tree : trees_) {
      nlohmann::json jn = nlohmann::json::array();
      for (const auto& n : tree) {
        if (n.feature >= 0) {
          jn.push_back({{"f", n.feature}, {"t", n.threshold}, {"l", n.left}, {"r", n.right}});
        } else {
          jn.push_back({{"p", n.proba}});
        }
      }
      jt.push_back(std::move(jn));
    }
    return {{"variant", "random_forest"}, {"classes", k_}, {"trees", jt}};
  }

  static std::unique_ptr<ForestClassifier> from_json(const nlohmann::json& j) {
    auto m = std::make_unique<ForestClassifier>();
    m->k_ = j.at("classes").get<int>();
    for (const auto& jtree : j.at("trees")) {
      std::vector<ForestNode> tree;
      for (const auto& jn : jtree) {
        ForestNode n;
        if (jn.contains("f")) {
          n.feature = jn.at("f").get<int>();
          n.threshold = jn.at("t").get<double>();
          n.left = jn.at("l").get<int>();
          n.right = jn.at("r").get<int>();
        } else {
          n.proba = jn.at("p").get<std::vector<double>>();
        }
        tree.push_back(std::move(n));
      }
      m->trees_.push_back(std::move(tree));
    }
    return m;
  }

  static std::unique_ptr<ForestClassifier> fit(const Dataset& ds,
                                               const nlohmann::json& hyper,
                                               std::uint64_t seed,
                                               const std::vector<double>* weights) {
    check_classes_present(ds, 1);
    auto m = std::make_unique<ForestClassifier>();
    m->k_ = ds.n_classes();
    const auto X = encode_all(ds);
    const int n_trees = int(hyper_num(hyper, "trees", 100));
    const int min_leaf = int(hyper_num(hyper, "min_leaf", 2));
    const int d = ds.encoded_dim();
    const int mtry = std::min(d, std::max(1, int(std::ceil(std::sqrt(double(d))))));

    std::vector<double> cumw;
    if (weights) {
      cumw.resize(weights->size());
      std::partial_sum(weights->begin(), weights->end(), cumw.begin());
    }

    for (int t = 0; t < n_trees; ++t) {
      Rng rng(derive_seed(seed, "tree/" + std::to_string(t)));
      std::vector<int> idx(X.size());
      for (std::size_t i = 0; i < X.size(); ++i) {
        if (weights) {
          const double u = rng.uniform() * cumw.back();
          idx[i] = int(std::lower_bound(cumw.begin(), cumw.end(), u) - cumw.begin());
          if (idx[i] >= int(X.size())) idx[i] = int(X.size()) - 1;
        } else {
          idx[i] = int(rng.index(X.size()));
        }
      }
      std::vector<ForestNode> tree;
      build_node(tree, X, ds.labels(), m->k_, idx, mtry, min_leaf, rng);
      m->trees_.push_back(std::move(tree));
    }
    return m;
  }

 private:
  static double gini(const std::vector<int>& counts, int total) {
    if (total == 0) return 0.0;
    double g = 1.0;
    for (int c : counts) {
      const double p = double(c) / double(total);
      g -= p * p;
    }
    return g;
  }

  static int build_node(std::vector<ForestNode>& tree,
                        const std::vector<std::vector<double>>& X,
                        const std::vector<int>& y, int k, std::vector<int>& idx,
                        int mtry, int min_leaf, Rng& rng) {
    const int me = int(tree.size());
    tree.emplace_back();

    std::vector<int> counts(k, 0);
    for (int i : idx) counts[y[i]]++;
    const int total = int(idx.size());
    bool pure = false;
    for (int c = 0; c < k; ++c) {
      if (counts[c] == total) pure = true;
    }

    int best_f = -1;
    double best_thr = 0.0, best_score = gini(counts, total);
    if (!pure && total >= 2 * min_leaf) {
      std::vector<int> feats(X[0].size());
      std::iota(feats.begin(), feats.end(), 0);
      for (int pick = 0; pick < mtry; ++pick) {
        std::swap(feats[pick], feats[pick + rng.index(feats.size() - pick)]);
      }
      std::vector<std::pair<double, int>> vals(total);
      for (int f = 0; f < mtry; ++f) {
        const int feat = feats[f];
        for (int i = 0; i < total; ++i) vals[i] = {X[idx[i]][feat], y[idx[i]]};
        std::sort(vals.begin(), vals.end(),
                  [](const auto& a, const auto& b) { return a.first < b.first; });
        std::vector<int> left(k, 0);
        int nl = 0;
        for (int i = 0; i + 1 < total; ++i) {
          left[vals[i].second]++;
          ++nl;
          if (vals[i].first == vals[i + 1].first) continue;
          const int nr = total - nl;
          if (nl < min_leaf || nr < min_leaf) continue;
          std::vector<int> right(k);
          for (int c = 0; c < k; ++c) right[c] = counts[c] - left[c];
          const double score =
              (nl * gini(left, nl) + nr * gini(right, nr)) / double(total);
          if (score < best_score - 1e-12) {
            best_score = score;
            best_f = feat;
            best_thr = 0.5 * (vals[i].first + vals[i + 1].first);
          }
        }
      }
    }

    if (best_f < 0) {
      tree[me].proba.assign(k, 0.0);
      for (int c = 0; c < k; ++c) tree[me].proba[c] = double(counts[c]) / double(total);
      return me;
    }

    std::vector<int> li, ri;
    for (int i : idx) {
      (X[i][best_f] <= best_thr ? li : ri).push_back(i);
    }
    tree[me].feature = best_f;
    tree[me].threshold = best_thr;
    const int l = build_node(tree, X, y, k, li, mtry, min_leaf, rng);
    const int r = build_node(tree, X, y, k, ri, mtry, min_leaf, rng);
    tree[me].left = l;
    tree[me].right = r;
    return me;
  }

  int k_ = 2;
  std::vector<std::vector<ForestNode>> trees_;
};

// ---------------------------------------------------------------------------
// Feedforward net: one hidden layer (width 32), ReLU, softmax output.

class MlpClassifier final : public TrainedClassifier {
 public:
  int n_classes() const override { return net_.out_dim(); }
  ClassifierVariant variant() const override { return ClassifierVariant::feedforward_net; }

  std::vector<double> predict_proba(std::span<const double> x) const override {
    const auto z = scaler_.apply(x);
    nn::Vec v = nn::Vec::Map(z.data(), long(z.size()));
    const nn::Vec p = nn::softmax(net_.forward(v));
    return std::vector<double>(p.data(), p.data() + p.size());
  }

  nlohmann::json to_json() const override {
    nlohmann::json layers = nlohmann::json::array();
    for (std::size_t l = 0; l < net_.W.size(); ++l) {
      std::vector<std::vector<double>> w(net_.W[l].rows());
      for (long i = 0; i < net_.W[l].rows(); ++i) {
        w[i].resize(net_.W[l].cols());
        for (long j = 0; j < net_.W[l].cols(); ++j) w[i][j] = net_.W[l](i, j);
      }
      layers.push_back({{"W", w},
                        {"b", std::vector<double>(net_.b[l].data(),
                                                  net_.b[l].data() + net_.b[l].size())}});
    }
    return {{"variant", "feedforward_net"}, {"layers", layers}, {"scaler", scaler_.to_json()}};
  }

  static std::unique_ptr<MlpClassifier> from_json(const nlohmann::json& j) {
    auto m = std::make_unique<MlpClassifier>();
    m->scaler_ = Scaler::from_json(j.at("scaler"));
    for (const auto& jl : j.at("layers")) {
      const auto w = jl.at("W").get<std::vector<std::vector<double>>>();
      const auto b = jl.at("b").get<std::vector<double>>();
      nn::Mat W(w.size(), w[0].size());
      for (std::size_t i = 0; i < w.size(); ++i) {
        for (std::size_t c = 0; c < w[i].size(); ++c) W(i, c) = w[i][c];
      }
      m->net_.W.push_back(std::move(W));
      m->net_.b.push_back(nn::Vec::Map(b.data(), long(b.size())));
    }
    return m;
  }

  static std::unique_ptr<MlpClassifier> fit(const Dataset& ds,
                                            const nlohmann::json& hyper,
                                            std::uint64_t seed, FitReport* report,
                                            const std::vector<double>* weights) {
    check_classes_present(ds, 1);
    auto m = std::make_unique<MlpClassifier>();
    auto X = encode_all(ds);
    m->scaler_.fit(X);
    for (auto& r : X) r = m->scaler_.apply(r);

    const int hidden = int(hyper_num(hyper, "hidden", 32));
    const int epochs = int(hyper_num(hyper, "epochs", 200));
    const int batch = int(hyper_num(hyper, "batch", 32));
    const double lr = hyper_num(hyper, "lr", 1e-3);

    Rng rng(seed);
    m->net_ = nn::Mlp({int(X[0].size()), hidden, ds.n_classes()}, rng);
    nn::Adam opt;
    opt.lr = lr;
    opt.init_like(m->net_);
    nn::Mlp::Grads grads;
    grads.init_like(m->net_);

    std::vector<int> order(X.size());
    std::iota(order.begin(), order.end(), 0);
    std::vector<double> epoch_loss(epochs, 0.0);
    nn::Mlp best = m->net_;
    double best_loss = HUGE_VAL;
    int best_epoch = 0;

    for (int e = 0; e < epochs; ++e) {
      rng.shuffle(order);
      double total = 0.0, wtotal = 0.0;
      for (std::size_t start = 0; start < order.size(); start += std::size_t(batch)) {
        grads.zero();
        const std::size_t end = std::min(order.size(), start + std::size_t(batch));
        double bw = 0.0;
        for (std::size_t s = start; s < end; ++s) {
          const int i = order[s];
          const double wi = weights ? (*weights)[i] : 1.0;
          nn::Mlp::Cache cache;
          const nn::Vec out = m->net_.forward_cache(
              nn::Vec::Map(X[i].data(), long(X[i].size())), 0.0, nullptr, cache);
          nn::Vec g;
          const double loss = nn::softmax_xent(out, ds.label(i), &g);
          g *= wi;
          m->net_.backward(cache, g, grads);
          total += wi * loss;
          bw += wi;
        }
        for (auto& gw : grads.dW) gw /= bw;
        for (auto& gb : grads.db) gb /= bw;
        opt.step(m->net_, grads);
        wtotal += bw;
      }
      epoch_loss[e] = total / wtotal;
      if (epoch_loss[e] < best_loss) {
        best_loss = epoch_loss[e];
        best = m->net_;
        best_epoch = e;
      }
    }

    // Converged when the best epoch falls in the final fifth of training.
    if (report) report->non_convergence = best_epoch < epochs - std::max(1, epochs / 5);
    m->net_ = best;
    return m;
  }

  nn::Mlp net_;
  Scaler scaler_;
};

}  // namespace

std::unique_ptr<TrainedClassifier> fit_classifier(
    ClassifierVariant variant, const Dataset& ds, const nlohmann::json& hyper,
    std::uint64_t seed, FitReport* report, const std::vector<double>* weights) {
  if (ds.empty()) throw EmptyDatasetError();
  std::unique_ptr<TrainedClassifier> m;
  FitReport local;
  switch (variant) {
    case ClassifierVariant::gaussian_naive_bayes:
      m = GnbClassifier::fit(ds, weights);
      break;
    case ClassifierVariant::linear:
      m = LinearClassifier::fit(ds, hyper, weights);
      break;
    case ClassifierVariant::random_forest:
      m = ForestClassifier::fit(ds, hyper, seed, weights);
      break;
    case ClassifierVariant::feedforward_net:
      m = MlpClassifier::fit(ds, hyper, seed, &local, weights);
      break;
  }
  if (report) {
    report->non_convergence = local.non_convergence;
    report->train_accuracy = eval_accuracy(*m, ds);
  }
  return m;
}

std::unique_ptr<TrainedClassifier> classifier_from_json(const nlohmann::json& j) {
  const auto v = j.at("variant").get<std::string>();
  if (v == "gaussian_naive_bayes") return GnbClassifier::from_json(j);
  if (v == "linear") return LinearClassifier::from_json(j);
  if (v == "random_forest") return ForestClassifier::from_json(j);
  if (v == "feedforward_net") return MlpClassifier::from_json(j);
  throw FormatError("unknown classifier variant '" + v + "'");
}

double eval_accuracy(const PredictiveModel& m, const Dataset& ds) {
  if (ds.empty()) return 0.0;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    if (m.predict(ds.encode(ds.row(i))) == ds.label(i)) ++hits;
  }
  return double(hits) / double(ds.size());
}

}  // namespace gxplain
