#include "gxplain/generators.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <nlohmann/json.hpp>

#include "gxplain/nn.hpp"
#include "gxplain/rng.hpp"

namespace gxplain {

std::vector<std::vector<double>> GeneratorModel::generate(int, std::uint64_t) const {
  throw Error("generator '" + name() + "' cannot sample the whole distribution");
}

std::vector<std::vector<double>> GeneratorModel::generate_around(
    int, const std::vector<double>&, std::uint64_t) const {
  throw Error("generator '" + name() + "' cannot sample around an instance");
}

std::vector<double> GeneratorModel::fill_in(const std::vector<double>&,
                                            const std::vector<bool>&,
                                            std::uint64_t) const {
  throw Error("generator '" + name() + "' cannot fill in hidden values");
}

nlohmann::json GeneratorModel::to_json() const {
  throw FormatError("generator '" + name() + "' is not serializable");
}

std::vector<double> raw_from_normalized(const std::vector<Feature>& inputs,
                                        const std::vector<Dataset::Block>& blocks,
                                        const Normalization& norm,
                                        const std::vector<double>& z) {
  std::vector<double> raw(inputs.size());
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    const auto& b = blocks[i];
    if (inputs[i].kind == FeatureKind::numeric) {
      raw[i] = z[b.offset] * norm.per_input[i].sd + norm.per_input[i].mean;
    } else {
      int best = 0;
      for (int j = 1; j < b.width; ++j) {
        if (z[b.offset + j] > z[b.offset + best]) best = j;
      }
      raw[i] = double(best);
    }
  }
  return raw;
}

// ---------------------------------------------------------------------------
// Gaussian perturbation

GaussianPerturbSampler::GaussianPerturbSampler(const Dataset& ds)
    : inputs_(ds.inputs()), norm_(ds.normalization()) {
  level_freq_.resize(inputs_.size());
  for (std::size_t i = 0; i < inputs_.size(); ++i) {
    if (inputs_[i].kind != FeatureKind::categorical) continue;
    std::vector<double> freq(inputs_[i].levels.size(), 0.0);
    for (const auto& r : ds.rows()) freq[std::size_t(r[i])] += 1.0;
    level_freq_[i] = std::move(freq);
  }
}

std::vector<std::vector<double>> GaussianPerturbSampler::generate_around(
    int count, const std::vector<double>& x, std::uint64_t seed) const {
  Rng rng(seed);
  std::vector<std::vector<double>> out;
  out.reserve(count);
  for (int s = 0; s < count; ++s) {
    std::vector<double> row(inputs_.size());
    for (std::size_t i = 0; i < inputs_.size(); ++i) {
      if (inputs_[i].kind == FeatureKind::numeric) {
        const auto& st = norm_.per_input[i];
        const double z = (x[i] - st.mean) / st.sd + rng.normal();
        row[i] = z * st.sd + st.mean;
      } else {
        row[i] = double(rng.weighted_index(level_freq_[i]));
      }
    }
    out.push_back(std::move(row));
  }
  return out;
}

nlohmann::json GaussianPerturbSampler::to_json() const {
  return {{"name", "gaussian"},
          {"inputs", features_to_json(inputs_)},
          {"normalization", normalization_to_json(norm_)},
          {"level_freq", level_freq_}};
}

std::unique_ptr<GaussianPerturbSampler> GaussianPerturbSampler::from_json(
    const nlohmann::json& j) {
  auto g = std::unique_ptr<GaussianPerturbSampler>(new GaussianPerturbSampler());
  g->inputs_ = features_from_json(j.at("inputs"));
  g->norm_ = normalization_from_json(j.at("normalization"));
  g->level_freq_ = j.at("level_freq").get<std::vector<std::vector<double>>>();
  return g;
}

std::vector<std::vector<double>> gaussian_perturb(const Dataset& ds,
                                                  const std::vector<double>& x,
                                                  int count, std::uint64_t seed) {
  return GaussianPerturbSampler(ds).generate_around(count, x, seed);
}

// ---------------------------------------------------------------------------
// k-means in normalized encoded space

namespace {

double sqdist(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

struct VecKMeans {
  std::vector<std::vector<double>> centers;
  std::vector<int> assignment;
  std::vector<double> wss_history;
};

VecKMeans kmeans_vectors(const std::vector<std::vector<double>>& V, int k, Rng& rng) {
  const int n = int(V.size());
  VecKMeans res;

  // k-means++ seeding.
  res.centers.push_back(V[rng.index(n)]);
  std::vector<double> d2(n);
  while (int(res.centers.size()) < k) {
    double total = 0.0;
    for (int i = 0; i < n; ++i) {
      double best = std::numeric_limits<double>::max();
      for (const auto& c : res.centers) best = std::min(best, sqdist(V[i], c));
      d2[i] = best;
      total += best;
    }
    if (total <= 0.0) {
      res.centers.push_back(V[rng.index(n)]);
      continue;
    }
    double u = rng.uniform() * total;
    int pick = n - 1;
    for (int i = 0; i < n; ++i) {
      u -= d2[i];
      if (u < 0.0) {
        pick = i;
        break;
      }
    }
    res.centers.push_back(V[pick]);
  }

  res.assignment.assign(n, -1);
  for (int iter = 0; iter < 100; ++iter) {
    bool changed = false;
    double wss = 0.0;
    for (int i = 0; i < n; ++i) {
      int best = 0;
      double bestd = sqdist(V[i], res.centers[0]);
      for (int c = 1; c < k; ++c) {
        const double d = sqdist(V[i], res.centers[c]);
        if (d < bestd) {
          bestd = d;
          best = c;
        }
      }
      if (res.assignment[i] != best) {
        res.assignment[i] = best;
        changed = true;
      }
      wss += bestd;
    }
    res.wss_history.push_back(wss);
    if (!changed) break;

    std::vector<std::vector<double>> sums(k, std::vector<double>(V[0].size(), 0.0));
    std::vector<int> counts(k, 0);
    for (int i = 0; i < n; ++i) {
      counts[res.assignment[i]]++;
      for (std::size_t j = 0; j < V[i].size(); ++j) sums[res.assignment[i]][j] += V[i][j];
    }
    for (int c = 0; c < k; ++c) {
      if (counts[c] == 0) {
        // Re-seed an empty centroid at the farthest point.
        int far = 0;
        double fard = -1.0;
        for (int i = 0; i < n; ++i) {
          const double d = sqdist(V[i], res.centers[res.assignment[i]]);
          if (d > fard) {
            fard = d;
            far = i;
          }
        }
        res.centers[c] = V[far];
      } else {
        for (std::size_t j = 0; j < sums[c].size(); ++j) {
          res.centers[c][j] = sums[c][j] / double(counts[c]);
        }
      }
    }
  }
  return res;
}

std::vector<std::vector<double>> normalized_rows(const Dataset& ds) {
  std::vector<std::vector<double>> V;
  V.reserve(ds.size());
  for (std::size_t i = 0; i < ds.size(); ++i) V.push_back(ds.normalize(ds.row(i)));
  return V;
}

}  // namespace

KMeansResult kmeans(const Dataset& ds, int k, std::uint64_t seed) {
  if (k < 1 || k > int(ds.size())) throw FormatError("k must be in [1, #rows]");
  Rng rng(seed);
  const auto V = normalized_rows(ds);
  auto res = kmeans_vectors(V, k, rng);
  KMeansResult out;
  out.assignment = std::move(res.assignment);
  out.wss_history = std::move(res.wss_history);
  for (const auto& c : res.centers) {
    out.centroids.push_back(
        raw_from_normalized(ds.inputs(), ds.blocks(), ds.normalization(), c));
  }
  return out;
}

DistributionSet kmeans_distribution_set(const Dataset& ds, int k, std::uint64_t seed) {
  DistributionSet d;
  d.rows = kmeans(ds, k, seed).centroids;
  d.provenance = "kmeans(" + std::to_string(k) + ")";
  return d;
}

int silhouette_select_k(const Dataset& ds, int k_lo, int k_hi, std::uint64_t seed) {
  if (k_lo > k_hi) throw FormatError("empty k range");
  if (k_lo < 2 || k_hi > int(ds.size()) - 1) {
    throw FormatError("k range must lie within [2, #rows-1]");
  }
  const auto V = normalized_rows(ds);
  const int n = int(V.size());

  int best_k = k_lo;
  double best_s = -2.0;
  for (int k = k_lo; k <= k_hi; ++k) {
    Rng rng(derive_seed(seed, "silhouette/" + std::to_string(k)));
    const auto km = kmeans_vectors(V, k, rng);
    std::vector<int> counts(k, 0);
    for (int a : km.assignment) counts[a]++;

    double total = 0.0;
    for (int i = 0; i < n; ++i) {
      const int ci = km.assignment[i];
      if (counts[ci] <= 1) continue;  // singleton: silhouette 0
      std::vector<double> mean_d(k, 0.0);
      for (int j = 0; j < n; ++j) {
        if (j == i) continue;
        mean_d[km.assignment[j]] += std::sqrt(sqdist(V[i], V[j]));
      }
      const double a = mean_d[ci] / double(counts[ci] - 1);
      double b = std::numeric_limits<double>::max();
      for (int c = 0; c < k; ++c) {
        if (c == ci || counts[c] == 0) continue;
        b = std::min(b, mean_d[c] / double(counts[c]));
      }
      total += (b - a) / std::max(a, b);
    }
    const double s = total / double(n);
    if (s > best_s + 1e-12) {
      best_s = s;
      best_k = k;
    }
  }
  return best_k;
}

KMeansSampler::KMeansSampler(const Dataset& ds, int k, std::uint64_t seed)
    : centroids_(kmeans(ds, k, seed).centroids) {}

std::vector<std::vector<double>> KMeansSampler::generate(int count,
                                                         std::uint64_t seed) const {
  Rng rng(seed);
  std::vector<std::vector<double>> out;
  out.reserve(count);
  for (int i = 0; i < count; ++i) out.push_back(centroids_[rng.index(centroids_.size())]);
  return out;
}

std::vector<std::vector<double>> ResampleSampler::generate(int count,
                                                           std::uint64_t seed) const {
  Rng rng(seed);
  std::vector<std::vector<double>> out;
  out.reserve(count);
  for (int i = 0; i < count; ++i) out.push_back(rows_[rng.index(rows_.size())]);
  return out;
}

// ---------------------------------------------------------------------------
// RBF-network generator

std::unique_ptr<RbfDataGen> fit_rbf_datagen(const Dataset& ds, int kernel_count,
                                            std::uint64_t seed) {
  if (kernel_count < 1) throw FormatError("kernel_count must be >= 1");
  if (kernel_count > int(ds.size())) kernel_count = int(ds.size());
  auto g = std::unique_ptr<RbfDataGen>(new RbfDataGen());
  g->inputs_ = ds.inputs();
  g->norm_ = ds.normalization();
  g->blocks_ = ds.blocks();
  g->encoded_dim_ = ds.encoded_dim();

  Rng rng(seed);
  const auto V = normalized_rows(ds);
  const auto km = kmeans_vectors(V, kernel_count, rng);

  std::vector<std::vector<int>> members(kernel_count);
  for (std::size_t i = 0; i < V.size(); ++i) members[km.assignment[i]].push_back(int(i));

  for (int c = 0; c < kernel_count; ++c) {
    RbfDataGen::Kernel ker;
    ker.center = km.centers[c];
    ker.var.assign(g->encoded_dim_, 0.0);
    ker.weight = double(members[c].size()) / double(V.size());
    ker.class_freq.assign(ds.n_classes(), 0.0);
    for (int i : members[c]) {
      ker.class_freq[ds.label(i)] += 1.0;
      for (int j = 0; j < g->encoded_dim_; ++j) {
        const double d = V[i][j] - ker.center[j];
        ker.var[j] += d * d;
      }
    }
    const double denom = std::max<std::size_t>(1, members[c].size());
    for (int j = 0; j < g->encoded_dim_; ++j) {
      ker.var[j] = std::max(ker.var[j] / double(denom), 1e-6);
    }
    if (!members[c].empty()) {
      for (double& f : ker.class_freq) f /= double(members[c].size());
    }
    g->kernels_.push_back(std::move(ker));
  }
  return g;
}

std::vector<std::vector<double>> RbfDataGen::generate(int count,
                                                      std::uint64_t seed) const {
  Rng rng(seed);
  std::vector<double> weights;
  for (const auto& k : kernels_) weights.push_back(k.weight);
  std::vector<std::vector<double>> out;
  out.reserve(count);
  for (int s = 0; s < count; ++s) {
    const auto& k = kernels_[rng.weighted_index(weights)];
    std::vector<double> z(encoded_dim_);
    for (int j = 0; j < encoded_dim_; ++j) {
      z[j] = k.center[j] + std::sqrt(k.var[j]) * rng.normal();
    }
    out.push_back(raw_from_normalized(inputs_, blocks_, norm_, z));
  }
  return out;
}

nlohmann::json RbfDataGen::to_json() const {
  nlohmann::json jk = nlohmann::json::array();
  for (const auto& k : kernels_) {
    jk.push_back({{"center", k.center},
                  {"var", k.var},
                  {"weight", k.weight},
                  {"class_freq", k.class_freq}});
  }
  return {{"name", "rbf"},
          {"inputs", features_to_json(inputs_)},
          {"normalization", normalization_to_json(norm_)},
          {"kernels", jk}};
}

std::unique_ptr<RbfDataGen> RbfDataGen::from_json(const nlohmann::json& j) {
  auto g = std::unique_ptr<RbfDataGen>(new RbfDataGen());
  g->inputs_ = features_from_json(j.at("inputs"));
  g->norm_ = normalization_from_json(j.at("normalization"));
  auto [blocks, dim] = input_blocks(g->inputs_);
  g->blocks_ = std::move(blocks);
  g->encoded_dim_ = dim;
  for (const auto& jk : j.at("kernels")) {
    Kernel k;
    k.center = jk.at("center").get<std::vector<double>>();
    k.var = jk.at("var").get<std::vector<double>>();
    k.weight = jk.at("weight").get<double>();
    k.class_freq = jk.at("class_freq").get<std::vector<double>>();
    g->kernels_.push_back(std::move(k));
  }
  return g;
}

// ---------------------------------------------------------------------------
// Tree-ensemble generator

namespace {

struct TreeBuilder {
  const std::vector<std::vector<double>>& rows;
  const std::vector<Feature>& inputs;
  const TreeEnsembleParams& params;
  std::vector<TreeEnsembleGen::Node>& tree;
  Rng& rng;

  int build(std::vector<int>& idx, int depth) {
    const int me = int(tree.size());
    tree.emplace_back();
    if (int(idx.size()) >= 2 * params.min_leaf && depth < params.max_depth) {
      for (int attempt = 0; attempt < 10; ++attempt) {
        const int f = int(rng.index(inputs.size()));
        if (try_split(me, f, idx)) return me;
      }
    }
    tree[me].members = idx;
    return me;
  }

  bool try_split(int me, int f, std::vector<int>& idx) {
    std::vector<int> li, ri;
    if (inputs[f].kind == FeatureKind::numeric) {
      std::vector<double> vals;
      vals.reserve(idx.size());
      for (int i : idx) vals.push_back(rows[i][f]);
      std::sort(vals.begin(), vals.end());
      // Boundaries between distinct adjacent values leaving min_leaf on
      // each side.
      std::vector<int> cuts;
      for (int i = params.min_leaf - 1; i + params.min_leaf < int(vals.size()); ++i) {
        if (vals[i] != vals[i + 1]) cuts.push_back(i);
      }
      if (cuts.empty()) return false;
      const int cut = cuts[rng.index(cuts.size())];
      const double thr = rng.uniform(vals[cut], vals[cut + 1]);
      for (int i : idx) (rows[i][f] <= thr ? li : ri).push_back(i);
      if (int(li.size()) < params.min_leaf || int(ri.size()) < params.min_leaf) {
        return false;
      }
      tree[me].threshold = thr;
    } else {
      const int n_levels = int(inputs[f].levels.size());
      std::vector<std::uint8_t> go_left(n_levels, 0);
      bool ok = false;
      for (int attempt = 0; attempt < 8 && !ok; ++attempt) {
        int n_left = 0;
        for (int l = 0; l < n_levels; ++l) {
          go_left[l] = rng.bernoulli(0.5) ? 1 : 0;
          n_left += go_left[l];
        }
        if (n_left == 0 || n_left == n_levels) continue;
        li.clear();
        ri.clear();
        for (int i : idx) {
          (go_left[int(rows[i][f])] ? li : ri).push_back(i);
        }
        ok = int(li.size()) >= params.min_leaf && int(ri.size()) >= params.min_leaf;
      }
      if (!ok) return false;
      tree[me].go_left = go_left;
    }
    tree[me].feature = f;
    tree[me].w_left = double(li.size());
    tree[me].w_right = double(ri.size());
    const int l = build(li, 0);  // depth bookkeeping handled by caller chain
    const int r = build(ri, 0);
    tree[me].left = l;
    tree[me].right = r;
    return true;
  }
};

}  // namespace

std::unique_ptr<TreeEnsembleGen> fit_tree_ensemble(const Dataset& ds,
                                                   const TreeEnsembleParams& params,
                                                   std::uint64_t seed) {
  if (params.trees < 1) throw FormatError("tree_count must be >= 1");
  auto g = std::unique_ptr<TreeEnsembleGen>(new TreeEnsembleGen());
  g->rows_ = ds.rows();
  g->inputs_ = ds.inputs();
  g->params_ = params;
  for (int t = 0; t < params.trees; ++t) {
    Rng rng(derive_seed(seed, "gen-tree/" + std::to_string(t)));
    std::vector<int> idx(g->rows_.size());
    for (std::size_t i = 0; i < g->rows_.size(); ++i) {
      idx[i] = int(rng.index(g->rows_.size()));
    }
    std::vector<TreeEnsembleGen::Node> tree;
    TreeBuilder builder{g->rows_, g->inputs_, params, tree, rng};
    builder.build(idx, 0);
    g->trees_.push_back(std::move(tree));
  }
  return g;
}

void TreeEnsembleGen::walk_fill(std::vector<double>& out, std::vector<bool>& assigned,
                                int hops_left, Rng& rng) const {
  const auto& tree = trees_[rng.index(trees_.size())];
  std::vector<int> path_features;
  int n = 0;
  while (tree[n].feature >= 0) {
    const auto& node = tree[n];
    const int f = node.feature;
    bool left;
    if (assigned[f]) {
      left = inputs_[f].kind == FeatureKind::numeric
                 ? out[f] <= node.threshold
                 : bool(node.go_left[int(out[f])]);
    } else {
      left = rng.uniform() * (node.w_left + node.w_right) < node.w_left;
      path_features.push_back(f);
    }
    n = left ? node.left : node.right;
  }
  const auto& members = tree[n].members;
  auto sample_from_leaf = [&](int f) {
    out[f] = rows_[members[rng.index(members.size())]][f];
    assigned[f] = true;
  };
  // Path-constrained features are always settled at this leaf; the remaining
  // ones either come from the same leaf or are routed through another tree.
  for (int f : path_features) {
    if (!assigned[f]) sample_from_leaf(f);
  }
  bool missing = false;
  for (std::size_t f = 0; f < assigned.size(); ++f) {
    if (!assigned[f]) missing = true;
  }
  if (!missing) return;
  if (hops_left > 0) {
    walk_fill(out, assigned, hops_left - 1, rng);
  } else {
    for (std::size_t f = 0; f < assigned.size(); ++f) {
      if (!assigned[f]) sample_from_leaf(int(f));
    }
  }
}

std::vector<std::vector<double>> TreeEnsembleGen::generate(int count,
                                                           std::uint64_t seed) const {
  Rng rng(seed);
  std::vector<std::vector<double>> out;
  out.reserve(count);
  for (int s = 0; s < count; ++s) {
    std::vector<double> row(inputs_.size(), 0.0);
    std::vector<bool> assigned(inputs_.size(), false);
    walk_fill(row, assigned, params_.reroute_hops, rng);
    out.push_back(std::move(row));
  }
  return out;
}

std::vector<std::vector<double>> TreeEnsembleGen::generate_around(
    int count, const std::vector<double>& x, std::uint64_t seed) const {
  Rng rng(seed);
  std::vector<std::vector<double>> out;
  out.reserve(count);
  for (int s = 0; s < count; ++s) {
    std::vector<bool> hidden(inputs_.size(), false);
    bool any = false;
    while (!any) {
      for (std::size_t f = 0; f < hidden.size(); ++f) {
        hidden[f] = rng.bernoulli(0.5);
        any = any || hidden[f];
      }
    }
    std::vector<double> row = x;
    std::vector<bool> assigned(inputs_.size());
    for (std::size_t f = 0; f < hidden.size(); ++f) assigned[f] = !hidden[f];
    walk_fill(row, assigned, 0, rng);
    out.push_back(std::move(row));
  }
  return out;
}

std::vector<double> TreeEnsembleGen::fill_in(const std::vector<double>& x,
                                             const std::vector<bool>& hidden,
                                             std::uint64_t seed) const {
  std::vector<double> row = x;
  std::vector<bool> assigned(x.size());
  bool any = false;
  for (std::size_t f = 0; f < x.size(); ++f) {
    assigned[f] = !hidden[f];
    any = any || hidden[f];
  }
  if (!any) return row;
  Rng rng(seed);
  walk_fill(row, assigned, 0, rng);
  return row;
}

nlohmann::json TreeEnsembleGen::to_json() const {
  nlohmann::json jt = nlohmann::json::array();
  for (const auto& tree : trees_) {
    nlohmann::json jn = nlohmann::json::array();
    for (const auto& n : tree) {
      if (n.feature >= 0) {
        nlohmann::json node{{"f", n.feature},
                            {"l", n.left},
                            {"r", n.right},
                            {"wl", n.w_left},
                            {"wr", n.w_right}};
        if (n.go_left.empty()) {
          node["t"] = n.threshold;
        } else {
          node["mask"] = n.go_left;
        }
        jn.push_back(std::move(node));
      } else {
        jn.push_back({{"members", n.members}});
      }
    }
    jt.push_back(std::move(jn));
  }
  return {{"name", "treeEns"},
          {"inputs", features_to_json(inputs_)},
          {"params",
           {{"trees", params_.trees},
            {"min_leaf", params_.min_leaf},
            {"max_depth", params_.max_depth},
            {"reroute_hops", params_.reroute_hops}}},
          {"rows", rows_},
          {"trees_nodes", jt}};
}

std::unique_ptr<TreeEnsembleGen> TreeEnsembleGen::from_json(const nlohmann::json& j) {
  auto g = std::unique_ptr<TreeEnsembleGen>(new TreeEnsembleGen());
  g->inputs_ = features_from_json(j.at("inputs"));
  g->rows_ = j.at("rows").get<std::vector<std::vector<double>>>();
  const auto& jp = j.at("params");
  g->params_.trees = jp.at("trees").get<int>();
  g->params_.min_leaf = jp.at("min_leaf").get<int>();
  g->params_.max_depth = jp.at("max_depth").get<int>();
  g->params_.reroute_hops = jp.at("reroute_hops").get<int>();
  for (const auto& jtree : j.at("trees_nodes")) {
    std::vector<Node> tree;
    for (const auto& jn : jtree) {
      Node n;
      if (jn.contains("f")) {
        n.feature = jn.at("f").get<int>();
        n.left = jn.at("l").get<int>();
        n.right = jn.at("r").get<int>();
        n.w_left = jn.at("wl").get<double>();
        n.w_right = jn.at("wr").get<double>();
        if (jn.contains("mask")) {
          n.go_left = jn.at("mask").get<std::vector<std::uint8_t>>();
        } else {
          n.threshold = jn.at("t").get<double>();
        }
      } else {
        n.members = jn.at("members").get<std::vector<int>>();
      }
      tree.push_back(std::move(n));
    }
    g->trees_.push_back(std::move(tree));
  }
  return g;
}

// ---------------------------------------------------------------------------
// MCD-VAE

struct McdVae::Impl {
  nn::Mlp encoder;  // E -> hidden -> 2L (mu, logvar)
  nn::Mlp decoder;  // L -> hidden -> E
  McdVaeParams params;
  std::vector<Feature> inputs;
  std::vector<Dataset::Block> blocks;
  Normalization norm;
  int latent = 2;
  int encoded_dim = 0;
  bool non_convergence = false;
  double initial_loss = 0.0;
  double final_loss = 0.0;

  std::vector<double> decode_disp(const nn::Vec& z, double p, Rng& rng) const {
    const nn::Vec out = p > 0.0 ? decoder.forward_dropout(z, p, rng) : decoder.forward(z);
    std::vector<double> v(out.data(), out.data() + out.size());
    return raw_from_normalized(inputs, blocks, norm, v);
  }
};

std::unique_ptr<McdVae> fit_mcd_vae(const Dataset& ds, const McdVaeParams& params,
                                    std::uint64_t seed) {
  auto impl = std::make_shared<McdVae::Impl>();
  impl->params = params;
  impl->inputs = ds.inputs();
  impl->blocks = ds.blocks();
  impl->norm = ds.normalization();
  impl->encoded_dim = ds.encoded_dim();
  impl->latent = params.latent > 0
                     ? params.latent
                     : std::max(2, (ds.encoded_dim() + 7) / 8);
  if (int(ds.size()) < 10 * impl->latent) {
    throw FormatError("need at least 10 rows per latent dimension");
  }
  if (!(params.dropout >= 0.0 && params.dropout < 1.0)) {
    throw FormatError("dropout must lie in [0, 1)");
  }

  Rng rng(seed);
  const int E = impl->encoded_dim;
  const int L = impl->latent;
  impl->encoder = nn::Mlp({E, params.hidden, 2 * L}, rng);
  impl->decoder = nn::Mlp({L, params.hidden, E}, rng);

  std::vector<nn::Vec> X;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const auto v = ds.normalize(ds.row(i));
    X.push_back(nn::Vec::Map(v.data(), long(v.size())));
  }

  auto recon_error = [&]() {
    double total = 0.0;
    for (const auto& x : X) {
      const nn::Vec h = impl->encoder.forward(x);
      const nn::Vec xhat = impl->decoder.forward(h.head(L));
      total += 0.5 * (xhat - x).squaredNorm();
    }
    return total / double(X.size());
  };
  impl->initial_loss = recon_error();

  nn::Adam opt_enc, opt_dec;
  opt_enc.lr = params.lr;
  opt_dec.lr = params.lr;
  opt_enc.init_like(impl->encoder);
  opt_dec.init_like(impl->decoder);
  nn::Mlp::Grads g_enc, g_dec;
  g_enc.init_like(impl->encoder);
  g_dec.init_like(impl->decoder);

  std::vector<int> order(X.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<double> epoch_loss(params.epochs, 0.0);

  for (int e = 0; e < params.epochs; ++e) {
    rng.shuffle(order);
    double total = 0.0;
    for (std::size_t start = 0; start < order.size(); start += std::size_t(params.batch)) {
      g_enc.zero();
      g_dec.zero();
      const std::size_t end = std::min(order.size(), start + std::size_t(params.batch));
      const double bn = double(end - start);
      for (std::size_t s = start; s < end; ++s) {
        const nn::Vec& x = X[order[s]];
        nn::Mlp::Cache c_enc, c_dec;
        const nn::Vec h = impl->encoder.forward_cache(x, 0.0, nullptr, c_enc);
        const nn::Vec mu = h.head(L);
        const nn::Vec logvar = h.tail(L);
        nn::Vec eps(L);
        for (int i = 0; i < L; ++i) eps(i) = rng.normal();
        const nn::Vec sigma = (0.5 * logvar).array().exp();
        const nn::Vec z = mu + sigma.cwiseProduct(eps);
        const nn::Vec xhat =
            impl->decoder.forward_cache(z, params.dropout, &rng, c_dec);

        const nn::Vec diff = xhat - x;
        const double recon = 0.5 * diff.squaredNorm();
        const double kl =
            0.5 * (logvar.array().exp() + mu.array().square() - 1.0 - logvar.array())
                      .sum();
        total += recon + params.kl_weight * kl;

        const nn::Vec dz = impl->decoder.backward(c_dec, diff / bn, g_dec);
        nn::Vec dh(2 * L);
        dh.head(L) = dz + (params.kl_weight / bn) * mu;
        dh.tail(L) = 0.5 * dz.cwiseProduct(eps).cwiseProduct(sigma) +
                     (params.kl_weight / bn) * 0.5 *
                         (logvar.array().exp() - 1.0).matrix();
        impl->encoder.backward(c_enc, dh, g_enc);
      }
      opt_enc.step(impl->encoder, g_enc);
      opt_dec.step(impl->decoder, g_dec);
    }
    epoch_loss[e] = total / double(X.size());
  }

  // No new loss minimum in the final fifth of training means the run failed
  // to keep improving.
  const int tail = std::max(1, params.epochs / 5);
  double best_head = HUGE_VAL, best_tail = HUGE_VAL;
  for (int e = 0; e < params.epochs; ++e) {
    (e < params.epochs - tail ? best_head : best_tail) =
        std::min(e < params.epochs - tail ? best_head : best_tail, epoch_loss[e]);
  }
  impl->non_convergence = params.epochs > 1 && best_tail >= best_head;
  impl->final_loss = recon_error();

  auto vae = std::unique_ptr<McdVae>(new McdVae());
  vae->impl_ = impl;
  return vae;
}

std::vector<std::vector<double>> McdVae::generate(int count, std::uint64_t seed) const {
  Rng rng(seed);
  std::vector<std::vector<double>> out;
  out.reserve(count);
  for (int s = 0; s < count; ++s) {
    nn::Vec z(impl_->latent);
    for (int i = 0; i < impl_->latent; ++i) z(i) = rng.normal();
    out.push_back(impl_->decode_disp(z, impl_->params.dropout, rng));
  }
  return out;
}

std::vector<std::vector<double>> McdVae::generate_around(
    int count, const std::vector<double>& x, std::uint64_t seed) const {
  Rng rng(seed);
  const auto xn = [&] {
    // normalize against stored stats
    std::vector<double> enc(impl_->encoded_dim, 0.0);
    auto [blocks, dim] = input_blocks(impl_->inputs);
    for (std::size_t i = 0; i < impl_->inputs.size(); ++i) {
      if (impl_->inputs[i].kind == FeatureKind::numeric) {
        enc[blocks[i].offset] =
            (x[i] - impl_->norm.per_input[i].mean) / impl_->norm.per_input[i].sd;
      } else {
        enc[blocks[i].offset + int(x[i])] = 1.0;
      }
    }
    return enc;
  }();
  const nn::Vec h = impl_->encoder.forward(nn::Vec::Map(xn.data(), long(xn.size())));
  const int L = impl_->latent;
  const nn::Vec mu = h.head(L);
  const nn::Vec sigma = (0.5 * h.tail(L)).array().exp();
  // One latent draw; Monte Carlo dropout provides the variety.
  nn::Vec z(L);
  for (int i = 0; i < L; ++i) z(i) = mu(i) + sigma(i) * rng.normal();
  std::vector<std::vector<double>> out;
  out.reserve(count);
  for (int s = 0; s < count; ++s) {
    out.push_back(impl_->decode_disp(z, impl_->params.dropout, rng));
  }
  return out;
}

namespace {

nlohmann::json mlp_to_json(const nn::Mlp& m) {
  nlohmann::json layers = nlohmann::json::array();
  for (std::size_t l = 0; l < m.W.size(); ++l) {
    std::vector<std::vector<double>> w(m.W[l].rows());
    for (long i = 0; i < m.W[l].rows(); ++i) {
      w[i].resize(m.W[l].cols());
      for (long j = 0; j < m.W[l].cols(); ++j) w[i][j] = m.W[l](i, j);
    }
    layers.push_back(
        {{"W", w},
         {"b", std::vector<double>(m.b[l].data(), m.b[l].data() + m.b[l].size())}});
  }
  return layers;
}

nn::Mlp mlp_from_json(const nlohmann::json& j) {
  nn::Mlp m;
  for (const auto& jl : j) {
    const auto w = jl.at("W").get<std::vector<std::vector<double>>>();
    const auto b = jl.at("b").get<std::vector<double>>();
    nn::Mat W(w.size(), w[0].size());
    for (std::size_t i = 0; i < w.size(); ++i) {
      for (std::size_t c = 0; c < w[i].size(); ++c) W(i, c) = w[i][c];
    }
    m.W.push_back(std::move(W));
    m.b.push_back(nn::Vec::Map(b.data(), long(b.size())));
  }
  return m;
}

}  // namespace

bool McdVae_nonconv(const McdVae& v);  // forward decl silence

nlohmann::json McdVae::to_json() const {
  return {{"name", "mcdvae"},
          {"inputs", features_to_json(impl_->inputs)},
          {"normalization", normalization_to_json(impl_->norm)},
          {"latent", impl_->latent},
          {"dropout", impl_->params.dropout},
          {"encoder", mlp_to_json(impl_->encoder)},
          {"decoder", mlp_to_json(impl_->decoder)},
          {"non_convergence", impl_->non_convergence}};
}

std::unique_ptr<McdVae> McdVae::from_json(const nlohmann::json& j) {
  auto impl = std::make_shared<Impl>();
  impl->inputs = features_from_json(j.at("inputs"));
  impl->norm = normalization_from_json(j.at("normalization"));
  auto [blocks, dim] = input_blocks(impl->inputs);
  impl->blocks = std::move(blocks);
  impl->encoded_dim = dim;
  impl->latent = j.at("latent").get<int>();
  impl->params.latent = impl->latent;
  impl->params.dropout = j.at("dropout").get<double>();
  impl->encoder = mlp_from_json(j.at("encoder"));
  impl->decoder = mlp_from_json(j.at("decoder"));
  impl->non_convergence = j.at("non_convergence").get<bool>();
  auto vae = std::unique_ptr<McdVae>(new McdVae());
  vae->impl_ = impl;
  return vae;
}

bool McdVae_nonconv(const McdVae& v) { return v.non_convergence(); }

nlohmann::json generator_to_json(const GeneratorModel& g) { return g.to_json(); }

std::unique_ptr<GeneratorModel> generator_from_json(const nlohmann::json& j) {
  const auto name = j.at("name").get<std::string>();
  if (name == "gaussian") return GaussianPerturbSampler::from_json(j);
  if (name == "rbf") return RbfDataGen::from_json(j);
  if (name == "treeEns") return TreeEnsembleGen::from_json(j);
  if (name == "mcdvae") return McdVae::from_json(j);
  throw FormatError("unknown generator '" + name + "'");
}

}  // namespace gxplain
