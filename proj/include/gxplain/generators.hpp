#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "gxplain/tabular.hpp"

namespace gxplain {

struct GenCaps {
  bool whole = false;
  bool around = false;
  bool fill_in = false;
};

// Fitted sampler. Generated rows conform to the training schema; fill_in
// leaves unmasked coordinates of x bit-identical. All entry points are
// read-only after fitting and take their own seed.
class GeneratorModel {
 public:
  virtual ~GeneratorModel() = default;
  virtual std::string name() const = 0;
  virtual GenCaps caps() const = 0;

  virtual std::vector<std::vector<double>> generate(int count,
                                                    std::uint64_t seed) const;
  virtual std::vector<std::vector<double>> generate_around(
      int count, const std::vector<double>& x, std::uint64_t seed) const;
  // hidden marks the coordinates to resample; the rest stay fixed to x.
  virtual std::vector<double> fill_in(const std::vector<double>& x,
                                      const std::vector<bool>& hidden,
                                      std::uint64_t seed) const;

  virtual nlohmann::json to_json() const;
};

// --------------------------------------------------------------------------
// Gaussian perturbation as used by the original LIME sampling: unit noise on
// z-scored numerics, categoricals resampled from training level frequencies.
class GaussianPerturbSampler final : public GeneratorModel {
 public:
  explicit GaussianPerturbSampler(const Dataset& ds);
  std::string name() const override { return "gaussian"; }
  GenCaps caps() const override { return {false, true, false}; }
  std::vector<std::vector<double>> generate_around(
      int count, const std::vector<double>& x, std::uint64_t seed) const override;
  nlohmann::json to_json() const override;
  static std::unique_ptr<GaussianPerturbSampler> from_json(const nlohmann::json& j);

 private:
  GaussianPerturbSampler() = default;
  std::vector<Feature> inputs_;
  Normalization norm_;
  std::vector<std::vector<double>> level_freq_;  // per categorical input
};

std::vector<std::vector<double>> gaussian_perturb(const Dataset& ds,
                                                  const std::vector<double>& x,
                                                  int count, std::uint64_t seed);

// --------------------------------------------------------------------------
// k-means (Lloyd's algorithm, k-means++ seeding) in normalized encoded space.

struct KMeansResult {
  std::vector<std::vector<double>> centroids;  // raw rows, schema conforming
  std::vector<int> assignment;
  std::vector<double> wss_history;  // after each assignment step
};

KMeansResult kmeans(const Dataset& ds, int k, std::uint64_t seed);

struct DistributionSet {
  std::vector<std::vector<double>> rows;  // raw instances
  std::string provenance;
};

DistributionSet kmeans_distribution_set(const Dataset& ds, int k, std::uint64_t seed);

// Mean silhouette coefficient (Euclidean, normalized encoded space) for each
// k in [k_lo, k_hi]; returns the maximizer, smallest k on ties.
int silhouette_select_k(const Dataset& ds, int k_lo, int k_hi, std::uint64_t seed);

// Resamples k-means centroids with replacement; used where a whole
// distribution sampler is required (e.g. attack training pools).
class KMeansSampler final : public GeneratorModel {
 public:
  KMeansSampler(const Dataset& ds, int k, std::uint64_t seed);
  std::string name() const override { return "kmeans"; }
  GenCaps caps() const override { return {true, false, false}; }
  std::vector<std::vector<double>> generate(int count, std::uint64_t seed) const override;
  const std::vector<std::vector<double>>& centroids() const { return centroids_; }
  int k() const { return int(centroids_.size()); }

 private:
  std::vector<std::vector<double>> centroids_;
};

// Bootstrap of the training rows; baseline for distribution checks.
class ResampleSampler final : public GeneratorModel {
 public:
  explicit ResampleSampler(const Dataset& ds) : rows_(ds.rows()) {}
  std::string name() const override { return "resample"; }
  GenCaps caps() const override { return {true, false, false}; }
  std::vector<std::vector<double>> generate(int count, std::uint64_t seed) const override;

 private:
  std::vector<std::vector<double>> rows_;
};

// --------------------------------------------------------------------------
// RBF-network generator: Gaussian units centered by k-means with per-unit
// diagonal covariance; sampling picks a unit by member weight.

class RbfDataGen final : public GeneratorModel {
 public:
  std::string name() const override { return "rbf"; }
  GenCaps caps() const override { return {true, false, false}; }
  std::vector<std::vector<double>> generate(int count, std::uint64_t seed) const override;
  nlohmann::json to_json() const override;
  static std::unique_ptr<RbfDataGen> from_json(const nlohmann::json& j);

  struct Kernel {
    std::vector<double> center;  // normalized encoded space
    std::vector<double> var;     // diagonal, floored at 1e-6
    double weight = 0.0;
    std::vector<double> class_freq;
  };
  const std::vector<Kernel>& kernels() const { return kernels_; }

  friend std::unique_ptr<RbfDataGen> fit_rbf_datagen(const Dataset& ds,
                                                     int kernel_count,
                                                     std::uint64_t seed);

 private:
  std::vector<Kernel> kernels_;
  std::vector<Feature> inputs_;
  Normalization norm_;
  std::vector<Dataset::Block> blocks_;
  int encoded_dim_ = 0;
  std::vector<double> decode_normalized(const std::vector<double>& z) const;
};

std::unique_ptr<RbfDataGen> fit_rbf_datagen(const Dataset& ds, int kernel_count,
                                            std::uint64_t seed);

// --------------------------------------------------------------------------
// Tree-ensemble generator: random density trees over the raw feature space.
// Generation walks a random tree sampling branch constraints, then fills
// features from the leaf's empirical distribution; fill-in constrains the
// walk to the fixed coordinates (TEnsFillIn).

struct TreeEnsembleParams {
  int trees = 50;
  int min_leaf = 5;
  int max_depth = 25;
  int reroute_hops = 1;  // extra trees consulted for path-untested features
};

class TreeEnsembleGen final : public GeneratorModel {
 public:
  std::string name() const override { return "treeEns"; }
  GenCaps caps() const override { return {true, true, true}; }
  std::vector<std::vector<double>> generate(int count, std::uint64_t seed) const override;
  std::vector<std::vector<double>> generate_around(
      int count, const std::vector<double>& x, std::uint64_t seed) const override;
  std::vector<double> fill_in(const std::vector<double>& x,
                              const std::vector<bool>& hidden,
                              std::uint64_t seed) const override;
  nlohmann::json to_json() const override;
  static std::unique_ptr<TreeEnsembleGen> from_json(const nlohmann::json& j);

  struct Node {
    int feature = -1;  // input feature index; -1 marks a leaf
    double threshold = 0.0;             // numeric split
    std::vector<std::uint8_t> go_left;  // categorical split: level -> side
    int left = -1, right = -1;
    double w_left = 0.0, w_right = 0.0;
    std::vector<int> members;  // leaf: indices into rows_
  };

  friend std::unique_ptr<TreeEnsembleGen> fit_tree_ensemble(
      const Dataset& ds, const TreeEnsembleParams& params, std::uint64_t seed);

 private:
  std::vector<std::vector<Node>> trees_;
  std::vector<std::vector<double>> rows_;
  std::vector<Feature> inputs_;
  TreeEnsembleParams params_;

  void walk_fill(std::vector<double>& out, std::vector<bool>& assigned,
                 int hops_left, Rng& rng) const;
};

std::unique_ptr<TreeEnsembleGen> fit_tree_ensemble(const Dataset& ds,
                                                   const TreeEnsembleParams& params,
                                                   std::uint64_t seed);

// --------------------------------------------------------------------------
// Variational autoencoder with Monte Carlo dropout on the decoder.

struct McdVaeParams {
  int latent = 0;       // 0 -> max(2, ceil(encoded/8))
  int hidden = 64;
  double dropout = 0.3;
  int epochs = 200;
  int batch = 32;
  double lr = 1e-3;
  double kl_weight = 1.0;
};

class McdVae final : public GeneratorModel {
 public:
  std::string name() const override { return "mcdvae"; }
  GenCaps caps() const override { return {true, true, false}; }
  std::vector<std::vector<double>> generate(int count, std::uint64_t seed) const override;
  std::vector<std::vector<double>> generate_around(
      int count, const std::vector<double>& x, std::uint64_t seed) const override;
  bool non_convergence() const { return non_convergence_; }
  double initial_loss() const { return initial_loss_; }
  double final_loss() const { return final_loss_; }
  nlohmann::json to_json() const override;
  static std::unique_ptr<McdVae> from_json(const nlohmann::json& j);

  friend std::unique_ptr<McdVae> fit_mcd_vae(const Dataset& ds,
                                             const McdVaeParams& params,
                                             std::uint64_t seed);

 private:
  struct Impl;
  std::shared_ptr<Impl> impl_;
};

std::unique_ptr<McdVae> fit_mcd_vae(const Dataset& ds, const McdVaeParams& params,
                                    std::uint64_t seed);

// Reconstructs a raw row from a normalized encoded vector: numerics are
// un-z-scored, categorical blocks snap to the largest coordinate.
std::vector<double> raw_from_normalized(const std::vector<Feature>& inputs,
                                        const std::vector<Dataset::Block>& blocks,
                                        const Normalization& norm,
                                        const std::vector<double>& z);

nlohmann::json generator_to_json(const GeneratorModel& g);
std::unique_ptr<GeneratorModel> generator_from_json(const nlohmann::json& j);

}  // namespace gxplain
