#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "gxplain/errors.hpp"

namespace gxplain {

enum class FeatureKind { numeric, categorical };
enum class FeatureRole { predictor, target, sensitive, unrelated };

std::string to_string(FeatureKind k);
std::string to_string(FeatureRole r);

struct Feature {
  std::string name;
  FeatureKind kind = FeatureKind::numeric;
  FeatureRole role = FeatureRole::predictor;
  std::vector<std::string> levels;  // categorical only, declared order

  // Index of a level name; throws UnknownLevelError.
  int level_index(const std::string& value) const;
};

// Ordered feature list including the target. Exactly one target, binary
// categorical; names unique; categoricals have >= 2 levels.
struct Schema {
  std::vector<Feature> features;

  int target_index() const;
  const Feature& target() const { return features[target_index()]; }
  int find(const std::string& name) const;  // -1 if absent
  void validate() const;                    // throws FormatError on violations
};

nlohmann::json schema_to_json(const Schema& s);
Schema schema_from_json(const nlohmann::json& j);
Schema load_schema(const std::string& path);

nlohmann::json features_to_json(const std::vector<Feature>& features);
std::vector<Feature> features_from_json(const nlohmann::json& j);

// Per input feature z-score statistics. Categorical entries are identity.
struct FeatureStats {
  double mean = 0.0;
  double sd = 1.0;
  bool degenerate = false;  // zero-variance numeric column
};

struct Normalization {
  std::vector<FeatureStats> per_input;
};

nlohmann::json normalization_to_json(const Normalization& n);
Normalization normalization_from_json(const nlohmann::json& j);

// Raw cell convention: numeric features hold the value, categorical features
// hold the level index as a double. A raw row covers the input features only
// (schema order with the target removed); labels live beside the rows.
class Dataset {
 public:
  Dataset() = default;
  Dataset(Schema schema, std::vector<std::vector<double>> rows,
          std::vector<int> labels);

  const Schema& schema() const { return schema_; }
  const std::vector<Feature>& inputs() const { return inputs_; }
  std::size_t size() const { return rows_.size(); }
  bool empty() const { return rows_.empty(); }
  const std::vector<double>& row(std::size_t i) const { return rows_[i]; }
  const std::vector<std::vector<double>>& rows() const { return rows_; }
  int label(std::size_t i) const { return labels_[i]; }
  const std::vector<int>& labels() const { return labels_; }
  int n_inputs() const { return int(inputs_.size()); }
  int n_classes() const { return int(schema_.target().levels.size()); }

  const Normalization& normalization() const { return norm_; }
  void set_normalization(Normalization n) { norm_ = std::move(n); }

  // One-hot geometry over the input features.
  struct Block {
    int offset = 0;
    int width = 1;
  };
  const std::vector<Block>& blocks() const { return blocks_; }
  int encoded_dim() const { return encoded_dim_; }
  int input_index(const std::string& name) const;  // -1 if absent

  // One-hot expansion; numerics passed through. Throws UnknownLevelError on
  // an out-of-range categorical cell.
  std::vector<double> encode(const std::vector<double>& raw) const;
  // Inverse of encode (categorical blocks collapse by argmax).
  std::vector<double> decode(const std::vector<double>& encoded) const;

  // Encoded space with numerics z-scored against the stored statistics.
  std::vector<double> normalize(const std::vector<double>& raw) const;
  std::vector<double> denormalize(const std::vector<double>& normalized) const;

  std::string level_name(int input, double raw_cell) const;

 private:
  Schema schema_;
  std::vector<Feature> inputs_;
  std::vector<std::vector<double>> rows_;
  std::vector<int> labels_;
  Normalization norm_;
  std::vector<Block> blocks_;
  int encoded_dim_ = 0;

  void init_geometry();
};

struct Instance {
  std::vector<double> raw;
  std::vector<double> encoded;
};

Instance encode_instance(const Dataset& ds, const std::vector<double>& raw);

// Population statistics over the dataset's own rows.
Normalization compute_normalization(const Dataset& ds);

// CSV ingestion. Rows with empty cells are dropped (count reported through
// dropped). Header must contain every schema column; a UTF-8 BOM on the
// header is stripped silently.
Dataset load_csv(const std::string& path, const Schema& schema,
                 int* dropped = nullptr);
void write_csv(const Dataset& ds, const std::string& path);
std::string csv_to_string(const Dataset& ds);

// Disjoint uniform split; the eval part inherits the train part's
// normalization statistics.
std::pair<Dataset, Dataset> split_train_eval(const Dataset& ds, double ratio,
                                             std::uint64_t seed);

// Appends categorical {0,1} features random1 (and random2) with
// role=unrelated, values i.i.d. uniform.
Dataset add_unrelated_features(const Dataset& ds, int count,
                               std::uint64_t seed);

struct SynthSpec {
  std::string preset = "compas-like";  // compas-like | cc-like
  int fraction_group = 4;              // cc-like: size of the sums-to-1 group
  int extra_numeric = 5;               // cc-like: additional numeric features
};

// Seeded synthetic dataset with a binary target, a designated sensitive
// feature correlated with the target, and dependent predictors.
Dataset synth_dataset(const SynthSpec& spec, int rows, std::uint64_t seed);

// One-hot geometry for a bare input feature list.
std::pair<std::vector<Dataset::Block>, int> input_blocks(
    const std::vector<Feature>& inputs);

// Shortest round-trip decimal text for a double (CSV/JSON artifacts).
std::string format_double(double v);

}  // namespace gxplain
