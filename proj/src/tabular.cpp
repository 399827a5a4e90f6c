#include "gxplain/tabular.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "gxplain/rng.hpp"

namespace gxplain {

std::string to_string(FeatureKind k) {
  return k == FeatureKind::numeric ? "numeric" : "categorical";
}

std::string to_string(FeatureRole r) {
  switch (r) {
    case FeatureRole::predictor: return "predictor";
    case FeatureRole::target: return "target";
    case FeatureRole::sensitive: return "sensitive";
    case FeatureRole::unrelated: return "unrelated";
  }
  return "predictor";
}

static FeatureKind kind_from_string(const std::string& s) {
  if (s == "numeric") return FeatureKind::numeric;
  if (s == "categorical") return FeatureKind::categorical;
  throw FormatError("unknown feature kind '" + s + "'");
}

static FeatureRole role_from_string(const std::string& s) {
  if (s == "predictor") return FeatureRole::predictor;
  if (s == "target") return FeatureRole::target;
  if (s == "sensitive") return FeatureRole::sensitive;
  if (s == "unrelated") return FeatureRole::unrelated;
  throw FormatError("unknown feature role '" + s + "'");
}

int Feature::level_index(const std::string& value) const {
  for (std::size_t i = 0; i < levels.size(); ++i) {
    if (levels[i] == value) return int(i);
  }
  throw UnknownLevelError(name, value);
}

int Schema::target_index() const {
  for (std::size_t i = 0; i < features.size(); ++i) {
    if (features[i].role == FeatureRole::target) return int(i);
  }
  throw FormatError("schema has no target feature");
}

int Schema::find(const std::string& name) const {
  for (std::size_t i = 0; i < features.size(); ++i) {
    if (features[i].name == name) return int(i);
  }
  return -1;
}

void Schema::validate() const {
  std::unordered_set<std::string> names;
  int targets = 0;
  for (const auto& f : features) {
    if (!names.insert(f.name).second) {
      throw FormatError("duplicate feature name '" + f.name + "'");
    }
    if (f.kind == FeatureKind::categorical && f.levels.size() < 2) {
      throw FormatError("categorical feature '" + f.name + "' needs >= 2 levels");
    }
    if (f.kind == FeatureKind::numeric && !f.levels.empty()) {
      throw FormatError("numeric feature '" + f.name + "' carries a level list");
    }
    if (f.role == FeatureRole::target) {
      ++targets;
      if (f.kind != FeatureKind::categorical || f.levels.size() != 2) {
        throw FormatError("target must be categorical with exactly 2 levels");
      }
    }
  }
  if (targets != 1) throw FormatError("schema must have exactly one target");
}

nlohmann::json features_to_json(const std::vector<Feature>& features) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& f : features) {
    nlohmann::json jf{{"name", f.name},
                      {"kind", to_string(f.kind)},
                      {"role", to_string(f.role)}};
    if (f.kind == FeatureKind::categorical) jf["levels"] = f.levels;
    arr.push_back(jf);
  }
  return arr;
}

std::vector<Feature> features_from_json(const nlohmann::json& j) {
  std::vector<Feature> out;
  for (const auto& jf : j) {
    Feature f;
    f.name = jf.at("name").get<std::string>();
    f.kind = kind_from_string(jf.at("kind").get<std::string>());
    f.role = jf.contains("role")
                 ? role_from_string(jf.at("role").get<std::string>())
                 : FeatureRole::predictor;
    if (jf.contains("levels")) f.levels = jf.at("levels").get<std::vector<std::string>>();
    out.push_back(std::move(f));
  }
  return out;
}

nlohmann::json schema_to_json(const Schema& s) { return features_to_json(s.features); }

Schema schema_from_json(const nlohmann::json& j) {
  Schema s;
  s.features = features_from_json(j.is_array() ? j : j.at("features"));
  s.validate();
  return s;
}

nlohmann::json normalization_to_json(const Normalization& n) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& st : n.per_input) {
    arr.push_back({{"mean", st.mean}, {"sd", st.sd}, {"degenerate", st.degenerate}});
  }
  return arr;
}

Normalization normalization_from_json(const nlohmann::json& j) {
  Normalization n;
  for (const auto& js : j) {
    FeatureStats st;
    st.mean = js.at("mean").get<double>();
    st.sd = js.at("sd").get<double>();
    st.degenerate = js.at("degenerate").get<bool>();
    n.per_input.push_back(st);
  }
  return n;
}

Schema load_schema(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open schema file '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("schema parse error in '" + path + "': " + e.what());
  }
  return schema_from_json(j);
}

Dataset::Dataset(Schema schema, std::vector<std::vector<double>> rows,
                 std::vector<int> labels)
    : schema_(std::move(schema)), rows_(std::move(rows)), labels_(std::move(labels)) {
  schema_.validate();
  if (rows_.size() != labels_.size()) {
    throw FormatError("row/label count mismatch");
  }
  const int tgt = schema_.target_index();
  for (std::size_t i = 0; i < schema_.features.size(); ++i) {
    if (int(i) != tgt) inputs_.push_back(schema_.features[i]);
  }
  for (const auto& r : rows_) {
    if (r.size() != inputs_.size()) throw FormatError("row width mismatch");
  }
  init_geometry();
  norm_ = compute_normalization(*this);
}

std::pair<std::vector<Dataset::Block>, int> input_blocks(
    const std::vector<Feature>& inputs) {
  std::vector<Dataset::Block> blocks;
  int off = 0;
  for (const auto& f : inputs) {
    const int w = f.kind == FeatureKind::categorical ? int(f.levels.size()) : 1;
    blocks.push_back({off, w});
    off += w;
  }
  return {blocks, off};
}

void Dataset::init_geometry() {
  auto [blocks, dim] = input_blocks(inputs_);
  blocks_ = std::move(blocks);
  encoded_dim_ = dim;
}

int Dataset::input_index(const std::string& name) const {
  for (std::size_t i = 0; i < inputs_.size(); ++i) {
    if (inputs_[i].name == name) return int(i);
  }
  return -1;
}

std::vector<double> Dataset::encode(const std::vector<double>& raw) const {
  if (raw.size() != inputs_.size()) throw FormatError("raw row width mismatch");
  std::vector<double> out(encoded_dim_, 0.0);
  for (std::size_t i = 0; i < inputs_.size(); ++i) {
    const auto& f = inputs_[i];
    const auto& b = blocks_[i];
    if (f.kind == FeatureKind::numeric) {
      out[b.offset] = raw[i];
    } else {
      const double cell = raw[i];
      const int idx = int(std::llround(cell));
      if (idx < 0 || idx >= int(f.levels.size()) || cell != double(idx)) {
        throw UnknownLevelError(f.name, format_double(cell));
      }
      out[b.offset + idx] = 1.0;
    }
  }
  return out;
}

std::vector<double> Dataset::decode(const std::vector<double>& encoded) const {
  std::vector<double> raw(inputs_.size(), 0.0);
  for (std::size_t i = 0; i < inputs_.size(); ++i) {
    const auto& b = blocks_[i];
    if (inputs_[i].kind == FeatureKind::numeric) {
      raw[i] = encoded[b.offset];
    } else {
      int best = 0;
      for (int j = 1; j < b.width; ++j) {
        if (encoded[b.offset + j] > encoded[b.offset + best]) best = j;
      }
      raw[i] = double(best);
    }
  }
  return raw;
}

std::vector<double> Dataset::normalize(const std::vector<double>& raw) const {
  std::vector<double> out = encode(raw);
  for (std::size_t i = 0; i < inputs_.size(); ++i) {
    if (inputs_[i].kind == FeatureKind::numeric) {
      const auto& st = norm_.per_input[i];
      out[blocks_[i].offset] = (out[blocks_[i].offset] - st.mean) / st.sd;
    }
  }
  return out;
}

std::vector<double> Dataset::denormalize(const std::vector<double>& normalized) const {
  std::vector<double> enc = normalized;
  for (std::size_t i = 0; i < inputs_.size(); ++i) {
    if (inputs_[i].kind == FeatureKind::numeric) {
      const auto& st = norm_.per_input[i];
      enc[blocks_[i].offset] = enc[blocks_[i].offset] * st.sd + st.mean;
    }
  }
  return decode(enc);
}

std::string Dataset::level_name(int input, double raw_cell) const {
  const auto& f = inputs_[input];
  const int idx = int(std::llround(raw_cell));
  if (idx < 0 || idx >= int(f.levels.size())) {
    throw UnknownLevelError(f.name, format_double(raw_cell));
  }
  return f.levels[idx];
}

Instance encode_instance(const Dataset& ds, const std::vector<double>& raw) {
  return Instance{raw, ds.encode(raw)};
}

Normalization compute_normalization(const Dataset& ds) {
  Normalization n;
  n.per_input.resize(ds.inputs().size());
  for (std::size_t i = 0; i < ds.inputs().size(); ++i) {
    if (ds.inputs()[i].kind != FeatureKind::numeric) continue;
    double mean = 0.0;
    for (const auto& r : ds.rows()) mean += r[i];
    if (!ds.rows().empty()) mean /= double(ds.size());
    double var = 0.0;
    for (const auto& r : ds.rows()) var += (r[i] - mean) * (r[i] - mean);
    if (!ds.rows().empty()) var /= double(ds.size());
    auto& st = n.per_input[i];
    st.mean = mean;
    if (var > 0.0) {
      st.sd = std::sqrt(var);
    } else {
      st.sd = 1.0;
      st.degenerate = true;
    }
  }
  return n;
}

std::string format_double(double v) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

}  // namespace

Dataset load_csv(const std::string& path, const Schema& schema, int* dropped) {
  schema.validate();
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open data file '" + path + "'");

  std::string header;
  if (!std::getline(in, header)) throw EmptyDatasetError();
  if (header.size() >= 3 && (unsigned char)header[0] == 0xEF &&
      (unsigned char)header[1] == 0xBB && (unsigned char)header[2] == 0xBF) {
    header.erase(0, 3);
  }
  const auto cols = split_csv_line(header);

  // Column position per schema feature; file order is free.
  std::vector<int> pos(schema.features.size(), -1);
  for (std::size_t i = 0; i < schema.features.size(); ++i) {
    for (std::size_t c = 0; c < cols.size(); ++c) {
      if (cols[c] == schema.features[i].name) {
        pos[i] = int(c);
        break;
      }
    }
    if (pos[i] < 0) throw MissingColumnError(schema.features[i].name);
  }

  const int tgt = schema.target_index();
  std::vector<std::vector<double>> rows;
  std::vector<int> labels;
  int drop_count = 0;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    const auto cells = split_csv_line(line);
    bool missing = false;
    for (std::size_t i = 0; i < schema.features.size(); ++i) {
      if (pos[i] >= int(cells.size()) || cells[pos[i]].empty()) {
        missing = true;
        break;
      }
    }
    if (missing) {
      ++drop_count;
      continue;
    }
    std::vector<double> raw;
    raw.reserve(schema.features.size() - 1);
    int label = -1;
    for (std::size_t i = 0; i < schema.features.size(); ++i) {
      const auto& f = schema.features[i];
      const std::string& cell = cells[pos[i]];
      if (f.kind == FeatureKind::categorical) {
        const int idx = f.level_index(cell);
        if (int(i) == tgt) {
          label = idx;
        } else {
          raw.push_back(double(idx));
        }
      } else {
        double v = 0.0;
        auto res = std::from_chars(cell.data(), cell.data() + cell.size(), v);
        if (res.ec != std::errc() || res.ptr != cell.data() + cell.size()) {
          throw FormatError("cannot parse numeric cell '" + cell + "' in column '" +
                            f.name + "'");
        }
        raw.push_back(v);
      }
    }
    rows.push_back(std::move(raw));
    labels.push_back(label);
  }
  if (dropped) *dropped = drop_count;
  if (rows.empty()) throw EmptyDatasetError();

  Dataset ds(schema, std::move(rows), std::move(labels));
  for (std::size_t i = 0; i < ds.inputs().size(); ++i) {
    if (ds.inputs()[i].kind == FeatureKind::numeric &&
        ds.normalization().per_input[i].degenerate) {
      throw DegenerateFeatureError(ds.inputs()[i].name);
    }
  }
  return ds;
}

std::string csv_to_string(const Dataset& ds) {
  std::ostringstream os;
  const auto& feats = ds.schema().features;
  for (std::size_t i = 0; i < feats.size(); ++i) {
    if (i) os << ',';
    os << feats[i].name;
  }
  os << '\n';
  const int tgt = ds.schema().target_index();
  for (std::size_t r = 0; r < ds.size(); ++r) {
    int in = 0;
    for (std::size_t i = 0; i < feats.size(); ++i) {
      if (i) os << ',';
      if (int(i) == tgt) {
        os << feats[i].levels[ds.label(r)];
      } else {
        const auto& f = ds.inputs()[in];
        if (f.kind == FeatureKind::categorical) {
          os << ds.level_name(in, ds.row(r)[in]);
        } else {
          os << format_double(ds.row(r)[in]);
        }
        ++in;
      }
    }
    os << '\n';
  }
  return os.str();
}

void write_csv(const Dataset& ds, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write '" + path + "'");
  out << csv_to_string(ds);
}

std::pair<Dataset, Dataset> split_train_eval(const Dataset& ds, double ratio,
                                             std::uint64_t seed) {
  if (!(ratio > 0.0 && ratio < 1.0)) throw FormatError("split ratio must be in (0,1)");
  if (ds.empty()) throw EmptyDatasetError();
  std::vector<int> idx(ds.size());
  std::iota(idx.begin(), idx.end(), 0);
  Rng rng(seed);
  rng.shuffle(idx);
  const std::size_t n_train = std::size_t(
      std::clamp<long long>(std::llround(ratio * double(ds.size())), 0,
                            (long long)ds.size()));
  std::vector<std::vector<double>> tr, ev;
  std::vector<int> trl, evl;
  for (std::size_t i = 0; i < idx.size(); ++i) {
    if (i < n_train) {
      tr.push_back(ds.row(idx[i]));
      trl.push_back(ds.label(idx[i]));
    } else {
      ev.push_back(ds.row(idx[i]));
      evl.push_back(ds.label(idx[i]));
    }
  }
  Dataset train(ds.schema(), std::move(tr), std::move(trl));
  Dataset eval(ds.schema(), std::move(ev), std::move(evl));
  eval.set_normalization(train.normalization());
  return {std::move(train), std::move(eval)};
}

Dataset add_unrelated_features(const Dataset& ds, int count, std::uint64_t seed) {
  if (count < 1 || count > 2) throw FormatError("unrelated count must be 1 or 2");
  Schema schema = ds.schema();
  std::vector<std::string> names;
  for (int c = 0; c < count; ++c) {
    const std::string name = "random" + std::to_string(c + 1);
    if (schema.find(name) >= 0) {
      throw FormatError("feature name collision: '" + name + "' already exists");
    }
    Feature f;
    f.name = name;
    f.kind = FeatureKind::categorical;
    f.role = FeatureRole::unrelated;
    f.levels = {"0", "1"};
    schema.features.push_back(std::move(f));
    names.push_back(name);
  }
  Rng rng(seed);
  std::vector<std::vector<double>> rows = ds.rows();
  for (auto& r : rows) {
    for (int c = 0; c < count; ++c) r.push_back(rng.bernoulli(0.5) ? 1.0 : 0.0);
  }
  Dataset out(schema, std::move(rows), ds.labels());
  // Numeric statistics are unchanged by categorical columns; keep the
  // originals so a pre-set normalization survives.
  Normalization n = out.normalization();
  for (std::size_t i = 0; i < ds.inputs().size(); ++i) {
    n.per_input[i] = ds.normalization().per_input[i];
  }
  out.set_normalization(n);
  return out;
}

namespace {

// compas-like: seven predictors (four categorical), binary target, sensitive
// race feature skewed by class, age_cat loosely tied to age, stay tied to
// priors. The dependencies give density generators something to learn.
Dataset synth_compas(int rows, Rng& rng) {
  Schema s;
  s.features = {
      {"age", FeatureKind::numeric, FeatureRole::predictor, {}},
      {"priors_count", FeatureKind::numeric, FeatureRole::predictor, {}},
      {"length_of_stay", FeatureKind::numeric, FeatureRole::predictor, {}},
      {"race", FeatureKind::categorical, FeatureRole::sensitive,
       {"African-American", "Caucasian", "Hispanic", "Other"}},
      {"sex", FeatureKind::categorical, FeatureRole::predictor, {"Male", "Female"}},
      {"c_charge_degree", FeatureKind::categorical, FeatureRole::predictor, {"F", "M"}},
      {"age_cat", FeatureKind::categorical, FeatureRole::predictor,
       {"Less than 25", "25 - 45", "Greater than 45"}},
      {"risk", FeatureKind::categorical, FeatureRole::target, {"low", "high"}},
  };
  std::vector<std::vector<double>> X;
  std::vector<int> y;
  for (int i = 0; i < rows; ++i) {
    const int label = rng.bernoulli(0.6) ? 1 : 0;  // high risk majority
    const double age = label ? rng.normal(30.0, 8.0) : rng.normal(39.0, 10.0);
    double priors = label ? rng.normal(4.5, 2.5) : rng.normal(1.5, 1.2);
    priors = std::max(0.0, priors);
    const double stay = std::max(0.0, 2.0 * priors + rng.normal(10.0, 5.0));
    double race;
    {
      const double u = rng.uniform();
      if (label) {
        race = u < 0.62 ? 0 : u < 0.84 ? 1 : u < 0.94 ? 2 : 3;
      } else {
        race = u < 0.35 ? 0 : u < 0.80 ? 1 : u < 0.92 ? 2 : 3;
      }
    }
    const double sex = rng.bernoulli(label ? 0.85 : 0.75) ? 0.0 : 1.0;
    const double charge = rng.bernoulli(label ? 0.75 : 0.45) ? 0.0 : 1.0;
    const double blurred_age = age + rng.normal(0.0, 3.0);
    const double age_cat = blurred_age < 25.0 ? 0.0 : blurred_age <= 45.0 ? 1.0 : 2.0;
    X.push_back({age, priors, stay, race, sex, charge, age_cat});
    y.push_back(label);
  }
  return Dataset(s, std::move(X), std::move(y));
}

// cc-like: all-numeric socio-demographic stand-in. A group of fraction
// features sums to one per row (Dirichlet-style); the first group member is
// the sensitive share and is tied to the target.
Dataset synth_cc(int rows, int group, int extra, Rng& rng) {
  Schema s;
  for (int g = 0; g < group; ++g) {
    Feature f;
    f.name = g == 0 ? "racePctWhite" : "racePctGroup" + std::to_string(g + 1);
    f.kind = FeatureKind::numeric;
    f.role = g == 0 ? FeatureRole::sensitive : FeatureRole::predictor;
    s.features.push_back(std::move(f));
  }
  for (int e = 0; e < extra; ++e) {
    s.features.push_back({"attr" + std::to_string(e + 1), FeatureKind::numeric,
                          FeatureRole::predictor, {}});
  }
  s.features.push_back({"crime", FeatureKind::categorical, FeatureRole::target,
                        {"low", "high"}});

  std::vector<std::vector<double>> X;
  std::vector<int> y;
  for (int i = 0; i < rows; ++i) {
    const int label = rng.bernoulli(0.5) ? 1 : 0;  // 1 = high crime
    // Gamma draws via sum of exponentials; high-crime rows get a smaller
    // white-share concentration.
    std::vector<double> conc(group, 1.0);
    conc[0] = label ? 2.0 : 6.0;
    std::vector<double> g(group);
    double total = 0.0;
    for (int k = 0; k < group; ++k) {
      double acc = 0.0;
      const int shape = std::max(1, int(std::lround(conc[k])));
      for (int t = 0; t < shape; ++t) {
        double u = rng.uniform();
        while (u <= 0.0) u = rng.uniform();
        acc += -std::log(u);
      }
      g[k] = acc;
      total += acc;
    }
    std::vector<double> row;
    for (int k = 0; k < group; ++k) row.push_back(g[k] / total);
    for (int e = 0; e < extra; ++e) {
      const double base = label ? 0.8 : -0.8;
      row.push_back(base * (1.0 + 0.3 * e) + 0.5 * row[0] + rng.normal(0.0, 1.0));
    }
    X.push_back(std::move(row));
    y.push_back(label);
  }
  return Dataset(s, std::move(X), std::move(y));
}

}  // namespace

Dataset synth_dataset(const SynthSpec& spec, int rows, std::uint64_t seed) {
  if (rows < 1) throw FormatError("synth rows must be >= 1");
  Rng rng(seed);
  if (spec.preset == "compas-like") return synth_compas(rows, rng);
  if (spec.preset == "cc-like") {
    return synth_cc(rows, std::max(2, spec.fraction_group), std::max(0, spec.extra_numeric), rng);
  }
  throw FormatError("unknown synth preset '" + spec.preset + "'");
}

}  // namespace gxplain
