#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace gxplain {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct UnknownLevelError : Error {
  UnknownLevelError(const std::string& feature, const std::string& value)
      : Error("unknown level '" + value + "' for feature '" + feature + "'"),
        feature(feature),
        value(value) {}
  std::string feature;
  std::string value;
};

struct MissingColumnError : Error {
  explicit MissingColumnError(const std::string& name)
      : Error("missing column '" + name + "'"), name(name) {}
  std::string name;
};

struct EmptyDatasetError : Error {
  EmptyDatasetError() : Error("no rows survived ingestion") {}
};

struct DegenerateFeatureError : Error {
  explicit DegenerateFeatureError(const std::string& name)
      : Error("numeric feature '" + name + "' has zero variance"), name(name) {}
  std::string name;
};

struct RoleMismatchError : Error {
  using Error::Error;
};

struct DegenerateClassError : Error {
  using Error::Error;
};

struct TooManyFeaturesError : Error {
  using Error::Error;
};

struct SingularRegressionError : Error {
  using Error::Error;
};

struct FormatError : Error {
  using Error::Error;
};

// Config validation collects every violation before failing.
struct ConfigInvalidError : Error {
  explicit ConfigInvalidError(std::vector<std::string> v)
      : Error(join(v)), violations(std::move(v)) {}
  std::vector<std::string> violations;

 private:
  static std::string join(const std::vector<std::string>& v) {
    std::string s = "invalid config:";
    for (const auto& e : v) s += "\n  - " + e;
    return s;
  }
};

struct MissingArtifactError : Error {
  MissingArtifactError(const std::string& path, const std::string& produced_by)
      : Error("missing artifact '" + path + "'; run '" + produced_by + "' first"),
        path(path),
        produced_by(produced_by) {}
  std::string path;
  std::string produced_by;
};

}  // namespace gxplain
