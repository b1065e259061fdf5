#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "bcqforge/error.hpp"
#include "bcqforge/nn/tensor.hpp"

namespace bcqforge::data {

using json = nlohmann::json;

inline constexpr int kFormatVersion = 1;
inline constexpr double kMinStayHours = 24.0;
inline constexpr double kMaxStayHours = 168.0;

struct FeatureRange {
  std::string name;
  double min = 0.0;
  double max = 0.0;

  friend bool operator==(const FeatureRange&, const FeatureRange&) = default;
};

/// Feature universe for one dataset: names, valid measurement ranges and the acuity channel.
struct FeatureSchema {
  std::vector<std::string> static_features;
  std::vector<FeatureRange> temporal_features;
  std::string acuity_channel;
  double bin_hours = 4.0;

  std::size_t num_temporal() const { return temporal_features.size(); }
  std::size_t num_static() const { return static_features.size(); }

  std::optional<std::size_t> temporal_index(const std::string& name) const {
    for (std::size_t i = 0; i < temporal_features.size(); ++i)
      if (temporal_features[i].name == name) return i;
    return std::nullopt;
  }

  std::size_t acuity_index() const {
    auto i = temporal_index(acuity_channel);
    if (!i) throw ConfigError("schema: acuity channel '" + acuity_channel + "' is not a temporal feature");
    return *i;
  }

  std::size_t min_bins() const { return static_cast<std::size_t>(std::floor(kMinStayHours / bin_hours)); }
  std::size_t max_bins() const { return static_cast<std::size_t>(std::ceil(kMaxStayHours / bin_hours)); }

  void validate() const {
    if (!(bin_hours > 0.0)) throw ConfigError("schema: bin_hours must be > 0");
    if (temporal_features.empty()) throw ConfigError("schema: no temporal features");
    std::set<std::string> names;
    for (const auto& s : static_features)
      if (!names.insert(s).second) throw ConfigError("schema: duplicate feature name " + s);
    for (const auto& f : temporal_features) {
      if (!names.insert(f.name).second) throw ConfigError("schema: duplicate feature name " + f.name);
      if (!(f.min < f.max)) throw ConfigError("schema: invalid range for " + f.name + " (min must be < max)");
    }
    acuity_index();
  }

  json to_json() const {
    json tf = json::array();
    for (const auto& f : temporal_features) tf.push_back({{"name", f.name}, {"min", f.min}, {"max", f.max}});
    return {{"format_version", kFormatVersion},
            {"static_features", static_features},
            {"temporal_features", tf},
            {"acuity_channel", acuity_channel},
            {"bin_hours", bin_hours}};
  }

  static FeatureSchema from_json(const json& j) {
    if (j.value("format_version", 0) != kFormatVersion) throw IngestionError("schema: unsupported or missing format_version");
    FeatureSchema s;
    try {
      s.static_features = j.at("static_features").get<std::vector<std::string>>();
      for (const auto& f : j.at("temporal_features"))
        s.temporal_features.push_back({f.at("name").get<std::string>(), f.at("min").get<double>(), f.at("max").get<double>()});
      s.acuity_channel = j.at("acuity_channel").get<std::string>();
      s.bin_hours = j.value("bin_hours", 4.0);
    } catch (const json::exception& e) {
      throw IngestionError(std::string("schema: ") + e.what());
    }
    s.validate();
    return s;
  }

  friend bool operator==(const FeatureSchema&, const FeatureSchema&) = default;
};

struct Measurement {
  double time_h = 0.0;
  std::size_t feature = 0;
  double value = 0.0;

  friend bool operator==(const Measurement&, const Measurement&) = default;
};

/// One patient as read from disk, before binning.
struct RawPatient {
  std::string id;
  std::vector<double> statics;
  std::vector<Measurement> measurements;  // sorted by time
  std::vector<int> action_bins;
  bool survived28 = false;

  friend bool operator==(const RawPatient&, const RawPatient&) = default;
};

struct RawCohort {
  FeatureSchema schema;
  std::vector<RawPatient> patients;
};

enum class Split { train, validation, test };

inline const char* split_name(Split s) {
  switch (s) {
    case Split::train:
      return "train";
    case Split::validation:
      return "validation";
    case Split::test:
      break;
  }
  return "test";
}

/// One binned patient. `features` is [T, F]; `actions[t]` applies to the interval [t, t+1), so
/// there are T − 1 of them; `acuity` keeps the acuity channel on its original scale.
struct Trajectory {
  std::string patient_id;
  std::vector<double> statics;
  nn::Tensor features;
  std::vector<int> actions;
  std::vector<double> acuity;
  bool survived28 = false;

  std::size_t length() const { return features.rows(); }
  std::size_t num_transitions() const { return length() > 0 ? length() - 1 : 0; }
  bool ever_treated() const {
    for (int a : actions)
      if (a != 0) return true;
    return false;
  }
};

struct ZScoreStats {
  std::vector<double> temporal_mean;
  std::vector<double> temporal_std;
  std::vector<double> static_mean;
  std::vector<double> static_std;
};

struct Cohort {
  FeatureSchema schema;
  std::vector<Trajectory> trajectories;
  std::vector<Split> splits;  // empty until split() runs
  std::optional<ZScoreStats> stats;
  std::vector<std::string> warnings;

  std::size_t size() const { return trajectories.size(); }
  bool is_split() const { return splits.size() == trajectories.size() && !trajectories.empty(); }

  std::vector<std::size_t> indices(Split s) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < splits.size(); ++i)
      if (splits[i] == s) out.push_back(i);
    return out;
  }
};

}  // namespace bcqforge::data
