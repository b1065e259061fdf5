#pragma once

#include <cctype>
#include <algorithm>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

#include "bcqforge/data/cohort.hpp"
#include "bcqforge/error.hpp"

// Trajectory file, JSON lines (format_version 1):
//
//   {"format_version": 1}                                     first non-blank line
//   {"patient_id": "p1", "static": {"age": 63.0, ...},        one header row per patient
//    "action_bins": [0, 1, 0, ...], "survived28": true}
//   {"patient_id": "p1", "time_h": 2.5, "feature": "hb", "value": 8.1}   measurement rows
//
// Rows may appear in any order; measurements are grouped by patient and sorted by time.
// time_h is hours since admission. action_bins[t] is the logged action for bin t.

namespace bcqforge::data {

namespace detail {

inline const json& require_field(const json& row, const char* key, const char* column, std::size_t line) {
  auto it = row.find(key);
  if (it == row.end()) throw IngestionError("line " + std::to_string(line) + ": missing column: " + column);
  return *it;
}

template <class T>
T field_as(const json& v, const char* column, std::size_t line) {
  try {
    return v.get<T>();
  } catch (const json::exception&) {
    throw IngestionError("line " + std::to_string(line) + ": bad value for column " + column);
  }
}

}  // namespace detail

inline RawCohort read_cohort_jsonl(std::istream& in, const FeatureSchema& schema) {
  schema.validate();
  RawCohort cohort{schema, {}};
  std::map<std::string, std::size_t> index;
  std::map<std::string, bool> has_header;
  auto patient = [&](const std::string& id) -> RawPatient& {
    auto [it, inserted] = index.try_emplace(id, cohort.patients.size());
    if (inserted) {
      cohort.patients.push_back(RawPatient{});
      cohort.patients.back().id = id;
    }
    return cohort.patients[it->second];
  };

  std::string text;
  std::size_t line = 0;
  bool saw_version = false;
  while (std::getline(in, text)) {
    ++line;
    if (std::all_of(text.begin(), text.end(), [](unsigned char c) { return std::isspace(c); })) continue;
    json row;
    try {
      row = json::parse(text);
    } catch (const json::parse_error& e) {
      throw IngestionError("line " + std::to_string(line) + ": unparseable row: " + e.what());
    }
    if (!row.is_object()) throw IngestionError("line " + std::to_string(line) + ": row is not a JSON object");
    if (!saw_version) {
      if (!row.contains("format_version")) throw IngestionError("line " + std::to_string(line) + ": missing format_version");
      if (row["format_version"] != kFormatVersion) throw IngestionError("unsupported format_version");
      saw_version = true;
      if (!row.contains("patient_id")) continue;
    }
    const auto id = detail::field_as<std::string>(detail::require_field(row, "patient_id", "patient_id", line), "patient_id", line);
    const bool is_header = row.contains("static") || row.contains("action_bins") || row.contains("survived28");
    RawPatient& p = patient(id);
    if (is_header) {
      if (has_header[id]) throw IngestionError("line " + std::to_string(line) + ": duplicate header for patient " + id);
      has_header[id] = true;
      const json& st = detail::require_field(row, "static", "static", line);
      p.statics.clear();
      for (const auto& name : schema.static_features) {
        auto it = st.find(name);
        if (it == st.end()) throw IngestionError("line " + std::to_string(line) + ": missing column: " + name);
        p.statics.push_back(detail::field_as<double>(*it, name.c_str(), line));
      }
      p.action_bins = detail::field_as<std::vector<int>>(detail::require_field(row, "action_bins", "action", line), "action", line);
      for (int a : p.action_bins)
        if (a != 0 && a != 1) throw IngestionError("line " + std::to_string(line) + ": actions must be 0 or 1");
      p.survived28 = detail::field_as<bool>(detail::require_field(row, "survived28", "survived28", line), "survived28", line);
    } else {
      const double t = detail::field_as<double>(detail::require_field(row, "time_h", "time", line), "time", line);
      const auto name = detail::field_as<std::string>(detail::require_field(row, "feature", "feature", line), "feature", line);
      const double v = detail::field_as<double>(detail::require_field(row, "value", "value", line), "value", line);
      auto f = schema.temporal_index(name);
      if (!f) throw IngestionError("line " + std::to_string(line) + ": unknown feature " + name);
      if (!(t >= 0.0) || !std::isfinite(t)) throw IngestionError("line " + std::to_string(line) + ": time_h must be finite and >= 0");
      p.measurements.push_back({t, *f, v});
    }
  }
  if (!saw_version) throw IngestionError("empty trajectory file");
  for (auto& p : cohort.patients) {
    if (!has_header[p.id]) throw IngestionError("patient " + p.id + " has no header row");
    std::stable_sort(p.measurements.begin(), p.measurements.end(),
                     [](const Measurement& a, const Measurement& b) { return a.time_h < b.time_h; });
  }
  return cohort;
}

inline RawCohort read_cohort_jsonl(const std::string& path, const FeatureSchema& schema) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IngestionError("cannot open " + path);
  return read_cohort_jsonl(in, schema);
}

inline void write_cohort_jsonl(std::ostream& out, const RawCohort& cohort) {
  out << json{{"format_version", kFormatVersion}}.dump() << '\n';
  for (const auto& p : cohort.patients) {
    json st = json::object();
    for (std::size_t i = 0; i < cohort.schema.static_features.size(); ++i) st[cohort.schema.static_features[i]] = p.statics.at(i);
    out << json{{"patient_id", p.id}, {"static", st}, {"action_bins", p.action_bins}, {"survived28", p.survived28}}.dump()
        << '\n';
    for (const auto& m : p.measurements) {
      out << json{{"patient_id", p.id},
                  {"time_h", m.time_h},
                  {"feature", cohort.schema.temporal_features.at(m.feature).name},
                  {"value", m.value}}
                 .dump()
          << '\n';
    }
  }
}

inline void write_cohort_jsonl(const std::string& path, const RawCohort& cohort) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IngestionError("cannot write " + path);
  write_cohort_jsonl(out, cohort);
}

inline FeatureSchema read_schema(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IngestionError("cannot open " + path);
  try {
    return FeatureSchema::from_json(json::parse(in));
  } catch (const json::parse_error& e) {
    throw IngestionError(path + ": " + e.what());
  }
}

inline void write_schema(const std::string& path, const FeatureSchema& schema) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IngestionError("cannot write " + path);
  out << schema.to_json().dump(1) << '\n';
}

}  // namespace bcqforge::data
