#pragma once

#include <fstream>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "bcqforge/error.hpp"
#include "bcqforge/nn/tape.hpp"

// Checkpoint file layout (format_version 1), UTF-8 JSON text:
//
//   {
//     "format_version": 1,
//     "kind": "<encoder|bcq_bundle|behavior_policy|...>",
//     "config_hash": "<16 hex digits>",
//     "metadata": { ... },
//     "parameters": {
//       "<parameter path>": { "shape": [d0, d1, ...], "values": [v0, v1, ...] },
//       ...
//     }
//   }
//
// "values" is the row-major flattening of the tensor. Each double is written as the shortest
// decimal string that parses back to the same IEEE-754 binary64 value, so a write/read cycle is
// bit-exact. Byte order is therefore not a concern: no binary payload is stored.

namespace bcqforge::nn {

using json = nlohmann::json;

inline constexpr int kCheckpointVersion = 1;

inline json parameters_to_json(const std::vector<const Parameter*>& params) {
  json out = json::object();
  for (const auto* p : params) {
    if (out.contains(p->name)) throw ConfigError("checkpoint: duplicate parameter path " + p->name);
    out[p->name] = {{"shape", p->value.shape()}, {"values", p->value.storage()}};
  }
  return out;
}

/// Loads values into existing parameters; names and shapes must match exactly.
inline void parameters_from_json(const json& j, const std::vector<Parameter*>& params) {
  for (auto* p : params) {
    if (!j.contains(p->name)) throw InputError("checkpoint: missing parameter " + p->name);
    const json& e = j.at(p->name);
    const auto shape = e.at("shape").get<Shape>();
    if (shape != p->value.shape()) {
      throw ConfigError("checkpoint: shape mismatch for " + p->name + ": file " + shape_string(shape) + " vs model " +
                        shape_string(p->value.shape()));
    }
    p->value = Tensor(shape, e.at("values").get<std::vector<double>>());
  }
  if (j.size() != params.size()) throw InputError("checkpoint: parameter count mismatch");
}

inline json make_checkpoint(const std::string& kind, const std::string& config_hash,
                            const std::vector<const Parameter*>& params, json metadata = json::object()) {
  return {{"format_version", kCheckpointVersion},
          {"kind", kind},
          {"config_hash", config_hash},
          {"metadata", std::move(metadata)},
          {"parameters", parameters_to_json(params)}};
}

inline void write_json_file(const std::string& path, const json& j) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw InputError("cannot write " + path);
  os << j.dump(1) << '\n';
}

inline json read_json_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw InputError("cannot open " + path);
  try {
    return json::parse(is);
  } catch (const json::parse_error& e) {
    throw InputError(path + ": " + e.what());
  }
}

inline json read_checkpoint(const std::string& path, const std::string& expected_kind) {
  json j = read_json_file(path);
  if (j.value("format_version", 0) != kCheckpointVersion) throw InputError(path + ": unsupported format_version");
  if (j.value("kind", std::string{}) != expected_kind) {
    throw InputError(path + ": expected checkpoint kind " + expected_kind + ", got " + j.value("kind", std::string{}));
  }
  return j;
}

}  // namespace bcqforge::nn
