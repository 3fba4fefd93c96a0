#pragma once

// Minimal validator for the draft-07 keywords used by the schema documents:
// type, enum, required, properties, additionalProperties, items, minItems,
// minimum, maximum and local $ref.

#include <fstream>
#include <string>
#include <vector>

#include "json.hpp"

namespace schema {

using nlohmann::json;

inline json load(const std::string& name) {
  std::ifstream in(std::string(KEYFLUX_SCHEMA_DIR) + "/" + name);
  return json::parse(in);
}

inline bool has_type(const json& v, const std::string& t) {
  if (t == "object") return v.is_object();
  if (t == "array") return v.is_array();
  if (t == "string") return v.is_string();
  if (t == "integer") return v.is_number_integer();
  if (t == "number") return v.is_number();
  if (t == "boolean") return v.is_boolean();
  if (t == "null") return v.is_null();
  return false;
}

inline void check(const json& root, const json& s, const json& v, const std::string& path,
                  std::vector<std::string>& errors) {
  if (s.contains("$ref")) {
    const std::string ref = s.at("$ref");
    const std::string prefix = "#/definitions/";
    check(root, root.at("definitions").at(ref.substr(prefix.size())), v, path, errors);
    return;
  }
  if (s.contains("type")) {
    bool ok = false;
    if (s.at("type").is_array()) {
      for (const auto& t : s.at("type")) ok = ok || has_type(v, t);
    } else {
      ok = has_type(v, s.at("type"));
    }
    if (!ok) {
      errors.push_back(path + ": wrong type");
      return;
    }
  }
  if (s.contains("enum") && std::find(s.at("enum").begin(), s.at("enum").end(), v) == s.at("enum").end())
    errors.push_back(path + ": not in enum");
  if (v.is_number()) {
    if (s.contains("minimum") && v.get<double>() < s.at("minimum").get<double>()) errors.push_back(path + ": below minimum");
    if (s.contains("maximum") && v.get<double>() > s.at("maximum").get<double>()) errors.push_back(path + ": above maximum");
  }
  if (v.is_object()) {
    if (s.contains("required"))
      for (const auto& key : s.at("required"))
        if (!v.contains(key.get<std::string>())) errors.push_back(path + ": missing " + key.get<std::string>());
    const json props = s.value("properties", json::object());
    for (const auto& [key, value] : v.items()) {
      if (props.contains(key))
        check(root, props.at(key), value, path + "." + key, errors);
      else if (s.contains("additionalProperties") && s.at("additionalProperties") == false)
        errors.push_back(path + ": unexpected " + key);
    }
  }
  if (v.is_array()) {
    if (s.contains("minItems") && v.size() < s.at("minItems").get<std::size_t>()) errors.push_back(path + ": too few items");
    if (s.contains("items"))
      for (std::size_t i = 0; i < v.size(); ++i) check(root, s.at("items"), v[i], path + "[" + std::to_string(i) + "]", errors);
  }
}

/// Violations of `doc` against the named schema file; empty when valid.
inline std::vector<std::string> violations(const std::string& name, const json& doc) {
  const json s = load(name);
  std::vector<std::string> errors;
  check(s, s, doc, "$", errors);
  return errors;
}

}  // namespace schema
