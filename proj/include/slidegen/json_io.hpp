#pragma once

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "slidegen/errors.hpp"

namespace slidegen {

using nlohmann::json;

inline std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open file: " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// Writes bytes as-is; callers are expected to use "\n" line endings so
/// outputs are byte-identical across platforms.
inline void write_text_file(const std::filesystem::path& path, const std::string& content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write file: " + path.string());
  out << content;
  if (!out) throw Error("failed writing file: " + path.string());
}

inline json parse_json_file(const std::filesystem::path& path) {
  const std::string text = read_text_file(path);
  json parsed = json::parse(text, nullptr, false);
  if (parsed.is_discarded()) throw ParseError("malformed JSON in " + path.string());
  return parsed;
}

inline void write_json_file(const std::filesystem::path& path, const json& value) {
  write_text_file(path, value.dump(2) + "\n");
}

namespace jio {

inline const json& require(const json& obj, const std::string& key, const std::string& where) {
  if (!obj.is_object() || !obj.contains(key))
    throw ParseError(where + ": missing required key '" + key + "'");
  return obj.at(key);
}

inline std::string require_string(const json& obj, const std::string& key,
                                  const std::string& where) {
  const json& v = require(obj, key, where);
  if (!v.is_string()) throw ParseError(where + ": key '" + key + "' must be a string");
  return v.get<std::string>();
}

inline double require_number(const json& obj, const std::string& key, const std::string& where) {
  const json& v = require(obj, key, where);
  if (!v.is_number()) throw ParseError(where + ": key '" + key + "' must be a number");
  return v.get<double>();
}

inline int require_int(const json& obj, const std::string& key, const std::string& where) {
  const json& v = require(obj, key, where);
  if (!v.is_number_integer()) throw ParseError(where + ": key '" + key + "' must be an integer");
  return v.get<int>();
}

/// Records unknown keys so loaders never drop fields silently.
inline void warn_unknown_keys(const json& obj, const std::vector<std::string>& known,
                              const std::string& where, std::vector<std::string>* warnings) {
  if (!warnings || !obj.is_object()) return;
  for (const auto& [key, _] : obj.items()) {
    bool found = false;
    for (const auto& k : known)
      if (k == key) { found = true; break; }
    if (!found) warnings->push_back(where + ": unknown key '" + key + "' ignored");
  }
}

}  // namespace jio
}  // namespace slidegen
