#pragma once

// Versioned JSON form of a Memory:
//   {"version":1,"budget":K,"entries":[{"id","title","task_pattern":{feature:[values]},
//     "target_agent","effect":{"kind","magnitude"},"priority","confidence",
//     "provenance":{"stage","evidence_count","success_rate"}}]}

#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "monoscale/errors.hpp"
#include "monoscale/router.hpp"

namespace monoscale {

inline constexpr int kMemorySchemaVersion = 1;

inline nlohmann::ordered_json to_json(const MemoryEntry& e) {
  nlohmann::ordered_json pattern = nlohmann::ordered_json::object();
  for (const auto& [feature, values] : e.condition.allowed) {
    auto arr = nlohmann::ordered_json::array();
    for (const auto& v : values) arr.push_back(v);
    pattern[feature] = std::move(arr);
  }
  return {
      {"id", e.id},
      {"title", e.title},
      {"task_pattern", std::move(pattern)},
      {"target_agent", e.target_agent},
      {"effect", {{"kind", std::string(to_string(e.effect.kind))}, {"magnitude", e.effect.magnitude}}},
      {"priority", e.priority},
      {"confidence", e.confidence},
      {"provenance",
       {{"stage", e.provenance.stage},
        {"evidence_count", e.provenance.evidence_count},
        {"success_rate", e.provenance.success_rate}}},
  };
}

inline nlohmann::ordered_json to_json(const Memory& m) {
  auto entries = nlohmann::ordered_json::array();
  for (const auto& e : m.entries()) entries.push_back(to_json(e));
  return {{"version", kMemorySchemaVersion}, {"budget", m.budget()}, {"entries", std::move(entries)}};
}

inline MemoryEntry memory_entry_from_json(const nlohmann::json& j) {
  try {
    MemoryEntry e;
    e.id = j.at("id").get<std::string>();
    e.title = j.at("title").get<std::string>();
    for (const auto& [feature, values] : j.at("task_pattern").items())
      for (const auto& v : values) e.condition.allowed[feature].insert(v.get<std::string>());
    e.target_agent = j.at("target_agent").get<std::string>();
    e.effect.kind = effect_kind_from_string(j.at("effect").at("kind").get<std::string>());
    e.effect.magnitude = j.at("effect").at("magnitude").get<double>();
    e.priority = j.at("priority").get<int>();
    e.confidence = j.at("confidence").get<double>();
    const auto& p = j.at("provenance");
    e.provenance = {p.at("stage").get<int>(), p.at("evidence_count").get<int>(), p.at("success_rate").get<double>()};
    return e;
  } catch (const nlohmann::json::exception& ex) {
    throw ConfigError(std::string("malformed memory entry: ") + ex.what());
  }
}

inline Memory memory_from_json(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("version")) throw ConfigError("memory document has no version field");
  try {
    const int version = j.at("version").get<int>();
    if (version != kMemorySchemaVersion) throw SchemaVersionError(kMemorySchemaVersion, version);
    std::vector<MemoryEntry> entries;
    for (const auto& e : j.at("entries")) entries.push_back(memory_entry_from_json(e));
    return Memory(std::move(entries), j.at("budget").get<std::size_t>());
  } catch (const nlohmann::json::exception& ex) {
    throw ConfigError(std::string("malformed memory document: ") + ex.what());
  } catch (const MemoryError& ex) {
    throw ConfigError(std::string("invalid memory document: ") + ex.what());
  }
}

inline std::string dump_memory(const Memory& m) { return to_json(m).dump(2) + "\n"; }

inline Memory parse_memory(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& ex) {
    throw ConfigError(std::string("memory document is not valid JSON: ") + ex.what());
  }
  return memory_from_json(j);
}

inline Memory load_memory(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open memory file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_memory(ss.str());
}

}  // namespace monoscale
