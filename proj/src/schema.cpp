#include "samner/schema.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "samner/errors.hpp"

namespace samner::schema {
namespace {

using nlohmann::ordered_json;

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

std::string trim(const std::string& s) {
  std::size_t begin = 0;
  std::size_t end = s.size();
  while (begin < end && std::isspace(static_cast<unsigned char>(s[begin]))) ++begin;
  while (end > begin && std::isspace(static_cast<unsigned char>(s[end - 1]))) --end;
  return s.substr(begin, end - begin);
}

ordered_json parse_document(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  ordered_json doc;
  try {
    doc = ordered_json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError(path + ": parse failure: " + e.what());
  }
  if (!doc.is_object()) throw ValidationError(path + ": top-level value must be an object");
  return doc;
}

void reject_unknown_keys(const ordered_json& doc, const std::vector<std::string>& allowed,
                         const std::string& path) {
  for (auto it = doc.begin(); it != doc.end(); ++it) {
    if (std::find(allowed.begin(), allowed.end(), it.key()) == allowed.end()) {
      throw ValidationError(path + ": unknown top-level key \"" + it.key() + "\"");
    }
  }
}

}  // namespace

bool Taxonomy::has_archetype(const std::string& name) const {
  return find_archetype(name) != nullptr;
}

std::optional<std::string> Taxonomy::canonical_archetype(const std::string& name) const {
  const std::string needle = lower(name);
  for (const auto& a : archetypes) {
    if (lower(a.name) == needle) return a.name;
  }
  return std::nullopt;
}

const Archetype* Taxonomy::find_archetype(const std::string& name) const {
  for (const auto& a : archetypes) {
    if (a.name == name) return &a;
  }
  return nullptr;
}

std::vector<std::string> Taxonomy::archetype_names() const {
  std::vector<std::string> names;
  names.reserve(archetypes.size());
  for (const auto& a : archetypes) names.push_back(a.name);
  return names;
}

std::vector<std::string> TargetSchema::type_names() const {
  std::vector<std::string> names;
  names.reserve(types.size());
  for (const auto& t : types) names.push_back(t.name);
  return names;
}

std::optional<std::string> TargetSchema::canonical_type(const std::string& name) const {
  const std::string needle = lower(name);
  for (const auto& t : types) {
    if (lower(t.name) == needle) return t.name;
  }
  return std::nullopt;
}

const TargetType* TargetSchema::find_type(const std::string& name) const {
  for (const auto& t : types) {
    if (t.name == name) return &t;
  }
  return nullptr;
}

Taxonomy parse_taxonomy(const std::string& path) {
  const ordered_json doc = parse_document(path);
  reject_unknown_keys(doc, {"archetypes", "projection"}, path);
  if (!doc.contains("archetypes") || !doc["archetypes"].is_array()) {
    throw ValidationError(path + ": missing \"archetypes\" list");
  }
  if (!doc.contains("projection") || !doc["projection"].is_object()) {
    throw ValidationError(path + ": missing \"projection\" map");
  }

  Taxonomy taxonomy;
  for (const auto& entry : doc["archetypes"]) {
    if (!entry.is_object() || !entry.contains("name") || !entry.contains("definition") ||
        !entry["name"].is_string() || !entry["definition"].is_string()) {
      throw ValidationError(path + ": archetype entries need string \"name\" and \"definition\"");
    }
    taxonomy.archetypes.push_back({entry["name"].get<std::string>(),
                                   entry["definition"].get<std::string>()});
  }
  for (auto it = doc["projection"].begin(); it != doc["projection"].end(); ++it) {
    if (!it.value().is_string()) {
      throw ValidationError(path + ": projection value for \"" + it.key() + "\" must be a string");
    }
    taxonomy.projection[it.key()] = it.value().get<std::string>();
  }
  return taxonomy;
}

void validate_taxonomy(const Taxonomy& taxonomy) {
  if (taxonomy.archetypes.empty()) throw ValidationError("taxonomy has no archetypes");

  std::set<std::string> seen;
  for (const auto& a : taxonomy.archetypes) {
    if (a.name.empty()) throw ValidationError("archetype with empty name");
    if (a.definition.empty()) throw ValidationError("archetype \"" + a.name + "\" has empty definition");
    if (!seen.insert(lower(a.name)).second) {
      throw ValidationError("duplicate archetype \"" + a.name + "\"");
    }
  }
  for (const auto& [fine, target] : taxonomy.projection) {
    if (!taxonomy.has_archetype(target)) {
      throw ValidationError("projection key \"" + fine + "\" maps to \"" + target +
                            "\", which is not an archetype");
    }
  }
}

Taxonomy load_taxonomy(const std::string& path) {
  Taxonomy taxonomy = parse_taxonomy(path);
  validate_taxonomy(taxonomy);
  return taxonomy;
}

TargetSchema parse_target_schema(const std::string& path) {
  const ordered_json doc = parse_document(path);
  reject_unknown_keys(doc, {"domain_name", "types"}, path);
  if (!doc.contains("domain_name") || !doc["domain_name"].is_string()) {
    throw ValidationError(path + ": missing string \"domain_name\"");
  }
  if (!doc.contains("types") || !doc["types"].is_array()) {
    throw ValidationError(path + ": missing \"types\" list");
  }

  TargetSchema target;
  target.domain_name = doc["domain_name"].get<std::string>();
  for (const auto& entry : doc["types"]) {
    if (!entry.is_object() || !entry.contains("name") || !entry.contains("definition") ||
        !entry["name"].is_string() || !entry["definition"].is_string()) {
      throw ValidationError(path + ": type entries need string \"name\" and \"definition\"");
    }
    target.types.push_back({entry["name"].get<std::string>(),
                            entry["definition"].get<std::string>()});
  }
  return target;
}

void validate_target_schema(const TargetSchema& target) {
  if (target.types.empty()) throw ValidationError("target schema has no types");
  std::set<std::string> seen;
  for (const auto& t : target.types) {
    if (t.name.empty()) throw ValidationError("target type with empty name");
    if (t.definition.empty()) {
      throw ValidationError("target type \"" + t.name + "\" has empty definition");
    }
    if (!seen.insert(t.name).second) throw ValidationError("duplicate target type \"" + t.name + "\"");
  }
}

TargetSchema load_target_schema(const std::string& path) {
  TargetSchema target = parse_target_schema(path);
  validate_target_schema(target);
  return target;
}

std::optional<std::string> project(const Taxonomy& taxonomy, const std::string& fine_type) {
  const auto it = taxonomy.projection.find(trim(fine_type));
  if (it == taxonomy.projection.end()) return std::nullopt;
  return it->second;
}

std::set<std::string> project_schema(const Taxonomy& taxonomy, const std::set<std::string>& fine_types) {
  std::set<std::string> out;
  std::vector<std::string> unmapped;
  for (const auto& fine : fine_types) {
    if (auto archetype = project(taxonomy, fine)) {
      out.insert(*archetype);
    } else {
      unmapped.push_back(fine);
    }
  }
  if (!unmapped.empty()) {
    std::ostringstream msg;
    msg << "unmapped fine-grained types:";
    for (const auto& name : unmapped) msg << " \"" << name << "\"";
    throw ValidationError(msg.str());
  }
  return out;
}

bool DesiderataReport::mechanical_pass() const {
  for (const auto& c : checks) {
    if (c.status == CheckStatus::Fail) return false;
  }
  return true;
}

DesiderataReport validate_desiderata(const Taxonomy& taxonomy) {
  DesiderataReport report;

  {
    std::set<std::string> seen;
    std::vector<std::string> dupes;
    for (const auto& a : taxonomy.archetypes) {
      if (!seen.insert(lower(a.name)).second) dupes.push_back(a.name);
    }
    if (taxonomy.archetypes.empty()) {
      report.checks.push_back({"unambiguity", CheckStatus::Fail, "archetype list is empty"});
    } else if (dupes.empty()) {
      report.checks.push_back({"unambiguity", CheckStatus::Pass, "archetype names unique"});
    } else {
      std::string detail = "duplicate names:";
      for (const auto& d : dupes) detail += " \"" + d + "\"";
      report.checks.push_back({"unambiguity", CheckStatus::Fail, detail});
    }
  }

  {
    std::vector<std::string> empty_defs;
    for (const auto& a : taxonomy.archetypes) {
      if (a.definition.empty()) empty_defs.push_back(a.name);
    }
    if (empty_defs.empty()) {
      report.checks.push_back({"readability", CheckStatus::Pass, "all definitions non-empty"});
    } else {
      std::string detail = "empty definitions:";
      for (const auto& name : empty_defs) detail += " \"" + name + "\"";
      report.checks.push_back({"readability", CheckStatus::Fail, detail});
    }
  }

  {
    std::vector<std::string> dangling;
    for (const auto& [fine, target] : taxonomy.projection) {
      if (!taxonomy.has_archetype(target)) dangling.push_back(fine);
    }
    if (dangling.empty()) {
      report.checks.push_back({"hierarchical coherence", CheckStatus::Pass,
                               "projection is total onto the archetype set"});
    } else {
      std::string detail = "projection keys with missing targets:";
      for (const auto& name : dangling) detail += " \"" + name + "\"";
      report.checks.push_back({"hierarchical coherence", CheckStatus::Fail, detail});
    }
  }

  report.checks.push_back({"flexibility", CheckStatus::ManualReview,
                           "coverage of new tasks and entity types needs human judgement"});
  return report;
}

std::string canonical_taxonomy_json(const Taxonomy& taxonomy) {
  ordered_json doc;
  doc["archetypes"] = ordered_json::array();
  for (const auto& a : taxonomy.archetypes) {
    doc["archetypes"].push_back({{"name", a.name}, {"definition", a.definition}});
  }
  doc["projection"] = ordered_json::object();
  for (const auto& [fine, target] : taxonomy.projection) doc["projection"][fine] = target;
  return doc.dump();
}

std::string canonical_target_schema_json(const TargetSchema& target) {
  ordered_json doc;
  doc["domain_name"] = target.domain_name;
  doc["types"] = ordered_json::array();
  for (const auto& t : target.types) {
    doc["types"].push_back({{"name", t.name}, {"definition", t.definition}});
  }
  return doc.dump();
}

}  // namespace samner::schema
