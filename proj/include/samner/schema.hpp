#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace samner::schema {

struct Archetype {
  std::string name;
  std::string definition;
};

// The universal mediation space: an ordered archetype list plus the fixed
// fine-grained-type -> archetype projection. Immutable after load; safe to
// share across pipeline workers.
struct Taxonomy {
  std::vector<Archetype> archetypes;
  std::map<std::string, std::string> projection;  // fine type -> archetype name

  bool has_archetype(const std::string& name) const;
  // Case-insensitive lookup returning the canonical spelling.
  std::optional<std::string> canonical_archetype(const std::string& name) const;
  const Archetype* find_archetype(const std::string& name) const;
  std::vector<std::string> archetype_names() const;
};

struct TargetType {
  std::string name;
  std::string definition;
};

struct TargetSchema {
  std::string domain_name;
  std::vector<TargetType> types;

  std::vector<std::string> type_names() const;
  std::optional<std::string> canonical_type(const std::string& name) const;
  const TargetType* find_type(const std::string& name) const;
};

// Parse without invariant checks (structure errors still throw); load = parse
// + validate. Keeping them separate lets the desiderata validator run on
// documents that would not pass load.
Taxonomy parse_taxonomy(const std::string& path);
void validate_taxonomy(const Taxonomy& taxonomy);
Taxonomy load_taxonomy(const std::string& path);

TargetSchema parse_target_schema(const std::string& path);
void validate_target_schema(const TargetSchema& target);
TargetSchema load_target_schema(const std::string& path);

// Exact-match lookup after trimming surrounding whitespace, case-sensitive.
std::optional<std::string> project(const Taxonomy& taxonomy, const std::string& fine_type);

// Projects a whole fine-grained type set; any unmapped member aborts with the
// full list of unmapped names.
std::set<std::string> project_schema(const Taxonomy& taxonomy, const std::set<std::string>& fine_types);

enum class CheckStatus { Pass, Fail, ManualReview };

struct DesideratumCheck {
  std::string name;
  CheckStatus status;
  std::string details;
};

struct DesiderataReport {
  std::vector<DesideratumCheck> checks;
  bool mechanical_pass() const;
};

// Mechanical proxies for the taxonomy design desiderata: unambiguity (unique
// names), readability (non-empty definitions), hierarchical coherence
// (projection totality). Subjective desiderata are reported as manual review.
DesiderataReport validate_desiderata(const Taxonomy& taxonomy);

// Canonical single-line serializations backing content hashes.
std::string canonical_taxonomy_json(const Taxonomy& taxonomy);
std::string canonical_target_schema_json(const TargetSchema& target);

}  // namespace samner::schema
