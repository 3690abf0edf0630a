#pragma once

#include <chrono>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

namespace samner::backend {

struct BackendProfile {
  std::string name;
  std::string endpoint_url;
  std::string model_id;
  double temperature = 0.0;
  int max_output_tokens = 512;
  std::chrono::milliseconds timeout{30000};
  int max_retries = 2;
  int parallelism_limit = 4;
  std::string api_key_env = "OPENAI_API_KEY";
  std::chrono::milliseconds retry_backoff{250};
};

enum class Stage { Anchor, Explorer, Classifier, Calibrator, Direct };

const char* stage_name(Stage stage);

struct PromptTemplate {
  std::string id;
  std::string role_preamble;  // system message
  std::string body;           // user message with {placeholder} slots
};

using Bindings = std::map<std::string, std::string>;

struct ModelReply {
  std::string raw_text;
  std::chrono::milliseconds latency{0};
};

struct RenderedPrompt {
  std::string system;
  std::string user;
};

// Template files: "id: <id>" first, then [system] and [user] sections.
PromptTemplate load_template(const std::string& path);

// Each stage's required placeholders must appear exactly once; optional ones
// at most once; anything else is rejected.
void validate_template(const PromptTemplate& tpl, Stage stage);

// Substitutes {placeholder} slots; a slot without a binding is an error.
// Unused bindings are fine (they still contribute to the fingerprint).
RenderedPrompt render(const PromptTemplate& tpl, const Bindings& bindings);

// Stable identity of a request: hash of (template id, sorted bindings).
// Script files key canned replies by (stage, fingerprint).
std::string request_fingerprint(const std::string& template_id, const Bindings& bindings);

class Backend {
 public:
  virtual ~Backend() = default;
  virtual ModelReply complete(const PromptTemplate& tpl, const Bindings& bindings) = 0;
  virtual std::string name() const = 0;
};

// Deterministic replay backend: answers complete() from a script file. In
// strict mode an unknown fingerprint is an error naming it; otherwise the
// reply is empty.
class ScriptedBackend final : public Backend {
 public:
  ScriptedBackend(const std::string& script_path, std::string stage);
  ModelReply complete(const PromptTemplate& tpl, const Bindings& bindings) override;
  std::string name() const override { return "scripted:" + stage_; }

 private:
  std::string stage_;
  bool strict_ = true;
  std::map<std::string, std::string> replies_;  // "<stage>:<fingerprint>" -> raw text
};

// OpenAI-compatible chat-completions client. Transport failures and
// retryable statuses (429, 5xx) are retried with exponential backoff up to
// profile.max_retries; exhaustion or a non-retryable status raises a
// permanent BackendError. Concurrent requests are capped by
// profile.parallelism_limit.
class HttpBackend final : public Backend {
 public:
  explicit HttpBackend(BackendProfile profile);
  ~HttpBackend() override;
  ModelReply complete(const PromptTemplate& tpl, const Bindings& bindings) override;
  std::string name() const override { return profile_.name; }

 private:
  struct Impl;
  BackendProfile profile_;
  std::unique_ptr<Impl> impl_;
};

// First well-formed JSON object mapping type -> list of surfaces found in the
// reply, tolerating surrounding prose and code fences. Surfaces are trimmed;
// empty lists are preserved. Key order follows the reply.
std::optional<std::vector<std::pair<std::string, std::vector<std::string>>>> parse_entity_list(
    const std::string& raw_text);

// First well-formed JSON object with string values (surface -> label).
std::optional<std::vector<std::pair<std::string, std::string>>> parse_string_map(
    const std::string& raw_text);

// The allowed label mentioned in the reply, whole-token and case-insensitive;
// when several occur the last mention wins. Returns the canonical spelling.
std::optional<std::string> parse_label_choice(const std::string& raw_text,
                                              const std::vector<std::string>& allowed);

// Reprompt templates for the single constrained retry after a parse failure.
// Fingerprints stay scriptable: ids get a "#retry" suffix and the retry
// bindings extend the original ones.
PromptTemplate make_choice_retry(const PromptTemplate& base);
PromptTemplate make_entity_list_retry(const PromptTemplate& base);

std::string join(const std::vector<std::string>& items, const std::string& sep);

}  // namespace samner::backend
