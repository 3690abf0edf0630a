#include "samner/backend.hpp"

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <fstream>
#include <semaphore>
#include <sstream>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "samner/errors.hpp"
#include "samner/hash.hpp"

namespace samner::backend {
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

bool is_placeholder_char(char c) {
  return (c >= 'a' && c <= 'z') || c == '_';
}

// Collects {identifier} slots; brace content that is not a bare lowercase
// identifier (e.g. JSON examples) is left alone.
std::vector<std::string> placeholders_in(const std::string& text) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  while (pos < text.size()) {
    if (text[pos] != '{') {
      ++pos;
      continue;
    }
    std::size_t end = pos + 1;
    while (end < text.size() && is_placeholder_char(text[end])) ++end;
    if (end > pos + 1 && end < text.size() && text[end] == '}') {
      out.push_back(text.substr(pos + 1, end - pos - 1));
      pos = end + 1;
    } else {
      ++pos;
    }
  }
  return out;
}

std::string substitute(const std::string& text, const Bindings& bindings,
                       const std::string& template_id) {
  std::string out;
  out.reserve(text.size());
  std::size_t pos = 0;
  while (pos < text.size()) {
    if (text[pos] != '{') {
      out += text[pos++];
      continue;
    }
    std::size_t end = pos + 1;
    while (end < text.size() && is_placeholder_char(text[end])) ++end;
    if (end > pos + 1 && end < text.size() && text[end] == '}') {
      const std::string key = text.substr(pos + 1, end - pos - 1);
      const auto it = bindings.find(key);
      if (it == bindings.end()) {
        throw ValidationError("template \"" + template_id + "\": missing binding {" + key + "}");
      }
      out += it->second;
      pos = end + 1;
    } else {
      out += text[pos++];
    }
  }
  return out;
}

// Balanced-brace candidate extraction that respects JSON string literals.
std::optional<std::string> object_candidate(const std::string& text, std::size_t start) {
  int depth = 0;
  bool in_string = false;
  bool escaped = false;
  for (std::size_t i = start; i < text.size(); ++i) {
    const char c = text[i];
    if (in_string) {
      if (escaped) {
        escaped = false;
      } else if (c == '\\') {
        escaped = true;
      } else if (c == '"') {
        in_string = false;
      }
      continue;
    }
    if (c == '"') {
      in_string = true;
    } else if (c == '{') {
      ++depth;
    } else if (c == '}') {
      --depth;
      if (depth == 0) return text.substr(start, i + 1 - start);
      if (depth < 0) break;
    }
  }
  return std::nullopt;
}

// Tries each '{' as a candidate start so a well-formed object inside prose or
// a rejected outer object is still found.
template <typename Fn>
std::optional<ordered_json> first_json_object(const std::string& raw, Fn accept) {
  std::size_t pos = 0;
  while (true) {
    pos = raw.find('{', pos);
    if (pos == std::string::npos) return std::nullopt;
    if (const auto candidate = object_candidate(raw, pos)) {
      ordered_json parsed = ordered_json::parse(*candidate, nullptr, false);
      if (parsed.is_object() && accept(parsed)) return parsed;
    }
    ++pos;
  }
}

}  // namespace

const char* stage_name(Stage stage) {
  switch (stage) {
    case Stage::Anchor: return "anchor";
    case Stage::Explorer: return "explorer";
    case Stage::Classifier: return "classifier";
    case Stage::Calibrator: return "calibrator";
    case Stage::Direct: return "direct";
  }
  return "unknown";
}

PromptTemplate load_template(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);

  PromptTemplate tpl;
  std::string line;
  enum class Section { Head, System, User } section = Section::Head;
  std::string system_text;
  std::string user_text;

  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (section == Section::Head) {
      if (trim(line).empty() || line[0] == '#') continue;
      if (line.rfind("id:", 0) == 0) {
        tpl.id = trim(line.substr(3));
        continue;
      }
      if (trim(line) == "[system]") {
        section = Section::System;
        continue;
      }
      throw ValidationError(path + ": expected \"id:\" then [system]/[user] sections");
    }
    if (trim(line) == "[system]") {
      section = Section::System;
      continue;
    }
    if (trim(line) == "[user]") {
      section = Section::User;
      continue;
    }
    auto& dest = (section == Section::System) ? system_text : user_text;
    dest += line;
    dest += '\n';
  }

  if (tpl.id.empty()) throw ValidationError(path + ": missing template id");
  while (!system_text.empty() && system_text.back() == '\n') system_text.pop_back();
  while (!user_text.empty() && user_text.back() == '\n') user_text.pop_back();
  if (user_text.empty()) throw ValidationError(path + ": empty [user] section");
  tpl.role_preamble = system_text;
  tpl.body = user_text;
  return tpl;
}

void validate_template(const PromptTemplate& tpl, Stage stage) {
  std::vector<std::string> required;
  std::vector<std::string> optional;
  switch (stage) {
    case Stage::Anchor:
    case Stage::Explorer:
      required = {"sentence", "schema"};
      break;
    case Stage::Classifier:
      required = {"tagged_sentence", "schema"};
      optional = {"archetype_definitions"};
      break;
    case Stage::Calibrator:
      required = {"tagged_sentence", "archetype", "archetype_definitions", "target_definitions"};
      optional = {"sentence"};
      break;
    case Stage::Direct:
      required = {"tagged_sentence", "target_definitions"};
      optional = {"sentence"};
      break;
  }

  std::map<std::string, int> counts;
  for (const auto& p : placeholders_in(tpl.role_preamble)) ++counts[p];
  for (const auto& p : placeholders_in(tpl.body)) ++counts[p];

  for (const auto& name : required) {
    const auto it = counts.find(name);
    if (it == counts.end() || it->second != 1) {
      throw ValidationError("template \"" + tpl.id + "\": placeholder {" + name +
                            "} must appear exactly once for stage " + stage_name(stage));
    }
  }
  for (const auto& [name, count] : counts) {
    if (std::find(required.begin(), required.end(), name) != required.end()) continue;
    const bool allowed = std::find(optional.begin(), optional.end(), name) != optional.end();
    if (!allowed) {
      throw ValidationError("template \"" + tpl.id + "\": unknown placeholder {" + name +
                            "} for stage " + stage_name(stage));
    }
    if (count > 1) {
      throw ValidationError("template \"" + tpl.id + "\": placeholder {" + name +
                            "} appears more than once");
    }
  }
}

RenderedPrompt render(const PromptTemplate& tpl, const Bindings& bindings) {
  return {substitute(tpl.role_preamble, bindings, tpl.id), substitute(tpl.body, bindings, tpl.id)};
}

std::string request_fingerprint(const std::string& template_id, const Bindings& bindings) {
  std::uint64_t h = fnv1a64(template_id);
  h = fnv1a64("\x1e", h);
  for (const auto& [key, value] : bindings) {  // std::map iterates sorted
    h = fnv1a64(key, h);
    h = fnv1a64("\x1f", h);
    h = fnv1a64(value, h);
    h = fnv1a64("\x1e", h);
  }
  return to_hex16(h);
}

ScriptedBackend::ScriptedBackend(const std::string& script_path, std::string stage)
    : stage_(std::move(stage)) {
  std::ifstream in(script_path);
  if (!in) throw IoError("cannot open " + script_path);
  ordered_json doc;
  try {
    doc = ordered_json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError(script_path + ": parse failure: " + e.what());
  }
  if (!doc.is_object() || !doc.contains("entries") || !doc["entries"].is_array()) {
    throw ValidationError(script_path + ": expected {strict?, entries: [...]}");
  }
  strict_ = doc.value("strict", true);
  for (const auto& entry : doc["entries"]) {
    if (!entry.contains("stage") || !entry.contains("fingerprint") || !entry.contains("reply")) {
      throw ValidationError(script_path + ": entries need stage, fingerprint, reply");
    }
    const std::string key =
        entry["stage"].get<std::string>() + ":" + entry["fingerprint"].get<std::string>();
    if (!replies_.emplace(key, entry["reply"].get<std::string>()).second) {
      throw ValidationError(script_path + ": duplicate script entry " + key);
    }
  }
}

ModelReply ScriptedBackend::complete(const PromptTemplate& tpl, const Bindings& bindings) {
  render(tpl, bindings);  // enforce the missing-binding contract even in replay
  const std::string key = stage_ + ":" + request_fingerprint(tpl.id, bindings);
  const auto it = replies_.find(key);
  if (it == replies_.end()) {
    if (strict_) {
      throw BackendError("scripted backend: no reply for " + key + " (template \"" + tpl.id + "\")",
                         /*transient=*/false);
    }
    return {"", std::chrono::milliseconds{0}};
  }
  return {it->second, std::chrono::milliseconds{0}};
}

struct HttpBackend::Impl {
  explicit Impl(int limit) : slots(limit > 0 ? limit : 1) {}
  std::counting_semaphore<1 << 20> slots;
};

namespace {

struct Endpoint {
  std::string base;  // scheme://host[:port]
  std::string path;  // request path
};

Endpoint split_endpoint(const std::string& url) {
  const std::size_t scheme_end = url.find("://");
  if (scheme_end == std::string::npos) {
    throw ConfigError("endpoint_url \"" + url + "\" needs a scheme");
  }
  const std::size_t authority_end = url.find('/', scheme_end + 3);
  Endpoint ep;
  if (authority_end == std::string::npos) {
    ep.base = url;
    ep.path = "";
  } else {
    ep.base = url.substr(0, authority_end);
    ep.path = url.substr(authority_end);
  }
  while (!ep.path.empty() && ep.path.back() == '/') ep.path.pop_back();
  const std::string suffix = "/chat/completions";
  if (ep.path.size() < suffix.size() ||
      ep.path.compare(ep.path.size() - suffix.size(), suffix.size(), suffix) != 0) {
    ep.path += suffix;
  }
  return ep;
}

bool retryable_status(int status) { return status == 429 || (status >= 500 && status < 600); }

}  // namespace

HttpBackend::HttpBackend(BackendProfile profile)
    : profile_(std::move(profile)), impl_(std::make_unique<Impl>(profile_.parallelism_limit)) {
  if (profile_.endpoint_url.empty()) {
    throw ConfigError("backend \"" + profile_.name + "\" has no endpoint_url");
  }
}

HttpBackend::~HttpBackend() = default;

ModelReply HttpBackend::complete(const PromptTemplate& tpl, const Bindings& bindings) {
  const RenderedPrompt prompt = render(tpl, bindings);
  const Endpoint ep = split_endpoint(profile_.endpoint_url);

  ordered_json request;
  request["model"] = profile_.model_id;
  request["messages"] = ordered_json::array();
  if (!prompt.system.empty()) {
    request["messages"].push_back({{"role", "system"}, {"content", prompt.system}});
  }
  request["messages"].push_back({{"role", "user"}, {"content", prompt.user}});
  request["temperature"] = profile_.temperature;
  request["max_tokens"] = profile_.max_output_tokens;
  const std::string payload = request.dump();

  httplib::Headers headers;
  if (const char* key = std::getenv(profile_.api_key_env.c_str()); key && *key) {
    headers.emplace("Authorization", std::string("Bearer ") + key);
  }

  impl_->slots.acquire();
  struct Release {
    std::counting_semaphore<1 << 20>& s;
    ~Release() { s.release(); }
  } release{impl_->slots};

  const auto started = std::chrono::steady_clock::now();
  std::string last_failure;
  for (int attempt = 0; attempt <= profile_.max_retries; ++attempt) {
    if (attempt > 0) {
      std::this_thread::sleep_for(profile_.retry_backoff * (1 << (attempt - 1)));
    }

    httplib::Client client(ep.base);
    client.set_connection_timeout(std::chrono::duration_cast<std::chrono::seconds>(profile_.timeout));
    client.set_read_timeout(std::chrono::duration_cast<std::chrono::seconds>(profile_.timeout));
    client.set_write_timeout(std::chrono::duration_cast<std::chrono::seconds>(profile_.timeout));

    auto result = client.Post(ep.path, headers, payload, "application/json");
    if (!result) {
      last_failure = "transport failure: " + httplib::to_string(result.error());
      continue;
    }
    if (result->status == 200) {
      ordered_json reply = ordered_json::parse(result->body, nullptr, false);
      if (reply.is_discarded() || !reply.contains("choices") || reply["choices"].empty() ||
          !reply["choices"][0].contains("message") ||
          !reply["choices"][0]["message"].contains("content")) {
        throw BackendError("backend \"" + profile_.name + "\": malformed completion response",
                           /*transient=*/false, result->status);
      }
      const auto latency = std::chrono::duration_cast<std::chrono::milliseconds>(
          std::chrono::steady_clock::now() - started);
      return {reply["choices"][0]["message"]["content"].get<std::string>(), latency};
    }
    if (retryable_status(result->status)) {
      last_failure = "HTTP " + std::to_string(result->status);
      continue;
    }
    throw BackendError("backend \"" + profile_.name + "\": HTTP " + std::to_string(result->status),
                       /*transient=*/false, result->status);
  }
  throw BackendError("backend \"" + profile_.name + "\": " + last_failure + " after " +
                         std::to_string(profile_.max_retries + 1) + " attempts",
                     /*transient=*/false);
}

std::optional<std::vector<std::pair<std::string, std::vector<std::string>>>> parse_entity_list(
    const std::string& raw_text) {
  const auto accept = [](const ordered_json& obj) {
    for (const auto& [key, value] : obj.items()) {
      (void)key;
      if (!value.is_array()) return false;
      for (const auto& item : value) {
        if (!item.is_string()) return false;
      }
    }
    return true;
  };
  const auto obj = first_json_object(raw_text, accept);
  if (!obj) return std::nullopt;

  std::vector<std::pair<std::string, std::vector<std::string>>> out;
  for (const auto& [key, value] : obj->items()) {
    std::vector<std::string> surfaces;
    for (const auto& item : value) surfaces.push_back(trim(item.get<std::string>()));
    out.emplace_back(key, std::move(surfaces));
  }
  return out;
}

std::optional<std::vector<std::pair<std::string, std::string>>> parse_string_map(
    const std::string& raw_text) {
  const auto accept = [](const ordered_json& obj) {
    if (obj.empty()) return false;
    for (const auto& [key, value] : obj.items()) {
      (void)key;
      if (!value.is_string()) return false;
    }
    return true;
  };
  const auto obj = first_json_object(raw_text, accept);
  if (!obj) return std::nullopt;

  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& [key, value] : obj->items()) {
    out.emplace_back(key, trim(value.get<std::string>()));
  }
  return out;
}

std::optional<std::string> parse_label_choice(const std::string& raw_text,
                                              const std::vector<std::string>& allowed) {
  const std::string haystack = lower(raw_text);
  auto token_boundary = [&](std::size_t pos, std::size_t len) {
    auto wordish = [](char c) {
      return std::isalnum(static_cast<unsigned char>(c)) || c == '_';
    };
    if (pos > 0 && wordish(haystack[pos - 1])) return false;
    if (pos + len < haystack.size() && wordish(haystack[pos + len])) return false;
    return true;
  };

  std::optional<std::string> best;
  std::size_t best_pos = 0;
  std::size_t best_len = 0;
  for (const auto& label : allowed) {
    if (label.empty()) continue;
    const std::string needle = lower(label);
    std::size_t from = 0;
    while (true) {
      const std::size_t pos = haystack.find(needle, from);
      if (pos == std::string::npos) break;
      if (token_boundary(pos, needle.size())) {
        // last mention wins; on identical position the longer label wins
        if (!best || pos > best_pos || (pos == best_pos && needle.size() > best_len)) {
          best = label;
          best_pos = pos;
          best_len = needle.size();
        }
      }
      from = pos + 1;
    }
  }
  return best;
}

PromptTemplate make_choice_retry(const PromptTemplate& base) {
  PromptTemplate retry = base;
  retry.id = base.id + "#retry";
  retry.body = base.body +
               "\n\nYour previous reply could not be parsed. For the entity \"{surface}\", "
               "answer with exactly one of: {choices}. Reply with the type name only.";
  return retry;
}

PromptTemplate make_entity_list_retry(const PromptTemplate& base) {
  PromptTemplate retry = base;
  retry.id = base.id + "#retry";
  retry.body = base.body +
               "\n\nYour previous reply could not be parsed. Reply with only a JSON object "
               "mapping each schema type to a list of extracted mentions, and nothing else.";
  return retry;
}

std::string join(const std::vector<std::string>& items, const std::string& sep) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i > 0) out += sep;
    out += items[i];
  }
  return out;
}

}  // namespace samner::backend
