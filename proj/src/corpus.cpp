#include "samner/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include <nlohmann/json.hpp>

#include "samner/errors.hpp"

namespace samner::corpus {
namespace {

using nlohmann::ordered_json;

const std::string kOpen = kEntOpen;
const std::string kClose = kEntClose;

std::string trim(const std::string& s) {
  std::size_t begin = 0;
  std::size_t end = s.size();
  while (begin < end && std::isspace(static_cast<unsigned char>(s[begin]))) ++begin;
  while (end > begin && std::isspace(static_cast<unsigned char>(s[end - 1]))) --end;
  return s.substr(begin, end - begin);
}

std::vector<std::string> split_ws(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream in(s);
  std::string piece;
  while (in >> piece) out.push_back(piece);
  return out;
}

// Keeps the longer of any two overlapping spanned mentions, logging discards.
std::vector<EntityMention> drop_overlaps(std::vector<EntityMention> mentions,
                                         const std::string& sentence_id, Log& log) {
  std::vector<std::size_t> order(mentions.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const auto& ma = mentions[a];
    const auto& mb = mentions[b];
    if (!ma.span || !mb.span) return static_cast<bool>(ma.span) && !mb.span;
    const auto la = ma.span->second - ma.span->first;
    const auto lb = mb.span->second - mb.span->first;
    return la > lb;
  });

  std::vector<bool> keep(mentions.size(), true);
  std::vector<CharSpan> claimed;
  for (std::size_t idx : order) {
    const auto& m = mentions[idx];
    if (!m.span) continue;
    bool clash = false;
    for (const auto& c : claimed) {
      if (m.span->first < c.second && c.first < m.span->second) {
        clash = true;
        break;
      }
    }
    if (clash) {
      keep[idx] = false;
      log.warn("sentence " + sentence_id + ": dropped gold mention \"" + m.surface +
               "\" overlapping a longer mention");
    } else {
      claimed.push_back(*m.span);
    }
  }

  std::vector<EntityMention> out;
  for (std::size_t i = 0; i < mentions.size(); ++i) {
    if (keep[i]) out.push_back(std::move(mentions[i]));
  }
  return out;
}

struct BioTag {
  char kind;  // 'O', 'B' or 'I'
  std::string label;
};

BioTag parse_bio_tag(const std::string& tag, const std::string& path, std::size_t line_no) {
  if (tag == "O") return {'O', ""};
  if (tag.size() > 2 && (tag[0] == 'B' || tag[0] == 'I') && tag[1] == '-') {
    return {tag[0], tag.substr(2)};
  }
  throw IoError(path + ":" + std::to_string(line_no) + ": malformed BIO tag \"" + tag + "\"");
}

}  // namespace

std::vector<Sentence> load_conll(const std::string& path, Log& log) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);

  const std::string stem = std::filesystem::path(path).stem().string();
  std::vector<Sentence> sentences;
  std::set<std::string> manifest_types;
  std::set<std::string> observed_types;
  bool have_manifest = false;

  std::vector<std::string> tokens;
  std::vector<BioTag> tags;
  std::vector<std::size_t> tag_lines;

  auto flush = [&] {
    if (tokens.empty()) return;
    Sentence s;
    s.id = stem + "-" + std::to_string(sentences.size());
    std::vector<CharSpan> token_spans;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
      if (i > 0) s.text += ' ';
      token_spans.push_back({s.text.size(), s.text.size() + tokens[i].size()});
      s.text += tokens[i];
    }

    constexpr std::size_t kNone = static_cast<std::size_t>(-1);
    std::size_t open_start = kNone;
    std::size_t open_end = 0;
    std::string open_label;
    auto close = [&] {
      if (open_start == kNone) return;
      s.gold.push_back({s.text.substr(open_start, open_end - open_start),
                        CharSpan{open_start, open_end}, open_label});
      open_start = kNone;
    };

    for (std::size_t i = 0; i < tokens.size(); ++i) {
      BioTag tag = tags[i];
      if (tag.kind == 'I' && (open_start == kNone || open_label != tag.label)) {
        log.warn(path + ":" + std::to_string(tag_lines[i]) + ": orphan I-" + tag.label +
                 " treated as B-" + tag.label);
        tag.kind = 'B';
      }
      if (tag.kind == 'O') {
        close();
      } else if (tag.kind == 'B') {
        close();
        open_start = token_spans[i].first;
        open_end = token_spans[i].second;
        open_label = tag.label;
      } else {
        open_end = token_spans[i].second;
      }
      if (tag.kind != 'O') observed_types.insert(tag.label);
    }
    close();
    sentences.push_back(std::move(s));
    tokens.clear();
    tags.clear();
    tag_lines.clear();
  };

  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) {
      flush();
      continue;
    }
    if (line[0] == '#') {
      const std::string body = trim(line.substr(1));
      if (body.rfind("types:", 0) == 0) {
        have_manifest = true;
        std::string list = body.substr(6);
        std::replace(list.begin(), list.end(), ',', ' ');
        for (const auto& t : split_ws(list)) manifest_types.insert(t);
      }
      continue;
    }
    const std::vector<std::string> fields = split_ws(line);
    if (fields.size() < 2) {
      throw IoError(path + ":" + std::to_string(line_no) + ": expected token and tag");
    }
    tokens.push_back(fields.front());
    tags.push_back(parse_bio_tag(fields.back(), path, line_no));
    tag_lines.push_back(line_no);
  }
  flush();

  const std::set<std::string>& types = have_manifest ? manifest_types : observed_types;
  for (auto& s : sentences) s.schema_types = types;
  return sentences;
}

void write_conll(const std::vector<Sentence>& sentences, const std::string& path, Log& log) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path + " for writing");

  for (const auto& s : sentences) {
    std::vector<std::string> tokens;
    std::vector<CharSpan> token_spans;
    std::size_t pos = 0;
    for (const auto& token : split_ws(s.text)) {
      const std::size_t start = s.text.find(token, pos);
      tokens.push_back(token);
      token_spans.push_back({start, start + token.size()});
      pos = start + token.size();
    }

    std::vector<std::string> tags(tokens.size(), "O");
    for (const auto& m : s.gold) {
      if (!m.span) {
        log.warn("sentence " + s.id + ": mention \"" + m.surface + "\" has no span, skipped");
        continue;
      }
      const std::string label = m.label.value_or("misc");
      bool first = true;
      for (std::size_t i = 0; i < tokens.size(); ++i) {
        if (token_spans[i].first < m.span->second && m.span->first < token_spans[i].second) {
          tags[i] = (first ? "B-" : "I-") + label;
          first = false;
        }
      }
    }
    for (std::size_t i = 0; i < tokens.size(); ++i) out << tokens[i] << '\t' << tags[i] << '\n';
    out << '\n';
  }
}

std::vector<Sentence> load_jsonl(const std::string& path, Log& log) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);

  std::vector<Sentence> sentences;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    ordered_json record;
    try {
      record = ordered_json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw IoError(path + ":" + std::to_string(line_no) + ": " + e.what());
    }
    if (!record.contains("id") || !record["id"].is_string() || !record.contains("text") ||
        !record["text"].is_string()) {
      throw IoError(path + ":" + std::to_string(line_no) + ": record needs string id and text");
    }

    Sentence s;
    s.id = record["id"].get<std::string>();
    s.text = record["text"].get<std::string>();
    if (record.contains("types")) {
      for (const auto& t : record["types"]) s.schema_types.insert(t.get<std::string>());
    }
    if (record.contains("entities")) {
      for (const auto& e : record["entities"]) {
        EntityMention m;
        m.surface = e.value("surface", std::string{});
        if (m.surface.empty()) {
          throw IoError("record " + s.id + ": entity with empty surface");
        }
        const bool has_start = e.contains("start");
        const bool has_end = e.contains("end");
        if (has_start != has_end) {
          throw IoError("record " + s.id + ": span needs both start and end");
        }
        if (has_start) {
          const auto start = e["start"].get<long long>();
          const auto end = e["end"].get<long long>();
          if (start < 0 || end <= start || static_cast<std::size_t>(end) > s.text.size()) {
            throw IoError("record " + s.id + ": span out of bounds for \"" + m.surface + "\"");
          }
          if (s.text.substr(static_cast<std::size_t>(start),
                            static_cast<std::size_t>(end - start)) != m.surface) {
            throw IoError("record " + s.id + ": span text does not match surface \"" + m.surface +
                          "\"");
          }
          m.span = CharSpan{static_cast<std::size_t>(start), static_cast<std::size_t>(end)};
        }
        if (e.contains("label")) m.label = e["label"].get<std::string>();
        s.gold.push_back(std::move(m));
      }
    }
    s.gold = drop_overlaps(std::move(s.gold), s.id, log);
    sentences.push_back(std::move(s));
  }
  return sentences;
}

TaggedSentence tag_entities(const std::string& sentence_text,
                            const std::vector<std::string>& entities, Log& log) {
  if (sentence_text.find(kOpen) != std::string::npos ||
      sentence_text.find(kClose) != std::string::npos) {
    throw ValidationError("sentence already contains entity tag markers");
  }

  std::vector<std::string> distinct;
  for (const auto& e : entities) {
    if (std::find(distinct.begin(), distinct.end(), e) == distinct.end()) distinct.push_back(e);
  }
  for (const auto& surface : distinct) {
    if (surface.empty()) throw ValidationError("empty entity surface");
    if (surface.find(kOpen) != std::string::npos || surface.find(kClose) != std::string::npos) {
      throw ValidationError("entity surface contains tag markers: \"" + surface + "\"");
    }
    if (sentence_text.find(surface) == std::string::npos) {
      throw ValidationError("entity \"" + surface + "\" does not occur in the sentence");
    }
  }

  struct Claim {
    std::size_t start;
    std::size_t end;
    std::string surface;
  };
  std::vector<Claim> claims;
  std::vector<std::string> pending = distinct;

  auto first_free = [&](const std::string& surface) -> std::optional<std::size_t> {
    std::size_t from = 0;
    while (true) {
      const std::size_t pos = sentence_text.find(surface, from);
      if (pos == std::string::npos) return std::nullopt;
      const std::size_t end = pos + surface.size();
      bool clash = false;
      for (const auto& c : claims) {
        if (pos < c.end && c.start < end) {
          clash = true;
          break;
        }
      }
      if (!clash) return pos;
      from = pos + 1;
    }
  };

  // Claim spans leftmost-first; on equal start the longer surface wins, so
  // shorter overlapping requests are suppressed instead of nesting.
  while (!pending.empty()) {
    std::optional<std::size_t> best_pos;
    std::size_t best_idx = 0;
    for (std::size_t i = 0; i < pending.size(); ++i) {
      const auto pos = first_free(pending[i]);
      if (!pos) continue;
      if (!best_pos || *pos < *best_pos ||
          (*pos == *best_pos && pending[i].size() > pending[best_idx].size())) {
        best_pos = pos;
        best_idx = i;
      }
    }
    if (!best_pos) {
      for (const auto& surface : pending) {
        log.warn("entity \"" + surface + "\" suppressed: every occurrence overlaps a tagged span");
      }
      break;
    }
    claims.push_back({*best_pos, *best_pos + pending[best_idx].size(), pending[best_idx]});
    pending.erase(pending.begin() + static_cast<std::ptrdiff_t>(best_idx));
  }

  std::sort(claims.begin(), claims.end(),
            [](const Claim& a, const Claim& b) { return a.start < b.start; });

  TaggedSentence tagged;
  std::size_t cursor = 0;
  for (const auto& c : claims) {
    tagged.text_with_tags += sentence_text.substr(cursor, c.start - cursor);
    tagged.text_with_tags += kOpen;
    tagged.text_with_tags += c.surface;
    tagged.text_with_tags += kClose;
    cursor = c.end;
    tagged.tagged.push_back({c.surface, CharSpan{c.start, c.end}, std::nullopt});
  }
  tagged.text_with_tags += sentence_text.substr(cursor);
  return tagged;
}

std::string strip_tags(const std::string& tagged_text) {
  std::string out;
  out.reserve(tagged_text.size());
  int depth = 0;
  std::size_t pos = 0;
  while (pos < tagged_text.size()) {
    if (tagged_text.compare(pos, kOpen.size(), kOpen) == 0) {
      ++depth;
      pos += kOpen.size();
    } else if (tagged_text.compare(pos, kClose.size(), kClose) == 0) {
      if (depth == 0) throw ValidationError("unbalanced tags: closing tag without opener");
      --depth;
      pos += kClose.size();
    } else {
      out += tagged_text[pos];
      ++pos;
    }
  }
  if (depth != 0) throw ValidationError("unbalanced tags: unclosed opening tag");
  return out;
}

void write_instruction_jsonl(const std::vector<InstructionRecord>& records,
                             const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path + " for writing");
  for (const auto& r : records) {
    ordered_json line;
    line["instruction"] = r.instruction;
    line["input"] = r.input;
    line["schema"] = r.schema;
    line["output"] = r.output;
    out << line.dump() << '\n';
  }
}

std::size_t convert_dialogue_to_instruction(const std::string& path_in, const std::string& path_out,
                                            Log& log) {
  std::ifstream in(path_in);
  if (!in) throw IoError("cannot open " + path_in);

  // Matches "What describes <type> in the text?" and the bare variant.
  auto asked_type = [](const std::string& text) -> std::optional<std::string> {
    const std::string prefix = "What describes ";
    const std::size_t start = text.find(prefix);
    if (start == std::string::npos) return std::nullopt;
    std::size_t end = text.find('?', start);
    if (end == std::string::npos) return std::nullopt;
    std::string type = text.substr(start + prefix.size(), end - start - prefix.size());
    const std::string suffix = " in the text";
    if (type.size() >= suffix.size() && type.compare(type.size() - suffix.size(), suffix.size(), suffix) == 0) {
      type = type.substr(0, type.size() - suffix.size());
    }
    type = trim(type);
    if (type.empty()) return std::nullopt;
    return type;
  };

  std::vector<InstructionRecord> records;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const std::string where = path_in + ":" + std::to_string(line_no);

    ordered_json record;
    try {
      record = ordered_json::parse(line);
    } catch (const nlohmann::json::parse_error&) {
      log.warn(where + ": skipped record: not valid JSON");
      continue;
    }
    if (!record.contains("conversations") || !record["conversations"].is_array() ||
        record["conversations"].empty()) {
      log.warn(where + ": skipped record: no conversations");
      continue;
    }

    const auto& turns = record["conversations"];
    std::string sentence;
    {
      const auto& first = turns[0];
      if (!first.is_object() || first.value("from", "") != "human" || !first.contains("value")) {
        log.warn(where + ": skipped record: first turn is not a human text turn");
        continue;
      }
      sentence = first["value"].get<std::string>();
      const std::string text_prefix = "Text:";
      if (sentence.rfind(text_prefix, 0) == 0) sentence = trim(sentence.substr(text_prefix.size()));
    }
    if (sentence.empty()) {
      log.warn(where + ": skipped record: empty sentence");
      continue;
    }

    std::vector<std::string> schema;
    ordered_json output = ordered_json::object();
    bool bad = false;
    for (std::size_t i = 1; i + 1 < turns.size(); ++i) {
      const auto& ask = turns[i];
      if (!ask.is_object() || ask.value("from", "") != "human") continue;
      const auto type = asked_type(ask["value"].get<std::string>());
      if (!type) continue;
      const auto& answer = turns[i + 1];
      if (!answer.is_object() || answer.value("from", "") != "gpt" || !answer.contains("value")) {
        log.warn(where + ": skipped record: question for \"" + *type + "\" has no answer turn");
        bad = true;
        break;
      }
      ordered_json parsed;
      try {
        parsed = ordered_json::parse(answer["value"].get<std::string>());
      } catch (const nlohmann::json::parse_error&) {
        log.warn(where + ": skipped record: answer for \"" + *type + "\" is not a JSON list");
        bad = true;
        break;
      }
      if (!parsed.is_array()) {
        log.warn(where + ": skipped record: answer for \"" + *type + "\" is not a JSON list");
        bad = true;
        break;
      }
      std::vector<std::string> surfaces;
      for (const auto& item : parsed) {
        if (!item.is_string()) {
          bad = true;
          break;
        }
        surfaces.push_back(item.get<std::string>());
      }
      if (bad) {
        log.warn(where + ": skipped record: answer for \"" + *type + "\" has non-string entries");
        break;
      }
      schema.push_back(*type);
      output[*type] = surfaces;
    }
    if (bad) continue;
    if (schema.empty()) {
      log.warn(where + ": skipped record: no entity questions found");
      continue;
    }

    InstructionRecord out;
    out.instruction =
        "Extract the entities of the listed types from the input text. Reply with a JSON "
        "object mapping each type to the list of extracted mentions.";
    out.input = sentence;
    out.schema = schema;
    out.output = output.dump();
    records.push_back(std::move(out));
  }

  write_instruction_jsonl(records, path_out);
  return records.size();
}

}  // namespace samner::corpus
