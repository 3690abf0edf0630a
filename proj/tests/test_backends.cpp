#include <doctest.h>

#include <atomic>
#include <cstdio>
#include <fstream>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "samner/backend.hpp"
#include "samner/errors.hpp"

using namespace samner;
using nlohmann::ordered_json;

namespace {

backend::PromptTemplate test_template() {
  backend::PromptTemplate tpl;
  tpl.id = "anchor.test";
  tpl.role_preamble = "You extract entities.";
  tpl.body = "Schema: {schema}\nText: {sentence}";
  return tpl;
}

std::string write_script(const std::string& name, const ordered_json& doc) {
  const std::string path = std::string("backend_test_") + name;
  std::ofstream out(path);
  out << doc.dump();
  return path;
}

}  // namespace

TEST_CASE("render substitutes bindings and rejects missing ones") {
  const auto tpl = test_template();
  const auto rendered = backend::render(tpl, {{"schema", "person"}, {"sentence", "Bob sang"}});
  CHECK(rendered.system == "You extract entities.");
  CHECK(rendered.user == "Schema: person\nText: Bob sang");

  CHECK_THROWS_AS(backend::render(tpl, {{"sentence", "Bob sang"}}), ValidationError);
}

TEST_CASE("render leaves JSON braces alone") {
  backend::PromptTemplate tpl;
  tpl.id = "t";
  tpl.body = R"(Reply like {"person": ["Bob"]} for {sentence})";
  const auto rendered = backend::render(tpl, {{"sentence", "x"}});
  CHECK(rendered.user == R"(Reply like {"person": ["Bob"]} for x)");
}

TEST_CASE("template stage validation") {
  backend::PromptTemplate tpl;
  tpl.id = "t";
  tpl.body = "Schema: {schema}\nText: {sentence}";
  CHECK_NOTHROW(backend::validate_template(tpl, backend::Stage::Anchor));

  tpl.body = "Text: {sentence}";
  CHECK_THROWS_AS(backend::validate_template(tpl, backend::Stage::Anchor), ValidationError);

  tpl.body = "Schema: {schema} {schema}\nText: {sentence}";
  CHECK_THROWS_AS(backend::validate_template(tpl, backend::Stage::Anchor), ValidationError);

  tpl.body = "Schema: {schema}\nText: {sentence}\nExtra: {bogus_slot}";
  CHECK_THROWS_AS(backend::validate_template(tpl, backend::Stage::Anchor), ValidationError);
}

TEST_CASE("fingerprints are stable and order-insensitive") {
  const backend::Bindings a = {{"schema", "person"}, {"sentence", "Bob"}};
  backend::Bindings b;
  b["sentence"] = "Bob";
  b["schema"] = "person";
  CHECK(backend::request_fingerprint("t", a) == backend::request_fingerprint("t", b));
  CHECK(backend::request_fingerprint("t", a) != backend::request_fingerprint("u", a));
  CHECK(backend::request_fingerprint("t", a) !=
        backend::request_fingerprint("t", {{"schema", "person"}, {"sentence", "Alice"}}));
}

TEST_CASE("scripted backend replays canned replies deterministically") {
  const auto tpl = test_template();
  const backend::Bindings bindings = {{"schema", "person"}, {"sentence", "Bob sang"}};
  const auto fingerprint = backend::request_fingerprint(tpl.id, bindings);

  ordered_json script;
  script["strict"] = true;
  script["entries"] = ordered_json::array();
  script["entries"].push_back(
      {{"stage", "anchor"}, {"fingerprint", fingerprint}, {"reply", R"({"person": ["Bob"]})"}});
  const auto path = write_script("replay.json", script);

  backend::ScriptedBackend scripted(path, "anchor");
  const auto first = scripted.complete(tpl, bindings);
  const auto second = scripted.complete(tpl, bindings);
  CHECK(first.raw_text == R"({"person": ["Bob"]})");
  CHECK(first.raw_text == second.raw_text);

  // stage mismatch: the same fingerprint under another stage is unknown
  backend::ScriptedBackend wrong_stage(path, "explorer");
  CHECK_THROWS_AS(wrong_stage.complete(tpl, bindings), BackendError);
  std::remove(path.c_str());
}

TEST_CASE("scripted backend strict mode names the missing fingerprint") {
  ordered_json script;
  script["strict"] = true;
  script["entries"] = ordered_json::array();
  const auto path = write_script("strict.json", script);

  const auto tpl = test_template();
  const backend::Bindings bindings = {{"schema", "x"}, {"sentence", "y"}};
  backend::ScriptedBackend scripted(path, "anchor");
  try {
    scripted.complete(tpl, bindings);
    FAIL("expected BackendError");
  } catch (const BackendError& e) {
    CHECK(std::string(e.what()).find(backend::request_fingerprint(tpl.id, bindings)) !=
          std::string::npos);
  }
  std::remove(path.c_str());
}

TEST_CASE("scripted backend lenient mode returns an empty reply") {
  ordered_json script;
  script["strict"] = false;
  script["entries"] = ordered_json::array();
  const auto path = write_script("lenient.json", script);

  backend::ScriptedBackend scripted(path, "anchor");
  const auto reply = scripted.complete(test_template(), {{"schema", "x"}, {"sentence", "y"}});
  CHECK(reply.raw_text.empty());
  std::remove(path.c_str());
}

TEST_CASE("parse_entity_list handles plain, fenced and prose-wrapped replies") {
  const auto direct = backend::parse_entity_list(R"({"person": ["Bob Dylan"], "location": []})");
  REQUIRE(direct.has_value());
  REQUIRE(direct->size() == 2);
  CHECK((*direct)[0].first == "person");
  CHECK((*direct)[0].second == std::vector<std::string>{"Bob Dylan"});
  CHECK((*direct)[1].second.empty());

  const auto fenced = backend::parse_entity_list("Sure! ```{\"org\": [\"UN\"]}```");
  REQUIRE(fenced.has_value());
  CHECK((*fenced)[0].first == "org");
  CHECK((*fenced)[0].second == std::vector<std::string>{"UN"});

  CHECK_FALSE(backend::parse_entity_list("I found no entities.").has_value());
  CHECK_FALSE(backend::parse_entity_list(R"({"person": "Bob"})").has_value());
}

TEST_CASE("parse_entity_list trims surfaces") {
  const auto parsed = backend::parse_entity_list(R"({"a": ["  padded  ", "x"]})");
  REQUIRE(parsed.has_value());
  CHECK((*parsed)[0].second == std::vector<std::string>{"padded", "x"});
}

TEST_CASE("parse_string_map finds the first surface->label object") {
  const auto parsed = backend::parse_string_map(R"(Here: {"Bob Dylan": "Person"})");
  REQUIRE(parsed.has_value());
  CHECK((*parsed)[0] == std::pair<std::string, std::string>{"Bob Dylan", "Person"});
  CHECK_FALSE(backend::parse_string_map("nothing").has_value());
  CHECK_FALSE(backend::parse_string_map(R"({"a": ["list"]})").has_value());
}

TEST_CASE("parse_label_choice matches whole tokens case-insensitively") {
  CHECK(backend::parse_label_choice("The correct type is Person.", {"Person", "Location"}) ==
        "Person");
  CHECK_FALSE(backend::parse_label_choice("Neither fits well.", {"Person"}).has_value());
  CHECK(backend::parse_label_choice("Could be Location, but final answer: Person",
                                    {"Person", "Location"}) == "Person");
  // substrings inside longer words do not count
  CHECK_FALSE(backend::parse_label_choice("personal matters", {"person"}).has_value());
  // returns the canonical spelling from the allowed set
  CHECK(backend::parse_label_choice("PERSON", {"person"}) == "person");
}

TEST_CASE("http backend completes against a local endpoint") {
  httplib::Server server;
  std::atomic<int> hits{0};
  server.Post("/v1/chat/completions", [&](const httplib::Request& req, httplib::Response& res) {
    ++hits;
    const auto body = ordered_json::parse(req.body);
    CHECK(body.at("model") == "test-model");
    CHECK(body.at("temperature") == 0.0);
    ordered_json reply;
    reply["choices"] = ordered_json::array();
    reply["choices"].push_back({{"message", {{"content", "{\"person\": [\"Bob\"]}"}}}});
    res.set_content(reply.dump(), "application/json");
  });
  const int port = server.bind_to_any_port("127.0.0.1");
  std::thread server_thread([&] { server.listen_after_bind(); });
  server.wait_until_ready();

  backend::BackendProfile profile;
  profile.name = "test";
  profile.endpoint_url = "http://127.0.0.1:" + std::to_string(port) + "/v1";
  profile.model_id = "test-model";
  profile.retry_backoff = std::chrono::milliseconds(1);

  backend::HttpBackend http(profile);
  const auto reply = http.complete(test_template(), {{"schema", "person"}, {"sentence", "Bob"}});
  CHECK(reply.raw_text == "{\"person\": [\"Bob\"]}");
  CHECK(hits == 1);

  server.stop();
  server_thread.join();
}

TEST_CASE("http backend retries 500s and fails permanently after max_retries+1") {
  httplib::Server server;
  std::atomic<int> hits{0};
  server.Post("/chat/completions", [&](const httplib::Request&, httplib::Response& res) {
    ++hits;
    res.status = 500;
  });
  const int port = server.bind_to_any_port("127.0.0.1");
  std::thread server_thread([&] { server.listen_after_bind(); });
  server.wait_until_ready();

  backend::BackendProfile profile;
  profile.name = "flaky";
  profile.endpoint_url = "http://127.0.0.1:" + std::to_string(port);
  profile.model_id = "m";
  profile.max_retries = 2;
  profile.retry_backoff = std::chrono::milliseconds(1);

  backend::HttpBackend http(profile);
  try {
    http.complete(test_template(), {{"schema", "x"}, {"sentence", "y"}});
    FAIL("expected BackendError");
  } catch (const BackendError& e) {
    CHECK_FALSE(e.transient());
  }
  CHECK(hits == 3);  // max_retries + 1

  server.stop();
  server_thread.join();
}

TEST_CASE("http backend recovers when a retry succeeds") {
  httplib::Server server;
  std::atomic<int> hits{0};
  server.Post("/chat/completions", [&](const httplib::Request&, httplib::Response& res) {
    if (++hits == 1) {
      res.status = 503;
      return;
    }
    ordered_json reply;
    reply["choices"] = ordered_json::array();
    reply["choices"].push_back({{"message", {{"content", "ok"}}}});
    res.set_content(reply.dump(), "application/json");
  });
  const int port = server.bind_to_any_port("127.0.0.1");
  std::thread server_thread([&] { server.listen_after_bind(); });
  server.wait_until_ready();

  backend::BackendProfile profile;
  profile.name = "recovering";
  profile.endpoint_url = "http://127.0.0.1:" + std::to_string(port);
  profile.model_id = "m";
  profile.retry_backoff = std::chrono::milliseconds(1);

  backend::HttpBackend http(profile);
  const auto reply = http.complete(test_template(), {{"schema", "x"}, {"sentence", "y"}});
  CHECK(reply.raw_text == "ok");
  CHECK(hits == 2);

  server.stop();
  server_thread.join();
}

TEST_CASE("http backend treats 4xx as permanent without retrying") {
  httplib::Server server;
  std::atomic<int> hits{0};
  server.Post("/chat/completions", [&](const httplib::Request&, httplib::Response& res) {
    ++hits;
    res.status = 401;
  });
  const int port = server.bind_to_any_port("127.0.0.1");
  std::thread server_thread([&] { server.listen_after_bind(); });
  server.wait_until_ready();

  backend::BackendProfile profile;
  profile.name = "denied";
  profile.endpoint_url = "http://127.0.0.1:" + std::to_string(port);
  profile.model_id = "m";
  profile.retry_backoff = std::chrono::milliseconds(1);

  backend::HttpBackend http(profile);
  CHECK_THROWS_AS(http.complete(test_template(), {{"schema", "x"}, {"sentence", "y"}}),
                  BackendError);
  CHECK(hits == 1);

  server.stop();
  server_thread.join();
}

TEST_CASE("retry templates keep ids scriptable") {
  const auto tpl = test_template();
  CHECK(backend::make_choice_retry(tpl).id == "anchor.test#retry");
  CHECK(backend::make_entity_list_retry(tpl).id == "anchor.test#retry");
  CHECK(backend::make_choice_retry(tpl).body.find("{choices}") != std::string::npos);
}
