#pragma once

#include <chrono>
#include <cstdint>
#include <cstdlib>
#include <deque>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <variant>
#include <vector>

#include "slidegen/json_io.hpp"

namespace slidegen {

inline std::string base64_encode(std::string_view data) {
  static constexpr char alphabet[] =
      "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";
  std::string out;
  out.reserve((data.size() + 2) / 3 * 4);
  std::size_t i = 0;
  for (; i + 3 <= data.size(); i += 3) {
    const unsigned v = (static_cast<unsigned char>(data[i]) << 16) |
                       (static_cast<unsigned char>(data[i + 1]) << 8) |
                       static_cast<unsigned char>(data[i + 2]);
    out += alphabet[(v >> 18) & 63];
    out += alphabet[(v >> 12) & 63];
    out += alphabet[(v >> 6) & 63];
    out += alphabet[v & 63];
  }
  if (i + 1 == data.size()) {
    const unsigned v = static_cast<unsigned char>(data[i]) << 16;
    out += alphabet[(v >> 18) & 63];
    out += alphabet[(v >> 12) & 63];
    out += "==";
  } else if (i + 2 == data.size()) {
    const unsigned v = (static_cast<unsigned char>(data[i]) << 16) |
                       (static_cast<unsigned char>(data[i + 1]) << 8);
    out += alphabet[(v >> 18) & 63];
    out += alphabet[(v >> 12) & 63];
    out += alphabet[(v >> 6) & 63];
    out += '=';
  }
  return out;
}

struct ImageAttachment {
  std::string media_type;  // e.g. "image/x-portable-pixmap"
  std::string base64_data;
  bool operator==(const ImageAttachment&) const = default;
};

struct ChatMessage {
  std::string role;  // "system" | "user" | "assistant"
  std::string text;
  std::optional<ImageAttachment> image;  // at most one image per message
  bool operator==(const ChatMessage&) const = default;
};

struct ChatRequest {
  std::string model;
  std::vector<ChatMessage> messages;
  std::string reply_schema;
  double temperature = 0.0;
  bool operator==(const ChatRequest&) const = default;
};

// ---------------------------------------------------------------------------
// Request hashing (stable across platforms; keys the replay store)

inline std::uint64_t fnv1a64(std::string_view data) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : data) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

inline std::string canonical_request_key(const ChatRequest& req) {
  std::ostringstream out;
  out << req.model << '\x1f' << req.reply_schema << '\x1f' << req.temperature << '\x1e';
  for (const auto& m : req.messages) {
    out << m.role << '\x1f' << m.text << '\x1f';
    if (m.image) out << m.image->media_type << ':' << m.image->base64_data;
    out << '\x1e';
  }
  return out.str();
}

inline std::string request_hash(const ChatRequest& req) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(fnv1a64(canonical_request_key(req))));
  return buf;
}

// ---------------------------------------------------------------------------
// Transports

class Transport {
public:
  virtual ~Transport() = default;
  /// Returns the assistant's raw reply text.
  virtual std::string send(const ChatRequest& req) = 0;
  virtual std::string kind() const = 0;
};

struct ScriptedFailure {
  std::string message;
  bool retryable = true;
};

/// Deterministic transport for tests and offline runs: replies (or failures)
/// are served FIFO from a scripted table; every request is kept for
/// inspection.
class MockTransport final : public Transport {
public:
  MockTransport() = default;
  explicit MockTransport(std::vector<std::string> replies) {
    for (auto& r : replies) script_.emplace_back(std::move(r));
  }

  void push_reply(std::string reply) { script_.emplace_back(std::move(reply)); }
  void push_failure(std::string message, bool retryable = true) {
    script_.emplace_back(ScriptedFailure{std::move(message), retryable});
  }

  std::string send(const ChatRequest& req) override {
    requests_.push_back(req);
    if (script_.empty())
      throw TransportError("mock transport script exhausted after " +
                               std::to_string(requests_.size() - 1) + " replies",
                           false);
    auto entry = std::move(script_.front());
    script_.pop_front();
    if (auto* failure = std::get_if<ScriptedFailure>(&entry))
      throw TransportError(failure->message, failure->retryable);
    return std::get<std::string>(entry);
  }

  std::string kind() const override { return "mock"; }

  const std::vector<ChatRequest>& requests() const { return requests_; }
  std::size_t call_count() const { return requests_.size(); }

private:
  std::deque<std::variant<std::string, ScriptedFailure>> script_;
  std::vector<ChatRequest> requests_;
};

/// Serves responses from a recording file keyed by request hash; duplicate
/// hashes are consumed in recorded order.
class ReplayTransport final : public Transport {
public:
  explicit ReplayTransport(const std::filesystem::path& recording_path)
      : path_(recording_path) {
    const json doc = parse_json_file(recording_path);
    if (!doc.is_array()) throw ParseError("recording must be a JSON array: " + path_);
    for (const auto& entry : doc) {
      const std::string hash = jio::require_string(entry, "hash", path_);
      const std::string response = jio::require_string(entry, "response", path_);
      entries_[hash].push_back(response);
    }
  }

  std::string send(const ChatRequest& req) override {
    const std::string hash = request_hash(req);
    std::lock_guard<std::mutex> lock(mutex_);
    auto it = entries_.find(hash);
    if (it == entries_.end() || it->second.empty())
      throw GatewayError("no recorded response for request " + hash + " (schema '" +
                         req.reply_schema + "') in " + path_);
    std::string response = std::move(it->second.front());
    it->second.pop_front();
    return response;
  }

  std::string kind() const override { return "replay"; }

private:
  std::string path_;
  std::map<std::string, std::deque<std::string>> entries_;
  std::mutex mutex_;
};

/// Wraps another transport and appends (hash, schema, response) entries to a
/// recording file after every call. Only the request hash is persisted, so
/// recordings never contain auth material.
class RecordingTransport final : public Transport {
public:
  RecordingTransport(Transport& inner, std::filesystem::path out_path)
      : inner_(inner), out_path_(std::move(out_path)) {}

  std::string send(const ChatRequest& req) override {
    std::string response = inner_.send(req);
    {
      std::lock_guard<std::mutex> lock(mutex_);
      entries_.push_back({{"hash", request_hash(req)},
                          {"schema", req.reply_schema},
                          {"response", response}});
      write_json_file(out_path_, entries_);
    }
    return response;
  }

  std::string kind() const override { return "record(" + inner_.kind() + ")"; }

private:
  Transport& inner_;
  std::filesystem::path out_path_;
  json entries_ = json::array();
  std::mutex mutex_;
};

struct HttpTransportConfig {
  std::string base_url;                        // e.g. "http://127.0.0.1:8080"
  std::string path = "/v1/chat/completions";  // chat-completions style endpoint
  std::string auth_env = "SLIDEGEN_API_KEY";  // env var holding the bearer token
  int max_retries = 2;                        // beyond the first attempt
  int backoff_ms = 250;                       // doubles per retry
  int timeout_seconds = 60;
};

namespace detail {

inline json chat_request_body(const ChatRequest& req) {
  json messages = json::array();
  for (const auto& m : req.messages) {
    if (m.image) {
      messages.push_back(
          {{"role", m.role},
           {"content",
            json::array(
                {{{"type", "text"}, {"text", m.text}},
                 {{"type", "image_url"},
                  {"image_url",
                   {{"url", "data:" + m.image->media_type + ";base64," + m.image->base64_data}}}}})}});
    } else {
      messages.push_back({{"role", m.role}, {"content", m.text}});
    }
  }
  return {{"model", req.model}, {"messages", messages}, {"temperature", req.temperature}};
}

}  // namespace detail

/// Chat-completions HTTP provider. Retries retryable failures with
/// exponential backoff; the auth token is read from the environment at call
/// time and never stored.
class HttpTransport final : public Transport {
public:
  explicit HttpTransport(HttpTransportConfig config) : config_(std::move(config)) {}

  std::string send(const ChatRequest& req) override;

  std::string kind() const override { return "http"; }

private:
  HttpTransportConfig config_;
};

// ---------------------------------------------------------------------------
// Structured replies

/// Returns an error description, or nullopt when the reply is acceptable.
using ReplyValidator = std::function<std::optional<std::string>(const json&)>;

namespace detail {

/// Models often wrap JSON in a markdown fence; accept that and bare JSON.
inline std::string strip_code_fence(const std::string& raw) {
  const auto open = raw.find("```");
  if (open == std::string::npos) return raw;
  auto body_start = raw.find('\n', open);
  if (body_start == std::string::npos) return raw;
  ++body_start;
  const auto close = raw.find("```", body_start);
  if (close == std::string::npos) return raw;
  return raw.substr(body_start, close - body_start);
}

inline std::optional<json> try_parse_reply(const std::string& raw) {
  json parsed = json::parse(strip_code_fence(raw), nullptr, false);
  if (parsed.is_discarded()) return std::nullopt;
  return parsed;
}

}  // namespace detail

/// Built-in reply schemas. Callers may wrap these with extra, task-specific
/// checks; the schema id still names the base contract.
inline const std::map<std::string, ReplyValidator>& builtin_reply_schemas() {
  static const std::map<std::string, ReplyValidator> schemas = [] {
    std::map<std::string, ReplyValidator> m;
    m["content_plan"] = [](const json& j) -> std::optional<std::string> {
      if (!j.is_object()) return "reply must be a JSON object";
      if (!j.contains("slide_title") || !j.at("slide_title").is_string() ||
          j.at("slide_title").get<std::string>().empty())
        return "'slide_title' must be a non-empty string";
      if (!j.contains("bullets") || !j.at("bullets").is_array())
        return "'bullets' must be an array of strings";
      for (const auto& b : j.at("bullets"))
        if (!b.is_string()) return "'bullets' must contain only strings";
      if (j.contains("selected_figures")) {
        if (!j.at("selected_figures").is_array()) return "'selected_figures' must be an array";
        for (const auto& f : j.at("selected_figures"))
          if (!f.is_string()) return "'selected_figures' must contain only strings";
      }
      const bool no_bullets = j.at("bullets").empty();
      const bool no_figures = !j.contains("selected_figures") || j.at("selected_figures").empty();
      if (no_bullets && no_figures) return "plan must contain bullets or selected figures";
      if (j.contains("speaker_context") && !j.at("speaker_context").is_string())
        return "'speaker_context' must be a string";
      return std::nullopt;
    };
    m["layout_elements"] = [](const json& j) -> std::optional<std::string> {
      if (!j.is_object() || !j.contains("elements") || !j.at("elements").is_array())
        return "reply must be an object with an 'elements' array";
      for (const auto& e : j.at("elements")) {
        if (!e.is_object()) return "each element must be an object";
        if (!e.contains("kind") || !e.at("kind").is_string())
          return "element missing string 'kind'";
        const std::string kind = e.at("kind").get<std::string>();
        if (kind != "title" && kind != "body" && kind != "image")
          return "element kind '" + kind + "' must be title|body|image";
        if (!e.contains("bounds") || !e.at("bounds").is_array() || e.at("bounds").size() != 4)
          return "element missing 'bounds' [left, top, right, bottom]";
        for (const auto& v : e.at("bounds"))
          if (!v.is_number()) return "element bounds must be numbers";
      }
      return std::nullopt;
    };
    m["review_list"] = [](const json& j) -> std::optional<std::string> {
      if (!j.is_array()) return "reply must be a JSON array";
      for (const auto& item : j) {
        if (!item.is_object()) return "each recommendation must be an object";
        if (!item.contains("element") || !item.at("element").is_number_integer())
          return "recommendation missing integer 'element'";
        if (!item.contains("recommendation") || !item.at("recommendation").is_string())
          return "recommendation missing string 'recommendation'";
      }
      return std::nullopt;
    };
    m["judge_score"] = [](const json& j) -> std::optional<std::string> {
      if (!j.is_object()) return "reply must be a JSON object";
      if (!j.contains("reason") || !j.at("reason").is_string())
        return "'reason' must be a string";
      if (!j.contains("score") || !j.at("score").is_number_integer())
        return "'score' must be an integer";
      const int score = j.at("score").get<int>();
      if (score < 1 || score > 5) return "'score' must be between 1 and 5";
      return std::nullopt;
    };
    return m;
  }();
  return schemas;
}

/// Sends the request and validates the structured reply. On a schema
/// violation the request is re-sent once with the validation error appended;
/// a second violation raises SchemaError carrying both raw replies.
inline json complete(const ChatRequest& req, Transport& transport, const ReplyValidator& validator) {
  if (builtin_reply_schemas().find(req.reply_schema) == builtin_reply_schemas().end())
    throw ValidationError("unregistered reply schema '" + req.reply_schema + "'");

  std::vector<std::string> raw_replies;
  ChatRequest attempt = req;
  for (int round = 0; round < 2; ++round) {
    const std::string raw = transport.send(attempt);
    raw_replies.push_back(raw);
    std::optional<std::string> violation;
    if (auto parsed = detail::try_parse_reply(raw)) {
      violation = validator(*parsed);
      if (!violation) return *parsed;
    } else {
      violation = "reply is not valid JSON";
    }
    if (round == 0) {
      attempt.messages.push_back({"assistant", raw, std::nullopt});
      attempt.messages.push_back(
          {"user",
           "Your reply failed validation: " + *violation +
               ". Reply again with corrected JSON only, no surrounding prose.",
           std::nullopt});
    }
  }
  throw SchemaError("reply failed schema '" + req.reply_schema + "' after one repair reprompt",
                    raw_replies);
}

inline json complete(const ChatRequest& req, Transport& transport) {
  const auto& schemas = builtin_reply_schemas();
  const auto it = schemas.find(req.reply_schema);
  if (it == schemas.end())
    throw ValidationError("unregistered reply schema '" + req.reply_schema + "'");
  return complete(req, transport, it->second);
}

}  // namespace slidegen

// ---------------------------------------------------------------------------
// HTTP implementation (kept below the interface; httplib is header-only)

#ifndef SLIDEGEN_NO_HTTP
#include <httplib.h>

namespace slidegen {

inline std::string HttpTransport::send(const ChatRequest& req) {
  const json body = detail::chat_request_body(req);
  std::string last_error;
  for (int attempt = 0; attempt <= config_.max_retries; ++attempt) {
    if (attempt > 0)
      std::this_thread::sleep_for(
          std::chrono::milliseconds(config_.backoff_ms * (1 << (attempt - 1))));
    httplib::Client client(config_.base_url);
    client.set_read_timeout(config_.timeout_seconds, 0);
    httplib::Headers headers;
    if (const char* token = std::getenv(config_.auth_env.c_str()); token && *token)
      headers.emplace("Authorization", std::string("Bearer ") + token);
    auto res = client.Post(config_.path, headers, body.dump(), "application/json");
    if (!res) {
      last_error = "connection failure to " + config_.base_url;
      continue;  // transport-level failures are retryable
    }
    if (res->status >= 500) {
      last_error = "server error " + std::to_string(res->status);
      continue;
    }
    if (res->status != 200)
      throw TransportError("http " + std::to_string(res->status) + " from " + config_.base_url,
                           false);
    const json reply = json::parse(res->body, nullptr, false);
    if (reply.is_discarded())
      throw TransportError("provider returned non-JSON body", false);
    try {
      return reply.at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const json::exception&) {
      throw TransportError("provider reply missing choices[0].message.content", false);
    }
  }
  throw TransportError("http transport failed after " + std::to_string(config_.max_retries + 1) +
                           " attempts: " + last_error,
                       true);
}

}  // namespace slidegen
#endif  // SLIDEGEN_NO_HTTP
