#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "slidegen/content_gen.hpp"
#include "slidegen/json_io.hpp"
#include "slidegen/llm_gateway.hpp"
#include "slidegen/retrieval.hpp"
#include "slidegen/verify_loop.hpp"
#include "slidegen/visualizer.hpp"

namespace slidegen {

struct ChatProviderConfig {
  std::string model = "mock-chat";
  std::string endpoint;  // http transport only
  std::string auth_env = "SLIDEGEN_API_KEY";
};

struct EmbeddingsConfig {
  std::string provider = "tfidf";  // "tfidf" | "http"
  std::string model = "tfidf-local";
  std::string endpoint;
  std::string auth_env = "SLIDEGEN_API_KEY";
};

enum class TransportKind { mock, replay, http };

struct Config {
  ChatProviderConfig chat;
  std::string vision_model = "mock-vision";
  EmbeddingsConfig embeddings;
  int retrieval_k = 5;
  bool full_paper_mode = false;
  bool use_neighbor_slides = true;
  bool lexical_fallback = true;
  LoopConfig loop = [] {
    LoopConfig c;
    c.use_visual_llm = true;
    return c;
  }();
  RenderOptions render;
  TransportKind transport = TransportKind::mock;
  std::filesystem::path recording_path;  // replay input
  std::filesystem::path mock_script;     // mock replies (JSON array of strings)
  std::filesystem::path output_dir = "out";
  std::filesystem::path assets_dir = "assets";
  int id_base = 301;
  OutOfBoundsPolicy initial_layout_oob = OutOfBoundsPolicy::pass;
  std::vector<LabelAlias> figure_ref_aliases;
  int jobs = 1;
};

namespace configdetail {

inline RgbColor parse_hex_color(const std::string& hex, const std::string& where) {
  if (hex.size() != 7 || hex[0] != '#')
    throw ParseError(where + ": colors must look like \"#rrggbb\", got '" + hex + "'");
  auto nibble = [&](char c) -> int {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    throw ParseError(where + ": invalid hex digit in '" + hex + "'");
  };
  auto byte = [&](int i) { return nibble(hex[i]) * 16 + nibble(hex[i + 1]); };
  return {byte(1), byte(3), byte(5)};
}

}  // namespace configdetail

/// Loads a config file; every key is optional and falls back to the default.
inline Config load_config(const std::filesystem::path& path) {
  Config config;
  const json doc = parse_json_file(path);
  const std::string where = path.string();
  if (!doc.is_object()) throw ParseError(where + ": config must be a JSON object");

  if (doc.contains("chat")) {
    const json& c = doc.at("chat");
    if (c.contains("model")) config.chat.model = c.at("model").get<std::string>();
    if (c.contains("endpoint")) config.chat.endpoint = c.at("endpoint").get<std::string>();
    if (c.contains("auth_env")) config.chat.auth_env = c.at("auth_env").get<std::string>();
  }
  if (doc.contains("vision") && doc.at("vision").contains("model"))
    config.vision_model = doc.at("vision").at("model").get<std::string>();
  if (doc.contains("embeddings")) {
    const json& e = doc.at("embeddings");
    if (e.contains("provider")) config.embeddings.provider = e.at("provider").get<std::string>();
    if (e.contains("model")) config.embeddings.model = e.at("model").get<std::string>();
    if (e.contains("endpoint")) config.embeddings.endpoint = e.at("endpoint").get<std::string>();
    if (e.contains("auth_env")) config.embeddings.auth_env = e.at("auth_env").get<std::string>();
  }
  if (doc.contains("retrieval_k")) config.retrieval_k = doc.at("retrieval_k").get<int>();
  if (doc.contains("full_paper_mode")) config.full_paper_mode = doc.at("full_paper_mode").get<bool>();
  if (doc.contains("use_neighbor_slides"))
    config.use_neighbor_slides = doc.at("use_neighbor_slides").get<bool>();
  if (doc.contains("lexical_fallback"))
    config.lexical_fallback = doc.at("lexical_fallback").get<bool>();
  if (doc.contains("loop")) {
    const json& l = doc.at("loop");
    if (l.contains("max_iters")) config.loop.max_iters = l.at("max_iters").get<int>();
    if (l.contains("stop_on_no_findings"))
      config.loop.stop_on_no_findings = l.at("stop_on_no_findings").get<bool>();
    if (l.contains("stop_on_fixpoint"))
      config.loop.stop_on_fixpoint = l.at("stop_on_fixpoint").get<bool>();
    if (l.contains("use_visual_llm")) config.loop.use_visual_llm = l.at("use_visual_llm").get<bool>();
    if (l.contains("alignment")) {
      const json& a = l.at("alignment");
      if (a.contains("aligned_tol")) config.loop.alignment.aligned_tol = a.at("aligned_tol").get<double>();
      if (a.contains("warn_tol")) config.loop.alignment.warn_tol = a.at("warn_tol").get<double>();
      if (a.contains("grid")) config.loop.alignment.grid = a.at("grid").get<double>();
    }
  }
  if (doc.contains("render")) {
    const json& r = doc.at("render");
    if (r.contains("scale")) config.render.scale = r.at("scale").get<double>();
    if (r.contains("raster_enabled")) config.render.raster_enabled = r.at("raster_enabled").get<bool>();
    if (r.contains("palette")) {
      config.render.palette.clear();
      for (const auto& c : r.at("palette"))
        config.render.palette.push_back(
            configdetail::parse_hex_color(c.get<std::string>(), where + " render.palette"));
    }
  }
  if (doc.contains("transport")) {
    const std::string t = doc.at("transport").get<std::string>();
    if (t == "mock")
      config.transport = TransportKind::mock;
    else if (t == "replay")
      config.transport = TransportKind::replay;
    else if (t == "http")
      config.transport = TransportKind::http;
    else
      throw ParseError(where + ": transport must be mock|replay|http");
  }
  if (doc.contains("recording")) config.recording_path = doc.at("recording").get<std::string>();
  if (doc.contains("mock_script")) config.mock_script = doc.at("mock_script").get<std::string>();
  if (doc.contains("output_dir")) config.output_dir = doc.at("output_dir").get<std::string>();
  if (doc.contains("assets_dir")) config.assets_dir = doc.at("assets_dir").get<std::string>();
  if (doc.contains("id_base")) config.id_base = doc.at("id_base").get<int>();
  if (doc.contains("initial_layout_oob")) {
    const std::string p = doc.at("initial_layout_oob").get<std::string>();
    if (p == "pass")
      config.initial_layout_oob = OutOfBoundsPolicy::pass;
    else if (p == "clamp")
      config.initial_layout_oob = OutOfBoundsPolicy::clamp;
    else if (p == "strict")
      config.initial_layout_oob = OutOfBoundsPolicy::strict;
    else
      throw ParseError(where + ": initial_layout_oob must be pass|clamp|strict");
  }
  if (doc.contains("figure_ref_aliases")) {
    for (const auto& pair : doc.at("figure_ref_aliases")) {
      if (!pair.is_array() || pair.size() != 2)
        throw ParseError(where + ": figure_ref_aliases entries are [prefix, canonical] pairs");
      config.figure_ref_aliases.push_back(
          {pair[0].get<std::string>(), pair[1].get<std::string>()});
    }
  }
  if (doc.contains("jobs")) config.jobs = doc.at("jobs").get<int>();
  return config;
}

/// Checks invariants that span fields; prompt assets must exist.
inline void validate_config(const Config& config) {
  if (config.retrieval_k < 1) throw ValidationError("config: retrieval_k must be >= 1");
  if (config.jobs < 1) throw ValidationError("config: jobs must be >= 1");
  if (config.transport == TransportKind::replay && config.recording_path.empty())
    throw ValidationError("config: replay transport needs a recording path");
  if (config.transport == TransportKind::mock && config.mock_script.empty())
    throw ValidationError("config: mock transport needs a mock_script replies file");
  PromptLibrary::load(config.assets_dir);  // throws AssetError when assets are missing
}

/// Builds the configured transport. Mock scripts are a JSON array of reply
/// strings served in order.
inline std::unique_ptr<Transport> make_transport(const Config& config) {
  switch (config.transport) {
    case TransportKind::mock: {
      const json script = parse_json_file(config.mock_script);
      if (!script.is_array())
        throw ParseError(config.mock_script.string() + ": mock script must be a JSON array");
      std::vector<std::string> replies;
      for (const auto& r : script) {
        if (r.is_string())
          replies.push_back(r.get<std::string>());
        else
          replies.push_back(r.dump());  // structured replies may be written inline
      }
      return std::make_unique<MockTransport>(std::move(replies));
    }
    case TransportKind::replay:
      return std::make_unique<ReplayTransport>(config.recording_path);
    case TransportKind::http: {
      HttpTransportConfig http;
      http.base_url = config.chat.endpoint;
      http.auth_env = config.chat.auth_env;
      if (http.base_url.empty())
        throw ValidationError("config: http transport needs chat.endpoint");
      return std::make_unique<HttpTransport>(http);
    }
  }
  throw ValidationError("config: unknown transport");
}

inline std::unique_ptr<EmbeddingProvider> make_embedding_provider(const Config& config) {
  if (config.embeddings.provider == "tfidf") return std::make_unique<TfidfEmbeddingProvider>();
#ifndef SLIDEGEN_NO_HTTP
  if (config.embeddings.provider == "http") {
    HttpEmbeddingConfig http;
    http.base_url = config.embeddings.endpoint;
    http.model = config.embeddings.model;
    http.auth_env = config.embeddings.auth_env;
    if (http.base_url.empty())
      throw ValidationError("config: http embeddings need embeddings.endpoint");
    return std::make_unique<HttpEmbeddingProvider>(http);
  }
#endif
  throw ValidationError("config: unknown embeddings provider '" + config.embeddings.provider + "'");
}

}  // namespace slidegen
