#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <map>
#include <memory>
#include <numeric>
#include <string>
#include <vector>

#include "slidegen/doc_model.hpp"
#include "slidegen/errors.hpp"

namespace slidegen {

struct Embedding {
  std::vector<double> values;
  int dim() const { return static_cast<int>(values.size()); }
  bool operator==(const Embedding&) const = default;
};

struct RankedSection {
  std::string section_id;
  double score = 0.0;  // cosine similarity, in [-1, 1]
  int rank = 0;        // 1-based
  bool operator==(const RankedSection&) const = default;
};

class EmbeddingProvider {
public:
  virtual ~EmbeddingProvider() = default;
  virtual std::vector<Embedding> embed(const std::vector<std::string>& texts) = 0;
  virtual std::string name() const = 0;
};

inline std::vector<std::string> lexical_tokens(const std::string& text) {
  std::vector<std::string> out;
  std::string current;
  for (unsigned char c : text) {
    if (std::isalnum(c)) {
      current += static_cast<char>(std::tolower(c));
    } else if (!current.empty()) {
      out.push_back(std::move(current));
      current.clear();
    }
  }
  if (!current.empty()) out.push_back(std::move(current));
  return out;
}

/// Deterministic offline fallback: TF-IDF bag-of-words over the batch, with
/// a lexicographically ordered vocabulary so vectors are reproducible.
class TfidfEmbeddingProvider final : public EmbeddingProvider {
public:
  std::vector<Embedding> embed(const std::vector<std::string>& texts) override {
    std::vector<std::vector<std::string>> docs;
    docs.reserve(texts.size());
    for (const auto& t : texts) docs.push_back(lexical_tokens(t));

    std::map<std::string, int> doc_freq;
    for (const auto& doc : docs) {
      std::map<std::string, int> seen;
      for (const auto& tok : doc) seen[tok] = 1;
      for (const auto& [tok, _] : seen) doc_freq[tok] += 1;
    }
    std::vector<std::string> vocab;
    vocab.reserve(doc_freq.size());
    for (const auto& [tok, _] : doc_freq) vocab.push_back(tok);

    const double n = static_cast<double>(texts.size());
    std::vector<Embedding> out;
    out.reserve(docs.size());
    for (const auto& doc : docs) {
      std::map<std::string, int> tf;
      for (const auto& tok : doc) tf[tok] += 1;
      Embedding e;
      e.values.reserve(vocab.size());
      for (const auto& tok : vocab) {
        const auto it = tf.find(tok);
        const double count = it == tf.end() ? 0.0 : static_cast<double>(it->second);
        const double idf = std::log((n + 1.0) / (doc_freq.at(tok) + 1.0)) + 1.0;
        e.values.push_back(count * idf);
      }
      out.push_back(std::move(e));
    }
    return out;
  }
  std::string name() const override { return "tfidf"; }
};

/// Test/demo provider returning pre-scripted vectors in request order.
class ScriptedEmbeddingProvider final : public EmbeddingProvider {
public:
  explicit ScriptedEmbeddingProvider(std::vector<Embedding> vectors)
      : vectors_(std::move(vectors)) {}

  std::vector<Embedding> embed(const std::vector<std::string>& texts) override {
    if (texts.size() != vectors_.size())
      throw ProviderError("scripted provider has " + std::to_string(vectors_.size()) +
                              " vectors but got " + std::to_string(texts.size()) + " texts",
                          false);
    return vectors_;
  }
  std::string name() const override { return "scripted"; }

private:
  std::vector<Embedding> vectors_;
};

/// Always fails; stands in for an unreachable endpoint.
class FailingEmbeddingProvider final : public EmbeddingProvider {
public:
  explicit FailingEmbeddingProvider(std::string message = "provider timeout", bool retryable = true)
      : message_(std::move(message)), retryable_(retryable) {}
  std::vector<Embedding> embed(const std::vector<std::string>&) override {
    ++calls_;
    throw ProviderError(message_, retryable_);
  }
  std::string name() const override { return "failing"; }
  int calls() const { return calls_; }

private:
  std::string message_;
  bool retryable_;
  int calls_ = 0;
};

enum class EmbeddingProvenance { provider, lexical_fallback };

struct EmbedBatch {
  std::vector<Embedding> vectors;
  EmbeddingProvenance provenance = EmbeddingProvenance::provider;
};

struct EmbeddingStack {
  EmbeddingProvider* primary = nullptr;
  bool lexical_fallback = false;
};

inline void validate_embeddings(const std::vector<Embedding>& vectors, std::size_t expected,
                                const std::string& provider_name) {
  if (vectors.size() != expected)
    throw ValidationError("provider '" + provider_name + "' returned " +
                          std::to_string(vectors.size()) + " embeddings for " +
                          std::to_string(expected) + " texts");
  for (std::size_t i = 0; i < vectors.size(); ++i) {
    if (vectors[i].dim() != vectors[0].dim())
      throw ValidationError("provider '" + provider_name + "' returned inconsistent dims");
    for (double v : vectors[i].values)
      if (!std::isfinite(v))
        throw ValidationError("embedding " + std::to_string(i) + " contains NaN/Inf");
  }
}

/// Embeds a batch via the primary provider, dropping to the TF-IDF fallback
/// on provider failure when enabled. Provenance reports which path ran.
inline EmbedBatch embed(const std::vector<std::string>& texts, const EmbeddingStack& stack) {
  if (texts.empty()) throw ValidationError("embed: texts must be non-empty");
  if (!stack.primary) throw ValidationError("embed: no provider configured");
  try {
    EmbedBatch batch{stack.primary->embed(texts), EmbeddingProvenance::provider};
    validate_embeddings(batch.vectors, texts.size(), stack.primary->name());
    return batch;
  } catch (const ProviderError&) {
    if (!stack.lexical_fallback) throw;
    TfidfEmbeddingProvider fallback;
    EmbedBatch batch{fallback.embed(texts), EmbeddingProvenance::lexical_fallback};
    validate_embeddings(batch.vectors, texts.size(), fallback.name());
    return batch;
  }
}

inline double norm(const Embedding& e) {
  return std::sqrt(std::inner_product(e.values.begin(), e.values.end(), e.values.begin(), 0.0));
}

inline double cosine(const Embedding& a, const Embedding& b) {
  if (a.dim() != b.dim())
    throw DimensionMismatch("cosine: dims differ (" + std::to_string(a.dim()) + " vs " +
                            std::to_string(b.dim()) + ")");
  const double na = norm(a);
  const double nb = norm(b);
  if (na == 0.0 || nb == 0.0) throw ZeroVector("cosine: zero vector");
  const double dot = std::inner_product(a.values.begin(), a.values.end(), b.values.begin(), 0.0);
  return std::clamp(dot / (na * nb), -1.0, 1.0);
}

/// Text a section is indexed under: heading prefixed to the body.
inline std::string section_index_text(const Section& s) {
  return s.heading.empty() ? s.text : s.heading + "\n" + s.text;
}

/// Top-k sections by cosine similarity to the topic. One batched provider
/// call embeds [topic, section_0, ..., section_n]. Ties break toward the
/// earlier document index; all-zero vectors score 0.
inline std::vector<RankedSection> retrieve_sections(const Paper& paper, const std::string& topic,
                                                    int k, const EmbeddingStack& stack,
                                                    EmbeddingProvenance* provenance = nullptr) {
  if (k < 1) throw ValidationError("retrieve_sections: k must be >= 1");
  if (paper.sections.empty()) throw ValidationError("retrieve_sections: paper has no sections");

  std::vector<std::string> texts;
  texts.reserve(paper.sections.size() + 1);
  texts.push_back(topic);
  for (const auto& s : paper.sections) texts.push_back(section_index_text(s));

  const EmbedBatch batch = embed(texts, stack);
  if (provenance) *provenance = batch.provenance;
  const Embedding& topic_vec = batch.vectors[0];
  const double topic_norm = norm(topic_vec);

  struct Scored {
    std::size_t index;
    double score;
  };
  std::vector<Scored> scored;
  scored.reserve(paper.sections.size());
  for (std::size_t i = 0; i < paper.sections.size(); ++i) {
    const Embedding& vec = batch.vectors[i + 1];
    const double score =
        (topic_norm == 0.0 || norm(vec) == 0.0) ? 0.0 : cosine(topic_vec, vec);
    scored.push_back({i, score});
  }
  std::stable_sort(scored.begin(), scored.end(), [](const Scored& a, const Scored& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.index < b.index;
  });

  const std::size_t take = std::min<std::size_t>(static_cast<std::size_t>(k), scored.size());
  std::vector<RankedSection> out;
  out.reserve(take);
  for (std::size_t i = 0; i < take; ++i)
    out.push_back({paper.sections[scored[i].index].id, scored[i].score, static_cast<int>(i + 1)});
  return out;
}

}  // namespace slidegen

#ifndef SLIDEGEN_NO_HTTP
#include <cstdlib>

#include <httplib.h>

namespace slidegen {

struct HttpEmbeddingConfig {
  std::string base_url;
  std::string path = "/v1/embeddings";
  std::string model;
  std::string auth_env = "SLIDEGEN_API_KEY";
  int timeout_seconds = 60;
};

/// Embeddings-endpoint provider: request is the text batch, response one
/// equal-dimension vector per text. The auth token comes from the
/// environment at call time.
class HttpEmbeddingProvider final : public EmbeddingProvider {
public:
  explicit HttpEmbeddingProvider(HttpEmbeddingConfig config) : config_(std::move(config)) {}

  std::vector<Embedding> embed(const std::vector<std::string>& texts) override {
    httplib::Client client(config_.base_url);
    client.set_read_timeout(config_.timeout_seconds, 0);
    httplib::Headers headers;
    if (const char* token = std::getenv(config_.auth_env.c_str()); token && *token)
      headers.emplace("Authorization", std::string("Bearer ") + token);
    const nlohmann::json body = {{"model", config_.model}, {"input", texts}};
    auto res = client.Post(config_.path, headers, body.dump(), "application/json");
    if (!res) throw ProviderError("connection failure to " + config_.base_url, true);
    if (res->status != 200)
      throw ProviderError("http " + std::to_string(res->status) + " from embeddings endpoint",
                          res->status >= 500);
    const auto reply = nlohmann::json::parse(res->body, nullptr, false);
    if (reply.is_discarded() || !reply.contains("data") || !reply.at("data").is_array())
      throw ProviderError("embeddings endpoint returned an unexpected body", false);
    std::vector<Embedding> out;
    for (const auto& item : reply.at("data")) {
      Embedding e;
      for (const auto& v : item.at("embedding")) e.values.push_back(v.get<double>());
      out.push_back(std::move(e));
    }
    return out;
  }

  std::string name() const override { return "http:" + config_.model; }

private:
  HttpEmbeddingConfig config_;
};

}  // namespace slidegen
#endif  // SLIDEGEN_NO_HTTP
