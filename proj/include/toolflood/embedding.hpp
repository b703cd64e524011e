#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace toolflood {

/// Unit-norm embedding keyed to the provider/model that produced it.
/// Construction checks the l2 norm is 1 within 1e-6; use `normalized` to
/// build one from raw provider output.
class EmbeddingVector {
 public:
  EmbeddingVector(std::vector<double> values, std::string provider_id,
                  std::string model_id);

  static EmbeddingVector normalized(std::vector<double> raw,
                                    std::string provider_id,
                                    std::string model_id);

  const std::vector<double>& values() const { return values_; }
  const std::string& provider_id() const { return provider_id_; }
  const std::string& model_id() const { return model_id_; }
  std::size_t dimension() const { return values_.size(); }

 private:
  std::vector<double> values_;
  std::string provider_id_;
  std::string model_id_;
};

/// Inner product; throws on provider/model/dimension mismatch. With vectors
/// unit-normalized this is cosine similarity.
double dot(const EmbeddingVector& u, const EmbeddingVector& v);

/// d_cos(u, v) = 1 - <u, v>, in [0, 2].
double cosine_distance(const EmbeddingVector& u, const EmbeddingVector& v);

/// Embedding function contract. `embed` must be a pure function of the input
/// text (deterministic per provider+model), return unit-norm vectors of a
/// fixed dimension, and be safely callable from multiple threads.
class EmbeddingProvider {
 public:
  virtual ~EmbeddingProvider() = default;
  virtual const std::string& provider_id() const = 0;
  virtual const std::string& model_id() const = 0;
  virtual std::size_t dimension() const = 0;
  virtual EmbeddingVector embed(std::string_view text) = 0;
  // Vectors in input order. Default implementation loops over embed.
  virtual std::vector<EmbeddingVector> embed_batch(
      const std::vector<std::string>& texts);
};

/// Deterministic signed hashed bag-of-tokens embedding: each token is FNV-1a
/// hashed (salted by `seed`); the hash picks a coordinate (mod d) and a sign;
/// +/-1 is accumulated per token occurrence and the result l2-normalized.
/// Token order never matters. Text with no tokens maps to the basis vector
/// e0.
EmbeddingVector synthetic_embed(std::string_view text, std::size_t d,
                                std::uint64_t seed,
                                std::string_view provider_id = "synthetic",
                                std::string_view model_id = "");

std::string synthetic_model_id(std::size_t d, std::uint64_t seed);

class SyntheticProvider : public EmbeddingProvider {
 public:
  SyntheticProvider(std::size_t dimension, std::uint64_t seed);

  const std::string& provider_id() const override { return provider_id_; }
  const std::string& model_id() const override { return model_id_; }
  std::size_t dimension() const override { return dimension_; }
  EmbeddingVector embed(std::string_view text) override;

 private:
  std::size_t dimension_;
  std::uint64_t seed_;
  std::string provider_id_ = "synthetic";
  std::string model_id_;
};

/// Append-only JSON-lines store, one record per line:
/// {"provider":…,"model":…,"content_sha256":…,"values":[…]}. A hit returns
/// the stored values verbatim, so cached results are bit-identical to the
/// original computation. Writes are serialized internally.
class EmbeddingCache {
 public:
  explicit EmbeddingCache(std::string path);

  std::optional<std::vector<double>> lookup(const std::string& provider_id,
                                            const std::string& model_id,
                                            const std::string& content_sha);
  void store(const std::string& provider_id, const std::string& model_id,
             const std::string& content_sha,
             const std::vector<double>& values);

  std::size_t hits() const;
  std::size_t misses() const;
  const std::string& path() const { return path_; }

 private:
  std::string key(const std::string& provider_id, const std::string& model_id,
                  const std::string& content_sha) const;

  std::string path_;
  mutable std::mutex mu_;
  std::map<std::string, std::vector<double>> entries_;
  std::size_t hits_ = 0;
  std::size_t misses_ = 0;
};

/// Wraps any provider with a persistent cache keyed by
/// (provider_id, model_id, sha256(text)).
class CachingProvider : public EmbeddingProvider {
 public:
  CachingProvider(std::shared_ptr<EmbeddingProvider> inner,
                  std::shared_ptr<EmbeddingCache> cache);

  const std::string& provider_id() const override {
    return inner_->provider_id();
  }
  const std::string& model_id() const override { return inner_->model_id(); }
  std::size_t dimension() const override { return inner_->dimension(); }
  EmbeddingVector embed(std::string_view text) override;
  std::vector<EmbeddingVector> embed_batch(
      const std::vector<std::string>& texts) override;

 private:
  std::shared_ptr<EmbeddingProvider> inner_;
  std::shared_ptr<EmbeddingCache> cache_;
};

struct RemoteProviderConfig {
  std::string base_url;          // e.g. http://host:port/v1/embeddings
  std::string model_id;
  std::size_t dimension = 0;
  std::string api_key_env = "TOOLFLOOD_API_KEY";
  std::size_t parallelism = 4;   // bounded in-flight requests
  std::size_t max_retries = 3;
  std::size_t batch_size = 64;   // texts per request
  int timeout_seconds = 60;
};

/// Client for a generic embedding endpoint: POST {"model", "input": [...]}
/// returning {"data": [{"embedding": [...]}]}. Batches are split into
/// requests of `batch_size`, issued by at most `parallelism` workers, and
/// retried per chunk; results come back in input order. A response vector of
/// the wrong dimension is an error.
class RemoteEmbeddingProvider : public EmbeddingProvider {
 public:
  explicit RemoteEmbeddingProvider(RemoteProviderConfig config);

  const std::string& provider_id() const override { return provider_id_; }
  const std::string& model_id() const override { return config_.model_id; }
  std::size_t dimension() const override { return config_.dimension; }
  EmbeddingVector embed(std::string_view text) override;
  std::vector<EmbeddingVector> embed_batch(
      const std::vector<std::string>& texts) override;

 private:
  std::vector<std::vector<double>> request_chunk(
      const std::vector<std::string>& texts);

  RemoteProviderConfig config_;
  std::string provider_id_ = "remote";
};

}  // namespace toolflood
