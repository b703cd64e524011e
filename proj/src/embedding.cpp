#include "toolflood/embedding.hpp"

#include <atomic>
#include <cmath>
#include <fstream>
#include <stdexcept>
#include <thread>

#include <nlohmann/json.hpp>

#include "toolflood/errors.hpp"
#include "toolflood/http.hpp"
#include "toolflood/log.hpp"
#include "toolflood/rng.hpp"
#include "toolflood/textutil.hpp"

namespace toolflood {

namespace {

double l2_norm(const std::vector<double>& values) {
  double sum = 0.0;
  for (double v : values) sum += v * v;
  return std::sqrt(sum);
}

}  // namespace

EmbeddingVector::EmbeddingVector(std::vector<double> values,
                                 std::string provider_id, std::string model_id)
    : values_(std::move(values)),
      provider_id_(std::move(provider_id)),
      model_id_(std::move(model_id)) {
  if (values_.empty()) {
    throw std::invalid_argument("embedding vector must not be empty");
  }
  const double norm = l2_norm(values_);
  if (std::abs(norm - 1.0) > 1e-6) {
    throw std::invalid_argument("embedding vector norm " +
                                format_double(norm) + " is not unit");
  }
}

EmbeddingVector EmbeddingVector::normalized(std::vector<double> raw,
                                            std::string provider_id,
                                            std::string model_id) {
  const double norm = l2_norm(raw);
  if (!(norm > 0.0) || !std::isfinite(norm)) {
    throw std::invalid_argument("cannot normalize zero or non-finite vector");
  }
  for (double& v : raw) v /= norm;
  return EmbeddingVector(std::move(raw), std::move(provider_id),
                         std::move(model_id));
}

double dot(const EmbeddingVector& u, const EmbeddingVector& v) {
  if (u.provider_id() != v.provider_id() || u.model_id() != v.model_id()) {
    throw std::invalid_argument(
        "embedding provider/model mismatch: " + u.provider_id() + "/" +
        u.model_id() + " vs " + v.provider_id() + "/" + v.model_id());
  }
  if (u.dimension() != v.dimension()) {
    throw std::invalid_argument("embedding dimension mismatch");
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < u.dimension(); ++i) {
    sum += u.values()[i] * v.values()[i];
  }
  return sum;
}

double cosine_distance(const EmbeddingVector& u, const EmbeddingVector& v) {
  return 1.0 - dot(u, v);
}

std::string synthetic_model_id(std::size_t d, std::uint64_t seed) {
  return "bag-fnv1a-d" + std::to_string(d) + "-s" + std::to_string(seed);
}

EmbeddingVector synthetic_embed(std::string_view text, std::size_t d,
                                std::uint64_t seed,
                                std::string_view provider_id,
                                std::string_view model_id) {
  if (d < 8) throw std::invalid_argument("synthetic dimension must be >= 8");
  std::string model(model_id);
  if (model.empty()) model = synthetic_model_id(d, seed);

  std::vector<double> acc(d, 0.0);
  bool any = false;
  for (const std::string& token : tokenize(text)) {
    // Seed-salted FNV-1a: low bits pick the coordinate, the top bit the sign.
    const std::uint64_t h = fnv1a64(token, fnv1a64_mix(seed, kFnvOffsetBasis));
    const std::size_t index = static_cast<std::size_t>(h % d);
    const double sign = (h >> 63) ? -1.0 : 1.0;
    acc[index] += sign;
    any = true;
  }
  double norm = l2_norm(acc);
  if (!any || norm == 0.0) {
    // Tokenless text, or tokens that cancelled exactly: fixed fallback e0.
    std::fill(acc.begin(), acc.end(), 0.0);
    acc[0] = 1.0;
    return EmbeddingVector(std::move(acc), std::string(provider_id),
                           std::move(model));
  }
  return EmbeddingVector::normalized(std::move(acc), std::string(provider_id),
                                     std::move(model));
}

std::vector<EmbeddingVector> EmbeddingProvider::embed_batch(
    const std::vector<std::string>& texts) {
  std::vector<EmbeddingVector> out;
  out.reserve(texts.size());
  for (const std::string& text : texts) out.push_back(embed(text));
  return out;
}

SyntheticProvider::SyntheticProvider(std::size_t dimension, std::uint64_t seed)
    : dimension_(dimension),
      seed_(seed),
      model_id_(synthetic_model_id(dimension, seed)) {
  if (dimension < 8) {
    throw std::invalid_argument("synthetic dimension must be >= 8");
  }
}

EmbeddingVector SyntheticProvider::embed(std::string_view text) {
  if (text.empty()) throw std::invalid_argument("cannot embed empty text");
  return synthetic_embed(text, dimension_, seed_, provider_id_, model_id_);
}

EmbeddingCache::EmbeddingCache(std::string path) : path_(std::move(path)) {
  std::ifstream in(path_);
  if (!in) return;  // fresh cache
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      nlohmann::json record = nlohmann::json::parse(line);
      entries_[key(record.at("provider"), record.at("model"),
                   record.at("content_sha256"))] =
          record.at("values").get<std::vector<double>>();
    } catch (const nlohmann::json::exception& e) {
      log_warn("cache " + path_ + " line " + std::to_string(lineno) +
               " skipped: " + e.what());
    }
  }
}

std::string EmbeddingCache::key(const std::string& provider_id,
                                const std::string& model_id,
                                const std::string& content_sha) const {
  return provider_id + "\x1f" + model_id + "\x1f" + content_sha;
}

std::optional<std::vector<double>> EmbeddingCache::lookup(
    const std::string& provider_id, const std::string& model_id,
    const std::string& content_sha) {
  std::lock_guard<std::mutex> lock(mu_);
  auto it = entries_.find(key(provider_id, model_id, content_sha));
  if (it == entries_.end()) {
    ++misses_;
    return std::nullopt;
  }
  ++hits_;
  return it->second;
}

void EmbeddingCache::store(const std::string& provider_id,
                           const std::string& model_id,
                           const std::string& content_sha,
                           const std::vector<double>& values) {
  std::lock_guard<std::mutex> lock(mu_);
  auto [it, inserted] =
      entries_.emplace(key(provider_id, model_id, content_sha), values);
  if (!inserted) return;
  std::ofstream out(path_, std::ios::app);
  if (!out) {
    log_warn("cache " + path_ + " not writable; entry kept in memory only");
    return;
  }
  nlohmann::json record = {{"provider", provider_id},
                           {"model", model_id},
                           {"content_sha256", content_sha},
                           {"values", values}};
  out << record.dump() << "\n";
}

std::size_t EmbeddingCache::hits() const {
  std::lock_guard<std::mutex> lock(mu_);
  return hits_;
}

std::size_t EmbeddingCache::misses() const {
  std::lock_guard<std::mutex> lock(mu_);
  return misses_;
}

CachingProvider::CachingProvider(std::shared_ptr<EmbeddingProvider> inner,
                                 std::shared_ptr<EmbeddingCache> cache)
    : inner_(std::move(inner)), cache_(std::move(cache)) {}

EmbeddingVector CachingProvider::embed(std::string_view text) {
  if (text.empty()) throw std::invalid_argument("cannot embed empty text");
  const std::string sha = sha256_hex(text);
  if (auto hit = cache_->lookup(provider_id(), model_id(), sha)) {
    return EmbeddingVector(std::move(*hit), provider_id(), model_id());
  }
  EmbeddingVector vec = inner_->embed(text);
  cache_->store(provider_id(), model_id(), sha, vec.values());
  return vec;
}

std::vector<EmbeddingVector> CachingProvider::embed_batch(
    const std::vector<std::string>& texts) {
  // Resolve hits up front so the inner provider sees one batch of misses.
  std::vector<std::optional<EmbeddingVector>> out(texts.size());
  std::vector<std::string> missing;
  std::vector<std::size_t> missing_index;
  for (std::size_t i = 0; i < texts.size(); ++i) {
    if (texts[i].empty()) {
      throw std::invalid_argument("cannot embed empty text");
    }
    const std::string sha = sha256_hex(texts[i]);
    if (auto hit = cache_->lookup(provider_id(), model_id(), sha)) {
      out[i] = EmbeddingVector(std::move(*hit), provider_id(), model_id());
    } else {
      missing.push_back(texts[i]);
      missing_index.push_back(i);
    }
  }
  if (!missing.empty()) {
    std::vector<EmbeddingVector> fresh = inner_->embed_batch(missing);
    for (std::size_t j = 0; j < fresh.size(); ++j) {
      cache_->store(provider_id(), model_id(), sha256_hex(missing[j]),
                    fresh[j].values());
      out[missing_index[j]] = std::move(fresh[j]);
    }
  }
  std::vector<EmbeddingVector> result;
  result.reserve(out.size());
  for (auto& v : out) result.push_back(std::move(*v));
  return result;
}

RemoteEmbeddingProvider::RemoteEmbeddingProvider(RemoteProviderConfig config)
    : config_(std::move(config)) {
  if (config_.base_url.empty()) {
    throw ConfigError("remote embedding provider requires a base URL");
  }
  if (config_.dimension == 0) {
    throw ConfigError("remote embedding provider requires a dimension");
  }
  if (config_.parallelism == 0) config_.parallelism = 1;
  if (config_.batch_size == 0) config_.batch_size = 1;
}

std::vector<std::vector<double>> RemoteEmbeddingProvider::request_chunk(
    const std::vector<std::string>& texts) {
  HttpRequestConfig http;
  http.url = config_.base_url;
  http.bearer_token = env_or_empty(config_.api_key_env);
  http.max_retries = config_.max_retries;
  http.timeout_seconds = config_.timeout_seconds;
  nlohmann::json body = {{"model", config_.model_id}, {"input", texts}};
  nlohmann::json reply = http_post_json(http, body);

  if (!reply.contains("data") || !reply["data"].is_array() ||
      reply["data"].size() != texts.size()) {
    throw RemoteError("embedding reply shape mismatch: expected " +
                      std::to_string(texts.size()) + " rows");
  }
  std::vector<std::vector<double>> rows;
  rows.reserve(texts.size());
  for (const auto& item : reply["data"]) {
    auto values = item.at("embedding").get<std::vector<double>>();
    if (values.size() != config_.dimension) {
      throw RemoteError("embedding dimension mismatch: got " +
                        std::to_string(values.size()) + ", declared " +
                        std::to_string(config_.dimension));
    }
    rows.push_back(std::move(values));
  }
  return rows;
}

EmbeddingVector RemoteEmbeddingProvider::embed(std::string_view text) {
  if (text.empty()) throw std::invalid_argument("cannot embed empty text");
  auto rows = request_chunk({std::string(text)});
  return EmbeddingVector::normalized(std::move(rows[0]), provider_id_,
                                     config_.model_id);
}

std::vector<EmbeddingVector> RemoteEmbeddingProvider::embed_batch(
    const std::vector<std::string>& texts) {
  for (const std::string& t : texts) {
    if (t.empty()) throw std::invalid_argument("cannot embed empty text");
  }
  // Chunk the batch; a bounded worker pool keeps at most `parallelism`
  // requests in flight. Results are written by chunk index, so the output
  // order matches the input regardless of completion order.
  std::vector<std::vector<std::string>> chunks;
  for (std::size_t start = 0; start < texts.size();
       start += config_.batch_size) {
    const std::size_t end =
        std::min(texts.size(), start + config_.batch_size);
    chunks.emplace_back(texts.begin() + static_cast<std::ptrdiff_t>(start),
                        texts.begin() + static_cast<std::ptrdiff_t>(end));
  }
  std::vector<std::vector<std::vector<double>>> chunk_rows(chunks.size());
  std::vector<std::exception_ptr> failures(chunks.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= chunks.size()) return;
      try {
        chunk_rows[i] = request_chunk(chunks[i]);
      } catch (...) {
        failures[i] = std::current_exception();
      }
    }
  };
  const std::size_t n_workers =
      std::min(config_.parallelism, std::max<std::size_t>(chunks.size(), 1));
  std::vector<std::thread> pool;
  for (std::size_t i = 0; i < n_workers; ++i) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  for (const auto& failure : failures) {
    if (failure) std::rethrow_exception(failure);
  }

  std::vector<EmbeddingVector> out;
  out.reserve(texts.size());
  for (auto& rows : chunk_rows) {
    for (auto& row : rows) {
      out.push_back(EmbeddingVector::normalized(std::move(row), provider_id_,
                                                config_.model_id));
    }
  }
  return out;
}

}  // namespace toolflood
