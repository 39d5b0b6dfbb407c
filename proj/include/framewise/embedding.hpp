#pragma once

#include <cstddef>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "framewise/frame_store.hpp"

namespace framewise {

using Embedding = std::vector<double>;

// Text/image embedding model contract. Implementations must be safe to call
// from several threads and deterministic for identical inputs.
class EmbeddingBackend {
 public:
  virtual ~EmbeddingBackend() = default;
  virtual Embedding embed_text(const std::string& text) = 0;
  virtual std::vector<Embedding> embed_images(std::span<const Frame> frames) = 0;
  virtual std::size_t dim() const = 0;
};

// Deterministic pseudo-embedder keyed on a hash of the input bytes. Text and
// image spaces share the same generator so scores are spread over [-1, 1].
class HashEmbedder final : public EmbeddingBackend {
 public:
  explicit HashEmbedder(std::size_t dim = 32, std::uint64_t seed = 0) : dim_(dim), seed_(seed) {}

  Embedding embed_text(const std::string& text) override;
  std::vector<Embedding> embed_images(std::span<const Frame> frames) override;
  std::size_t dim() const override { return dim_; }

 private:
  Embedding from_bytes(std::string_view tag, std::string_view bytes) const;

  std::size_t dim_;
  std::uint64_t seed_;
};

// Returns a unit-length copy; throws on zero norm, non-finite entries, or a
// dimension different from `expected_dim` (when non-zero).
Embedding l2_normalized(std::span<const double> v, std::size_t expected_dim = 0);

double dot(std::span<const double> a, std::span<const double> b);

// Image embeddings memoized per (video id, frame index). Safe for concurrent
// lookups and insertions.
class EmbeddingCache {
 public:
  std::optional<Embedding> find(const std::string& video_id, FrameIndex index) const;
  void insert(const std::string& video_id, FrameIndex index, Embedding e);
  std::size_t size() const;

 private:
  struct Key {
    std::string video;
    FrameIndex index;
    bool operator==(const Key&) const = default;
  };
  struct KeyHash {
    std::size_t operator()(const Key& k) const noexcept;
  };

  mutable std::mutex mu_;
  std::unordered_map<Key, Embedding, KeyHash> map_;
};

}  // namespace framewise
