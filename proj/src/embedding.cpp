#include "framewise/embedding.hpp"

#include <cmath>
#include <functional>

#include "framewise/error.hpp"

namespace framewise {

namespace {

std::uint64_t fnv1a(std::string_view bytes, std::uint64_t h = 0xcbf29ce484222325ULL) {
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace

Embedding HashEmbedder::from_bytes(std::string_view tag, std::string_view bytes) const {
  std::uint64_t state = fnv1a(bytes, fnv1a(tag) ^ seed_);
  Embedding v(dim_);
  for (auto& x : v) {
    // 53 random bits mapped to [-1, 1).
    x = static_cast<double>(splitmix64(state) >> 11) * 0x1.0p-52 - 1.0;
  }
  return v;
}

Embedding HashEmbedder::embed_text(const std::string& text) { return from_bytes("text", text); }

std::vector<Embedding> HashEmbedder::embed_images(std::span<const Frame> frames) {
  std::vector<Embedding> out;
  out.reserve(frames.size());
  for (const auto& f : frames) out.push_back(from_bytes("image", f.payload));
  return out;
}

double dot(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw Error("dot: dimension mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

Embedding l2_normalized(std::span<const double> v, std::size_t expected_dim) {
  if (expected_dim != 0 && v.size() != expected_dim) {
    throw BackendError("embedding has dimension " + std::to_string(v.size()) + ", expected " +
                       std::to_string(expected_dim));
  }
  if (v.empty()) throw BackendError("empty embedding");
  double norm2 = 0.0;
  for (double x : v) {
    if (!std::isfinite(x)) throw BackendError("embedding contains non-finite entries");
    norm2 += x * x;
  }
  const double norm = std::sqrt(norm2);
  if (!(norm > 0.0)) throw BackendError("zero-norm embedding");
  Embedding out(v.begin(), v.end());
  for (auto& x : out) x /= norm;
  return out;
}

std::size_t EmbeddingCache::KeyHash::operator()(const Key& k) const noexcept {
  return std::hash<std::string>{}(k.video) ^ (std::hash<FrameIndex>{}(k.index) * 0x9e3779b97f4a7c15ULL);
}

std::optional<Embedding> EmbeddingCache::find(const std::string& video_id, FrameIndex index) const {
  std::lock_guard lock(mu_);
  auto it = map_.find(Key{video_id, index});
  if (it == map_.end()) return std::nullopt;
  return it->second;
}

void EmbeddingCache::insert(const std::string& video_id, FrameIndex index, Embedding e) {
  std::lock_guard lock(mu_);
  map_.insert_or_assign(Key{video_id, index}, std::move(e));
}

std::size_t EmbeddingCache::size() const {
  std::lock_guard lock(mu_);
  return map_.size();
}

}  // namespace framewise
