#include "framewise/sampling.hpp"

#include <algorithm>
#include <cctype>

#include "framewise/error.hpp"

namespace framewise {

namespace {

void check_range(const VideoRef& video, FrameIndex start, FrameIndex end) {
  if (start < 0 || end > video.total_frames || start >= end) {
    throw Error("invalid range [" + std::to_string(start) + ", " + std::to_string(end) +
                ") for video with " + std::to_string(video.total_frames) + " frames");
  }
}

bool blank(const std::string& s) {
  return std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isspace(c); });
}

}  // namespace

std::int64_t candidate_count(std::int64_t length) {
  if (length < 128) return length;
  if (length < 20000) return 128;
  return 256;
}

SampleResult clip_sample(const VideoRef& video, FrameIndex start, FrameIndex end, std::int64_t n,
                         const std::string& prompt, EmbeddingBackend& embedder,
                         EmbeddingCache* cache) {
  if (n < 1) throw Error("clip_sample: n must be positive");
  check_range(video, start, end);
  const std::int64_t length = end - start;
  if (length <= n) throw InvalidSegment();
  if (blank(prompt)) throw Error("clip_sample: prompt must be non-empty");

  const auto candidates = uniform_indices(start, end, candidate_count(length));
  const auto text = l2_normalized(embedder.embed_text(prompt), embedder.dim());

  std::vector<Embedding> image(candidates.size());
  std::vector<FrameIndex> missing;
  std::vector<std::size_t> missing_slot;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    if (cache) {
      if (auto hit = cache->find(video.id, candidates[i])) {
        image[i] = std::move(*hit);
        continue;
      }
    }
    missing.push_back(candidates[i]);
    missing_slot.push_back(i);
  }
  if (!missing.empty()) {
    const auto frames = get_frames(video, missing);
    auto raw = embedder.embed_images(frames);
    if (raw.size() != frames.size()) {
      throw BackendError("embedding backend returned " + std::to_string(raw.size()) +
                         " vectors for " + std::to_string(frames.size()) + " images");
    }
    for (std::size_t k = 0; k < raw.size(); ++k) {
      auto unit = l2_normalized(raw[k], embedder.dim());
      if (cache) cache->insert(video.id, missing[k], unit);
      image[missing_slot[k]] = std::move(unit);
    }
  }

  std::vector<ScoredFrame> scored(candidates.size());
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    scored[i] = ScoredFrame{candidates[i], std::clamp(dot(text, image[i]), -1.0, 1.0)};
  }
  // Candidates are already ascending, so a stable sort on score alone keeps
  // the lower index first among ties.
  std::stable_sort(scored.begin(), scored.end(),
                   [](const ScoredFrame& a, const ScoredFrame& b) { return a.score > b.score; });
  scored.resize(std::min(scored.size(), static_cast<std::size_t>(n)));
  std::sort(scored.begin(), scored.end(),
            [](const ScoredFrame& a, const ScoredFrame& b) { return a.index < b.index; });

  std::vector<FrameIndex> chosen;
  chosen.reserve(scored.size());
  for (const auto& s : scored) chosen.push_back(s.index);
  return SampleResult{get_frames(video, chosen), std::move(scored)};
}

SampleResult uniform_sample_exec(const VideoRef& video, FrameIndex start, FrameIndex end,
                                 std::int64_t n) {
  if (n < 1) throw Error("uniform_sample: n must be positive");
  check_range(video, start, end);
  const auto indices = uniform_indices(start, end, n);
  return SampleResult{get_frames(video, indices), {}};
}

}  // namespace framewise
