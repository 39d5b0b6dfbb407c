#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "framewise/embedding.hpp"
#include "framewise/frame_store.hpp"

namespace framewise {

inline constexpr std::int64_t kDefaultClipFrames = 4;
inline constexpr std::int64_t kDefaultUniformFrames = 8;

struct ScoredFrame {
  FrameIndex index = 0;
  double score = 0.0;  // cosine similarity in [-1, 1]
};

struct SampleResult {
  std::vector<Frame> frames;         // ascending frame index
  std::vector<ScoredFrame> scored;   // same order as frames; empty for uniform sampling
};

// Number of retrieval candidates for an interval of `length` frames:
// the whole interval below 128, 128 below 20000, 256 beyond.
std::int64_t candidate_count(std::int64_t length);

// Semantic retrieval over [start, end). Candidates are bin-center samples of
// the interval; the top `n` by cosine similarity to the prompt are returned,
// ties going to the lower frame index. Throws InvalidSegment when
// end - start <= n. Pass a cache to reuse image embeddings across calls.
SampleResult clip_sample(const VideoRef& video, FrameIndex start, FrameIndex end, std::int64_t n,
                         const std::string& prompt, EmbeddingBackend& embedder,
                         EmbeddingCache* cache = nullptr);

// Temporally dense sampling: frames at uniform_indices(start, end, n).
SampleResult uniform_sample_exec(const VideoRef& video, FrameIndex start, FrameIndex end,
                                 std::int64_t n = kDefaultUniformFrames);

}  // namespace framewise
