#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace framewise {

using FrameIndex = std::int64_t;

struct Frame {
  FrameIndex index = 0;
  std::string payload;     // encoded image bytes
  std::string media_type;  // e.g. "image/jpeg"
};

// Handle to an indexed frame sequence. Cheap to copy; immutable after open.
struct VideoRef {
  std::string id;
  FrameIndex total_frames = 0;
  double fps = 0.0;
  std::string source;  // frame directory or "scheme://..." adapter locator
};

// Plugin interface for non-directory sources. A decoder is selected by the
// scheme prefix of the locator ("scheme://rest").
class FrameDecoder {
 public:
  virtual ~FrameDecoder() = default;
  virtual VideoRef probe(const std::string& locator) = 0;
  virtual Frame read(const VideoRef& video, FrameIndex index) = 0;
};

// Registering the same scheme twice replaces the previous adapter.
void register_decoder(const std::string& scheme, std::shared_ptr<FrameDecoder> decoder);

// Opens either a frame directory (`frames/%08d.jpg|png` plus `meta.json`)
// or a registered adapter locator. The built-in `synthetic://N@FPS` adapter
// yields N deterministic placeholder frames and is used by tests and demos.
VideoRef open_video(const std::string& locator);

// Frames come back in request order; repeated indices are allowed.
std::vector<Frame> get_frames(const VideoRef& video, std::span<const FrameIndex> indices);

/// Bin-center sampling of `n` indices over [start, end):
/// idx_i = floor(start + (i + 0.5) * (end - start) / n), deduplicated in order.
/// Narrow intervals (end - start < n) return fewer, still distinct, indices.
std::vector<FrameIndex> uniform_indices(FrameIndex start, FrameIndex end, std::int64_t n);

}  // namespace framewise
