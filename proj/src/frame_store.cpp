#include "framewise/frame_store.hpp"

#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "framewise/error.hpp"

namespace framewise {

namespace fs = std::filesystem;

namespace {

constexpr std::string_view kSchemeSep = "://";

class SyntheticDecoder final : public FrameDecoder {
 public:
  VideoRef probe(const std::string& locator) override {
    // synthetic://<total_frames>@<fps>
    const auto body = locator.substr(locator.find(kSchemeSep) + kSchemeSep.size());
    const auto at = body.find('@');
    if (at == std::string::npos) {
      throw FrameStoreError("synthetic locator must look like synthetic://N@FPS: " + locator);
    }
    VideoRef ref;
    ref.id = locator;
    ref.source = locator;
    const auto count = body.substr(0, at);
    const auto rate = body.substr(at + 1);
    auto [p, ec] = std::from_chars(count.data(), count.data() + count.size(), ref.total_frames);
    if (ec != std::errc{} || p != count.data() + count.size()) {
      throw FrameStoreError("bad frame count in locator: " + locator);
    }
    try {
      std::size_t used = 0;
      ref.fps = std::stod(rate, &used);
      if (used != rate.size()) throw std::invalid_argument(rate);
    } catch (const std::exception&) {
      throw FrameStoreError("bad fps in locator: " + locator);
    }
    if (ref.total_frames < 1) throw FrameStoreError("zero frames");
    if (!(ref.fps > 0.0)) throw FrameStoreError("fps must be positive: " + locator);
    return ref;
  }

  Frame read(const VideoRef& video, FrameIndex index) override {
    return Frame{index, video.id + "#" + std::to_string(index), "image/x-synthetic"};
  }
};

struct Registry {
  std::mutex mu;
  std::map<std::string, std::shared_ptr<FrameDecoder>, std::less<>> decoders;

  Registry() { decoders["synthetic"] = std::make_shared<SyntheticDecoder>(); }

  std::shared_ptr<FrameDecoder> find(std::string_view scheme) {
    std::lock_guard lock(mu);
    auto it = decoders.find(scheme);
    return it == decoders.end() ? nullptr : it->second;
  }
};

Registry& registry() {
  static Registry r;
  return r;
}

std::string_view scheme_of(std::string_view locator) {
  const auto pos = locator.find(kSchemeSep);
  if (pos == std::string_view::npos) return {};
  return locator.substr(0, pos);
}

std::string media_type_for(const fs::path& ext) {
  if (ext == ".png") return "image/png";
  return "image/jpeg";
}

fs::path frame_path(const VideoRef& video, FrameIndex index) {
  char name[32];
  std::snprintf(name, sizeof(name), "%08lld", static_cast<long long>(index));
  const fs::path dir = fs::path(video.source) / "frames";
  for (const char* ext : {".jpg", ".png"}) {
    auto p = dir / (std::string(name) + ext);
    if (fs::exists(p)) return p;
  }
  throw FrameStoreError("frame file missing for index " + std::to_string(index) + " in " +
                        video.source);
}

VideoRef open_directory(const std::string& locator) {
  std::error_code ec;
  const fs::path root(locator);
  if (!fs::is_directory(root, ec)) throw FrameStoreError("unreadable source: " + locator);

  const fs::path frames_dir = root / "frames";
  std::set<FrameIndex> indices;
  if (fs::is_directory(frames_dir, ec)) {
    for (const auto& entry : fs::directory_iterator(frames_dir, ec)) {
      if (!entry.is_regular_file()) continue;
      const auto ext = entry.path().extension();
      if (ext != ".jpg" && ext != ".png") continue;
      const auto stem = entry.path().stem().string();
      FrameIndex idx = 0;
      auto [p, perr] = std::from_chars(stem.data(), stem.data() + stem.size(), idx);
      if (perr != std::errc{} || p != stem.data() + stem.size() || stem.size() != 8) {
        throw FrameStoreError("frame file is not named by zero-padded index: " +
                              entry.path().string());
      }
      if (!indices.insert(idx).second) {
        throw FrameStoreError("duplicate frame index " + stem + " in " + locator);
      }
    }
    if (ec) throw FrameStoreError("unreadable source: " + locator);
  }
  if (indices.empty()) throw FrameStoreError("zero frames");
  const auto count = static_cast<FrameIndex>(indices.size());
  if (*indices.begin() != 0 || *indices.rbegin() != count - 1) {
    throw FrameStoreError("non-contiguous frame indices in " + locator);
  }

  const fs::path meta_path = root / "meta.json";
  std::ifstream in(meta_path);
  if (!in) throw FrameStoreError("missing metadata: " + meta_path.string());
  nlohmann::json meta;
  try {
    in >> meta;
  } catch (const nlohmann::json::exception& e) {
    throw FrameStoreError("unreadable metadata " + meta_path.string() + ": " + e.what());
  }
  if (!meta.is_object() || !meta.contains("fps") || !meta["fps"].is_number()) {
    throw FrameStoreError("missing metadata: fps in " + meta_path.string());
  }

  VideoRef ref;
  ref.id = root.filename().empty() ? root.parent_path().filename().string()
                                   : root.filename().string();
  ref.source = locator;
  ref.fps = meta["fps"].get<double>();
  ref.total_frames = count;
  if (meta.contains("total_frames")) {
    if (!meta["total_frames"].is_number_integer()) {
      throw FrameStoreError("total_frames must be an integer in " + meta_path.string());
    }
    if (meta["total_frames"].get<FrameIndex>() != count) {
      throw FrameStoreError("metadata total_frames disagrees with frame files in " + locator);
    }
  }
  if (meta.contains("id") && meta["id"].is_string()) ref.id = meta["id"].get<std::string>();
  if (!(ref.fps > 0.0)) throw FrameStoreError("fps must be positive in " + meta_path.string());
  return ref;
}

}  // namespace

void register_decoder(const std::string& scheme, std::shared_ptr<FrameDecoder> decoder) {
  auto& r = registry();
  std::lock_guard lock(r.mu);
  r.decoders[scheme] = std::move(decoder);
}

VideoRef open_video(const std::string& locator) {
  if (const auto scheme = scheme_of(locator); !scheme.empty()) {
    auto decoder = registry().find(scheme);
    if (!decoder) throw FrameStoreError("no decoder registered for scheme: " + std::string(scheme));
    return decoder->probe(locator);
  }
  return open_directory(locator);
}

std::vector<Frame> get_frames(const VideoRef& video, std::span<const FrameIndex> indices) {
  for (auto idx : indices) {
    if (idx < 0 || idx >= video.total_frames) {
      throw FrameStoreError("frame index " + std::to_string(idx) + " out of range [0, " +
                            std::to_string(video.total_frames) + ")");
    }
  }

  std::vector<Frame> out;
  out.reserve(indices.size());
  if (const auto scheme = scheme_of(video.source); !scheme.empty()) {
    auto decoder = registry().find(scheme);
    if (!decoder) throw FrameStoreError("no decoder registered for scheme: " + std::string(scheme));
    for (auto idx : indices) out.push_back(decoder->read(video, idx));
    return out;
  }

  for (auto idx : indices) {
    const auto path = frame_path(video, idx);
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FrameStoreError("unreadable frame file: " + path.string());
    std::ostringstream bytes;
    bytes << in.rdbuf();
    out.push_back(Frame{idx, std::move(bytes).str(), media_type_for(path.extension())});
  }
  return out;
}

std::vector<FrameIndex> uniform_indices(FrameIndex start, FrameIndex end, std::int64_t n) {
  if (start < 0) throw Error("uniform_indices: start must be non-negative");
  if (start >= end) throw Error("uniform_indices: start must be less than end");
  if (n < 1) throw Error("uniform_indices: n must be positive");

  // floor(start + (i + 1/2) * L / n) == start + ((2i + 1) * L) / (2n) in exact integers.
  const std::int64_t width = end - start;
  std::vector<FrameIndex> out;
  out.reserve(static_cast<std::size_t>(std::min<std::int64_t>(n, width)));
  for (std::int64_t i = 0; i < n; ++i) {
    const FrameIndex idx = start + ((2 * i + 1) * width) / (2 * n);
    if (out.empty() || out.back() != idx) out.push_back(idx);
  }
  return out;
}

}  // namespace framewise
