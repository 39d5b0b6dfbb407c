#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <span>
#include <string>
#include <unistd.h>
#include <vector>

#include <nlohmann/json.hpp>

#include "framewise/chat.hpp"
#include "framewise/embedding.hpp"
#include "framewise/frame_store.hpp"

namespace framewise::testing {

inline std::string source_path(const std::string& rel) {
  return std::string(FRAMEWISE_SOURCE_DIR) + "/" + rel;
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), {});
}

class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("framewise_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::string str() const { return path_.string(); }

 private:
  std::filesystem::path path_;
};

// Frame directory with `count` fake JPEG payloads; `skip` leaves a gap.
inline void write_frame_dir(const std::filesystem::path& root, int count, double fps,
                            int skip = -1, bool with_meta = true) {
  std::filesystem::create_directories(root / "frames");
  for (int i = 0; i < count; ++i) {
    if (i == skip) continue;
    char name[32];
    std::snprintf(name, sizeof(name), "%08d.jpg", i);
    std::ofstream(root / "frames" / name, std::ios::binary) << "jpeg-bytes-" << i;
  }
  if (with_meta) {
    std::ofstream(root / "meta.json") << nlohmann::json{{"total_frames", count}, {"fps", fps}}.dump();
  }
}

// ---------------------------------------------------------------------------
// Scripted model turns

inline std::string answer_turn(const std::string& answer, const std::string& thought = "Enough.") {
  return "<thinking>" + thought + "</thinking><answer>" + answer + "</answer>";
}

inline std::string uniform_turn(long long start, long long end) {
  return "<thinking>Need denser frames.</thinking><tool_call>{\"name\": \"uniform_sample\", "
         "\"arguments\": {\"start_frame\": " +
         std::to_string(start) + ", \"end_frame\": " + std::to_string(end) + "}}</tool_call>";
}

inline std::string clip_turn(long long start, long long end, const std::string& prompt) {
  return "<thinking>Search for it.</thinking><tool_call>{\"name\": \"clip_sample\", "
         "\"arguments\": {\"start_frame\": " +
         std::to_string(start) + ", \"end_frame\": " + std::to_string(end) +
         ", \"prompt\": \"" + prompt + "\"}}</tool_call>";
}

inline std::size_t assistant_turns(std::span<const Message> messages) {
  return static_cast<std::size_t>(std::count_if(messages.begin(), messages.end(), [](const Message& m) {
    return m.role == Role::assistant;
  }));
}

// Plays `script` in order, then repeats the last entry.
inline FunctionChatBackend scripted(std::vector<std::string> script) {
  return FunctionChatBackend([script = std::move(script)](const std::string&,
                                                          std::span<const Message> msgs) {
    const auto k = std::min(assistant_turns(msgs), script.size() - 1);
    return script[k];
  });
}

// Always calls uniform_sample on a range no earlier call is within +-1 of.
inline FunctionChatBackend always_uniform(long long total_frames) {
  return FunctionChatBackend([total_frames](const std::string&, std::span<const Message> msgs) {
    const auto k = static_cast<long long>(assistant_turns(msgs));
    const long long start = (k * 37) % std::max(1LL, total_frames - 200);
    return uniform_turn(start, start + 100 + 10 * k);
  });
}

// ---------------------------------------------------------------------------
// Independent oracles

// Bin-center index formula evaluated in floating point.
inline std::vector<FrameIndex> oracle_uniform(FrameIndex start, FrameIndex end, long long n) {
  std::vector<FrameIndex> out;
  const double width = static_cast<double>(end - start);
  for (long long i = 0; i < n; ++i) {
    const auto idx = static_cast<FrameIndex>(
        std::floor(static_cast<double>(start) + (static_cast<double>(i) + 0.5) * width /
                                                    static_cast<double>(n)));
    if (std::find(out.begin(), out.end(), idx) == out.end()) out.push_back(idx);
  }
  return out;
}

inline long long oracle_candidate_count(long long length) {
  return length < 128 ? length : (length < 20000 ? 128 : 256);
}

// Exhaustive rescoring of every candidate; returns the selected indices in
// ascending order.
inline std::vector<FrameIndex> oracle_clip(const VideoRef& video, FrameIndex start, FrameIndex end,
                                           long long n, const std::string& prompt,
                                           EmbeddingBackend& embedder) {
  const auto candidates = oracle_uniform(start, end, oracle_candidate_count(end - start));
  const auto t = embedder.embed_text(prompt);
  const auto frames = get_frames(video, candidates);
  const auto images = embedder.embed_images(frames);
  auto norm = [](const std::vector<double>& v) {
    double s = 0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
  };
  std::vector<std::pair<double, FrameIndex>> scored;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    double d = 0;
    for (std::size_t k = 0; k < t.size(); ++k) d += t[k] * images[i][k];
    scored.emplace_back(d / (norm(t) * norm(images[i])), candidates[i]);
  }
  std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
    return a.first != b.first ? a.first > b.first : a.second < b.second;
  });
  std::vector<FrameIndex> out;
  for (long long i = 0; i < n && i < static_cast<long long>(scored.size()); ++i) {
    out.push_back(scored[static_cast<std::size_t>(i)].second);
  }
  std::sort(out.begin(), out.end());
  return out;
}

// Every embedding identical: all cosine scores tie.
class ConstantEmbedder final : public EmbeddingBackend {
 public:
  Embedding embed_text(const std::string&) override { return {1.0, 2.0, 3.0}; }
  std::vector<Embedding> embed_images(std::span<const Frame> frames) override {
    return std::vector<Embedding>(frames.size(), Embedding{2.0, 4.0, 6.0});
  }
  std::size_t dim() const override { return 3; }
};

}  // namespace framewise::testing
