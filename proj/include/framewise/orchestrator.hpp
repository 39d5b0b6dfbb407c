#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "framewise/chat.hpp"
#include "framewise/embedding.hpp"
#include "framewise/frame_store.hpp"
#include "framewise/protocol.hpp"
#include "framewise/qa.hpp"
#include "framewise/sampling.hpp"

namespace framewise {

struct OrchestratorConfig {
  std::int64_t n_initial = 16;
  std::int64_t max_rounds = 5;
  std::int64_t clip_n = kDefaultClipFrames;
  std::int64_t uniform_n = kDefaultUniformFrames;
  std::optional<std::int64_t> frame_budget;

  // Throws Error when an invariant is violated.
  void validate() const;

  bool operator==(const OrchestratorConfig&) const = default;
};

enum class ToolStatus {
  executed,
  duplicate,          // repeats an executed call
  invalid_range,      // end beyond the video
  invalid_segment,    // clip range not longer than clip_n
  over_budget,        // would exceed frame_budget
  over_round_limit,   // issued after max_rounds; triggers the forced-answer turn
  agent_failed,       // embedding backend error; ends the episode
};

std::string_view to_string(ToolStatus s);

struct ToolResultSummary {
  ToolStatus status = ToolStatus::executed;
  std::vector<FrameIndex> indices;
  std::vector<double> scores;  // clip_sample only, aligned with indices
  std::string message;

  bool operator==(const ToolResultSummary&) const = default;
};

struct TurnRecord {
  std::string raw_output;
  std::optional<ParsedTurn> parsed;
  std::optional<ParseError> parse_error;
  std::optional<ToolResultSummary> tool_result;
};

enum class Terminal { answered, exhausted_rounds, parse_failed, backend_failed };

std::string_view to_string(Terminal t);

struct VideoInfo {
  std::string id;
  FrameIndex total_frames = 0;
  double fps = 0.0;
};

struct Trajectory {
  std::string item_id;
  std::string question;  // prompt text sent to the model
  VideoInfo video;
  OrchestratorConfig config;
  std::vector<FrameIndex> initial_indices;
  std::vector<TurnRecord> turns;
  std::vector<ToolCall> executed_calls;
  std::int64_t frames_delivered = 0;
  std::optional<std::string> final_answer;
  Terminal terminal = Terminal::exhausted_rounds;
  std::string failure;  // backend error text when terminal == backend_failed

  bool used_agent() const { return !executed_calls.empty(); }
  std::vector<std::string> raw_outputs() const;
};

nlohmann::json to_json(const Trajectory& t);
// Throws CorruptRecord on missing or mistyped fields.
Trajectory trajectory_from_json(const nlohmann::json& j);

// Single-line JSON record as persisted in trajectory JSONL files.
std::string to_record(const Trajectory& t);

// Source of frames and tool results for an episode. The live implementation
// reads the video and runs the sampling agents; replay serves the log.
class AgentExecutor {
 public:
  virtual ~AgentExecutor() = default;
  virtual std::vector<Frame> fetch(std::span<const FrameIndex> indices) = 0;
  // Throws InvalidSegment for too-short clip ranges and BackendError when
  // the embedding backend fails.
  virtual SampleResult execute(const ToolCall& call, const OrchestratorConfig& config) = 0;
};

class VideoAgentExecutor final : public AgentExecutor {
 public:
  VideoAgentExecutor(VideoRef video, EmbeddingBackend& embedder, EmbeddingCache* cache = nullptr)
      : video_(std::move(video)), embedder_(embedder), cache_(cache) {}

  std::vector<Frame> fetch(std::span<const FrameIndex> indices) override;
  SampleResult execute(const ToolCall& call, const OrchestratorConfig& config) override;

 private:
  VideoRef video_;
  EmbeddingBackend& embedder_;
  EmbeddingCache* cache_;
};

// The iterative loop over an explicit executor.
Trajectory run_episode(const std::string& item_id, const std::string& question,
                       const VideoInfo& video, ChatBackend& backend, AgentExecutor& agents,
                       const OrchestratorConfig& config);

Trajectory run_episode(const QAItem& item, const VideoRef& video, ChatBackend& backend,
                       EmbeddingBackend& embedder, const OrchestratorConfig& config,
                       EmbeddingCache* cache = nullptr);

// Re-runs the loop from a persisted record with the logged model outputs
// and tool results; throws CorruptRecord if the record is malformed or the
// re-run does not reproduce it exactly.
Trajectory replay_episode(std::string_view record);
Trajectory replay_episode(const nlohmann::json& record);
inline Trajectory replay_episode(const std::string& record) {
  return replay_episode(std::string_view(record));
}
inline Trajectory replay_episode(const char* record) {
  return replay_episode(std::string_view(record));
}

}  // namespace framewise
