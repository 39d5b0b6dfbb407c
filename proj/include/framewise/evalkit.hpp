#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "framewise/chat.hpp"
#include "framewise/embedding.hpp"
#include "framewise/orchestrator.hpp"
#include "framewise/qa.hpp"
#include "framewise/reward.hpp"

namespace framewise {

struct ReportCounts {
  std::size_t total = 0;
  std::size_t correct = 0;
  std::size_t failed = 0;  // episodes that did not finish normally, plus setup errors
  std::map<std::string, std::size_t> terminals;

  bool operator==(const ReportCounts&) const = default;
};

struct Report {
  std::string name = "framewise";
  double accuracy = 0.0;    // percent over all items; failures count as wrong
  double avg_frames = 0.0;  // mean frames_delivered over items that produced a trajectory
  std::map<std::string, double> per_category;  // question_category -> accuracy percent
  ReportCounts counts;

  bool operator==(const Report&) const = default;
};

nlohmann::json to_json(const Report& r);
Report report_from_json(const nlohmann::json& j);

struct ItemResult {
  std::string item_id;
  std::optional<Trajectory> trajectory;
  double score = 0.0;
  bool correct = false;
  std::string failure;  // empty when the episode finished and was graded
};

// Pure aggregation; `results` must align with `items`.
Report compute_report(const std::vector<QAItem>& items, const std::vector<ItemResult>& results,
                      std::string name = "framewise");

struct BenchmarkOptions {
  OrchestratorConfig config;
  RewardOptions reward;
  std::size_t parallelism = 1;
  std::string name = "framewise";
};

struct BenchmarkRun {
  Report report;
  std::vector<ItemResult> results;  // input order
};

// Per-item failures are recorded in the results, never thrown.
BenchmarkRun run_benchmark(const std::vector<QAItem>& items, ChatBackend& chat,
                           EmbeddingBackend& embedder, JudgeBackend* judge,
                           const BenchmarkOptions& options = {});

enum class ReportFormat { json, markdown };

// Markdown emits an Acc/Frame table, a delta row when `baseline` is given,
// and a per-category table when categories are present.
std::string emit_report(const Report& report, ReportFormat format,
                        const Report* baseline = nullptr);

// Settings shared by the CLI subcommands, loaded from a JSON object.
struct RunConfig {
  OrchestratorConfig orchestrator;
  std::size_t parallel = 1;
  std::string chat_endpoint;
  std::string embed_endpoint;
  std::string judge_endpoint;
  std::string chat_model;
  std::string embed_model;
  std::string judge_model;
  std::string api_key;
  double timeout_seconds = 120.0;
  double correct_threshold = kDefaultCorrectThreshold;
};

// Unknown keys are rejected with SchemaError.
RunConfig run_config_from_json(const nlohmann::json& j);
RunConfig load_run_config(const std::string& path);

}  // namespace framewise
