#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "framewise/chat.hpp"
#include "framewise/embedding.hpp"
#include "framewise/orchestrator.hpp"
#include "framewise/qa.hpp"
#include "framewise/reward.hpp"

namespace framewise {

struct ModelOutcome {
  bool correct = false;
  bool used_agent = false;
  std::optional<std::string> trajectory_ref;
};

enum class Label { Direct, Adaptive, Active, Anomaly };

std::string_view to_string(Label l);
std::optional<Category> category_of(Label l);

// Truth table over (base correct) x (teacher correct) x (teacher used agents).
// Base outcomes must come from an agent-free run. Base-correct/teacher-wrong
// is an anomaly whether or not the teacher used the agents.
Label classify(const ModelOutcome& base, const ModelOutcome& teacher);

struct LabeledItem {
  QAItem item;
  std::optional<Label> label;  // nullopt when an episode could not be scored
  std::string unlabeled_reason;
  ModelOutcome base;
  ModelOutcome teacher;
  std::optional<Trajectory> base_trajectory;
  std::optional<Trajectory> teacher_trajectory;
};

struct SplitSummary {
  std::size_t direct = 0;
  std::size_t adaptive = 0;
  std::size_t active = 0;
  std::size_t anomaly = 0;
  std::size_t unlabeled = 0;
  std::vector<std::string> sft_ids;  // Adaptive and Active
  std::vector<std::string> rl_ids;   // Direct, Adaptive and Active

  std::size_t kept() const { return direct + adaptive + active; }
  // "44.9% Direct, 8.1% Adaptive, 47.0% Active" over kept items.
  std::string proportions() const;
};

SplitSummary summarize(const std::vector<LabeledItem>& items);

struct ClassificationResult {
  std::vector<LabeledItem> items;  // input order
  SplitSummary summary;
};

struct ClassificationOptions {
  OrchestratorConfig teacher_config;
  RewardOptions reward;
  std::size_t parallelism = 1;
};

// Base model: agent-free episode over the initial frames (max_rounds = 0).
// Teacher: full episode. Correctness uses accuracy_reward against `judge`.
ClassificationResult run_classification(const std::vector<QAItem>& dataset, ChatBackend& base,
                                        ChatBackend& teacher, EmbeddingBackend& embedder,
                                        JudgeBackend* judge,
                                        const ClassificationOptions& options = {});

nlohmann::json to_json(const LabeledItem& item);
nlohmann::json to_json(const SplitSummary& summary);

// Writes labeled.jsonl, sft.jsonl, rl.jsonl, summary.json and the base/teacher
// trajectory files into `dir`.
void write_classification(const ClassificationResult& result, const std::string& dir);

}  // namespace framewise
