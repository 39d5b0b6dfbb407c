#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "framewise/orchestrator.hpp"
#include "framewise/protocol.hpp"
#include "framewise/qa.hpp"

namespace framewise {

inline constexpr double kFormatReward = 0.05;
inline constexpr double kBehaviorBonus = 0.5;
inline constexpr double kActiveExplorationBonus = 0.2;
inline constexpr double kDefaultCorrectThreshold = 0.5;

// Answer grading contract. judge_mc returns 0 or 1, judge_oe a score in [0, 1].
class JudgeBackend {
 public:
  virtual ~JudgeBackend() = default;
  virtual double judge_mc(const std::string& question, const std::vector<Option>& options,
                          const std::string& gold, const std::string& answer) = 0;
  virtual double judge_oe(const std::string& question, const std::string& gold,
                          const std::string& answer) = 0;
};

struct RewardBreakdown {
  bool format_pass = false;
  double r_format = 0.0;
  double r_accuracy = 0.0;
  double r_behavior = 0.0;
  double total = 0.0;
  std::vector<FormatRule> violations;

  bool operator==(const RewardBreakdown&) const = default;
};

nlohmann::json to_json(const RewardBreakdown& r);
RewardBreakdown reward_from_json(const nlohmann::json& j);

struct RewardOptions {
  double correct_threshold = kDefaultCorrectThreshold;
  // Route multiple-choice items to the judge instead of the built-in grader.
  bool judge_multiple_choice = false;
};

// Category-conditioned bonus: Direct rewards answering correctly without the
// agents, Adaptive rewards any correct answer, Active rewards agent use
// (fully when correct, partially when not).
double behavior_reward(Category category, bool used_agent, bool correct);

// Maps free-form answer text to a single option label, or nullopt when no
// unambiguous label can be found.
std::optional<std::string> extract_option_label(std::string_view answer,
                                                const std::vector<Option>& options);

// Throws Error for open-ended items when no judge is configured.
double accuracy_reward(const QAItem& item, const std::string& answer, JudgeBackend* judge,
                       const RewardOptions& options = {});

RewardBreakdown total_reward(const Trajectory& trajectory, const QAItem& item, Category category,
                             JudgeBackend* judge, const RewardOptions& options = {});

}  // namespace framewise
