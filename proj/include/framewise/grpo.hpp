#pragma once

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "framewise/orchestrator.hpp"
#include "framewise/qa.hpp"
#include "framewise/reward.hpp"

namespace framewise {

inline constexpr double kDefaultAdvantageEps = 1e-6;

struct RewardGroup {
  std::string prompt_id;
  std::vector<double> rewards;  // one per sampled trajectory, G >= 2
};

struct AdvantageGroup {
  std::vector<double> advantages;
};

// A_i = (r_i - mean(r)) / (popstd(r) + eps). Throws Error for G < 2 or
// non-finite rewards.
std::vector<double> group_advantages(std::span<const double> rewards,
                                     double eps = kDefaultAdvantageEps);
AdvantageGroup group_advantages(const RewardGroup& group, double eps = kDefaultAdvantageEps);

// min(rho * A, clip(rho, 1 - clip_eps, 1 + clip_eps) * A)
double clipped_term(double rho, double advantage, double clip_eps);

struct RolloutRecord {
  std::string prompt_id;
  std::optional<Category> category;
  Trajectory trajectory;
  std::optional<RewardBreakdown> reward;  // nullopt = not rewarded yet
};

struct ExportOptions {
  double eps = kDefaultAdvantageEps;
  // When set, groups of any other size are rejected as incomplete.
  std::optional<std::size_t> group_size;
};

struct ExportResult {
  std::size_t groups_written = 0;
  std::size_t records_written = 0;
  std::vector<std::pair<std::string, std::string>> rejected;  // (prompt_id, reason)
};

// One JSONL line per rollout, grouped by prompt in order of first appearance:
// {prompt_id, category, group_size, advantage, reward, trajectory}.
// Incomplete groups are skipped and reported; the rest are written.
ExportResult export_rl_batch(std::span<const RolloutRecord> records, std::ostream& out,
                             const ExportOptions& options = {});

}  // namespace framewise
