#include "framewise/grpo.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <ostream>

#include <nlohmann/json.hpp>

#include "framewise/error.hpp"

namespace framewise {

using nlohmann::json;

std::vector<double> group_advantages(std::span<const double> rewards, double eps) {
  if (rewards.size() < 2) throw Error("group_advantages: a group needs at least 2 rewards");
  if (!(eps >= 0.0)) throw Error("group_advantages: eps must be non-negative");
  for (double r : rewards) {
    if (!std::isfinite(r)) throw Error("group_advantages: rewards must be finite");
  }
  const double n = static_cast<double>(rewards.size());
  double mean = 0.0;
  for (double r : rewards) mean += r;
  mean /= n;
  double var = 0.0;
  for (double r : rewards) var += (r - mean) * (r - mean);
  const double denom = std::sqrt(var / n) + eps;

  std::vector<double> out;
  out.reserve(rewards.size());
  for (double r : rewards) out.push_back(denom > 0.0 ? (r - mean) / denom : 0.0);
  return out;
}

AdvantageGroup group_advantages(const RewardGroup& group, double eps) {
  return AdvantageGroup{group_advantages(group.rewards, eps)};
}

double clipped_term(double rho, double advantage, double clip_eps) {
  if (!(rho > 0.0)) throw Error("clipped_term: rho must be positive");
  if (!(clip_eps > 0.0 && clip_eps < 1.0)) throw Error("clipped_term: clip_eps must be in (0, 1)");
  const double clipped = std::clamp(rho, 1.0 - clip_eps, 1.0 + clip_eps);
  return std::min(rho * advantage, clipped * advantage);
}

ExportResult export_rl_batch(std::span<const RolloutRecord> records, std::ostream& out,
                             const ExportOptions& options) {
  std::vector<std::string> order;
  std::map<std::string, std::vector<const RolloutRecord*>> groups;
  for (const auto& r : records) {
    auto [it, fresh] = groups.try_emplace(r.prompt_id);
    if (fresh) order.push_back(r.prompt_id);
    it->second.push_back(&r);
  }

  ExportResult result;
  for (const auto& id : order) {
    const auto& members = groups[id];
    const bool unrewarded = std::any_of(members.begin(), members.end(),
                                        [](const RolloutRecord* r) { return !r->reward; });
    if (unrewarded) {
      result.rejected.emplace_back(id, "group contains unrewarded trajectories");
      continue;
    }
    if (members.size() < 2 || (options.group_size && members.size() != *options.group_size)) {
      result.rejected.emplace_back(id, "group has " + std::to_string(members.size()) +
                                           " trajectories");
      continue;
    }

    std::vector<double> rewards;
    for (const auto* r : members) rewards.push_back(r->reward->total);
    const auto adv = group_advantages(rewards, options.eps);
    for (std::size_t i = 0; i < members.size(); ++i) {
      const auto& r = *members[i];
      json line = {{"prompt_id", r.prompt_id},
                   {"category", r.category ? json(std::string(to_string(*r.category)))
                                           : json(nullptr)},
                   {"group_size", members.size()},
                   {"advantage", adv[i]},
                   {"reward", to_json(*r.reward)},
                   {"trajectory", to_json(r.trajectory)}};
      out << line.dump() << '\n';
      ++result.records_written;
    }
    ++result.groups_written;
  }
  return result;
}

}  // namespace framewise
