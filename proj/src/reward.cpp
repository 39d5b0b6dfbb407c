#include "framewise/reward.hpp"

#include <algorithm>
#include <cctype>
#include <set>

#include <nlohmann/json.hpp>

#include "framewise/error.hpp"

namespace framewise {

using nlohmann::json;

double behavior_reward(Category category, bool used_agent, bool correct) {
  switch (category) {
    case Category::Direct:
      return (!used_agent && correct) ? kBehaviorBonus : 0.0;
    case Category::Adaptive:
      return correct ? kBehaviorBonus : 0.0;
    case Category::Active:
      if (!used_agent) return 0.0;
      return correct ? kBehaviorBonus : kActiveExplorationBonus;
  }
  return 0.0;
}

namespace {

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

std::string_view trim_punct(std::string_view s) {
  auto junk = [](unsigned char c) { return std::isspace(c) || std::ispunct(c); };
  while (!s.empty() && junk(s.front())) s.remove_prefix(1);
  while (!s.empty() && junk(s.back())) s.remove_suffix(1);
  return s;
}

}  // namespace

std::optional<std::string> extract_option_label(std::string_view answer,
                                                const std::vector<Option>& options) {
  const auto core = trim_punct(answer);
  if (core.empty()) return std::nullopt;

  for (const auto& o : options) {
    if (core == o.label) return o.label;
  }
  // Answer restates an option verbatim.
  for (const auto& o : options) {
    const auto text = lower(trim_punct(o.text));
    if (!text.empty() && lower(core) == text) return o.label;
  }

  // Standalone tokens that equal a label, e.g. "The answer is B."
  std::set<std::string> hits;
  std::size_t i = 0;
  while (i < answer.size()) {
    while (i < answer.size() && !std::isalnum(static_cast<unsigned char>(answer[i]))) ++i;
    const auto start = i;
    while (i < answer.size() && std::isalnum(static_cast<unsigned char>(answer[i]))) ++i;
    const auto token = answer.substr(start, i - start);
    for (const auto& o : options) {
      if (!token.empty() && token == o.label) hits.insert(o.label);
    }
  }
  if (hits.size() == 1) return *hits.begin();
  return std::nullopt;
}

double accuracy_reward(const QAItem& item, const std::string& answer, JudgeBackend* judge,
                       const RewardOptions& options) {
  if (item.answer_type == AnswerType::mc) {
    if (judge && options.judge_multiple_choice) {
      return judge->judge_mc(item.question, item.options, item.gold, answer) >= 0.5 ? 1.0 : 0.0;
    }
    const auto label = extract_option_label(answer, item.options);
    return label && *label == item.gold ? 1.0 : 0.0;
  }
  if (!judge) throw Error("open-ended item '" + item.id + "' needs a judge backend");
  const double score = judge->judge_oe(item.question, item.gold, answer);
  if (!(score >= 0.0 && score <= 1.0)) {
    throw BackendError("judge score out of [0, 1]: " + std::to_string(score));
  }
  return score;
}

RewardBreakdown total_reward(const Trajectory& trajectory, const QAItem& item, Category category,
                             JudgeBackend* judge, const RewardOptions& options) {
  RewardBreakdown r;
  const auto raw = trajectory.raw_outputs();
  const auto verdict = validate_trajectory_format(raw);
  r.violations = verdict.violations;
  r.format_pass = verdict.pass;
  if (!r.format_pass) return r;

  r.r_format = kFormatReward;
  if (trajectory.final_answer) {
    r.r_accuracy = accuracy_reward(item, *trajectory.final_answer, judge, options);
  }
  const bool correct = r.r_accuracy >= options.correct_threshold;
  r.r_behavior = behavior_reward(category, trajectory.used_agent(), correct);
  r.total = r.r_format + r.r_accuracy + r.r_behavior;
  return r;
}

json to_json(const RewardBreakdown& r) {
  json violations = json::array();
  for (auto v : r.violations) violations.push_back(std::string(to_string(v)));
  return {{"format_pass", r.format_pass}, {"r_format", r.r_format},
          {"r_accuracy", r.r_accuracy},   {"r_behavior", r.r_behavior},
          {"total", r.total},             {"violations", std::move(violations)}};
}

RewardBreakdown reward_from_json(const json& j) {
  try {
    RewardBreakdown r;
    r.format_pass = j.at("format_pass").get<bool>();
    r.r_format = j.at("r_format").get<double>();
    r.r_accuracy = j.at("r_accuracy").get<double>();
    r.r_behavior = j.at("r_behavior").get<double>();
    r.total = j.at("total").get<double>();
    for (const auto& v : j.at("violations")) {
      auto rule = format_rule_from_string(v.get<std::string>());
      if (!rule) throw SchemaError("unknown format rule: " + v.get<std::string>());
      r.violations.push_back(*rule);
    }
    return r;
  } catch (const json::exception& e) {
    throw SchemaError(std::string("bad reward record: ") + e.what());
  }
}

}  // namespace framewise
