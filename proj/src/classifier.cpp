#include "framewise/classifier.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>

#include <nlohmann/json.hpp>

#include "framewise/error.hpp"
#include "framewise/parallel.hpp"

namespace framewise {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr const char* kBaseFile = "trajectories_base.jsonl";
constexpr const char* kTeacherFile = "trajectories_teacher.jsonl";

}  // namespace

std::string_view to_string(Label l) {
  switch (l) {
    case Label::Direct: return "Direct";
    case Label::Adaptive: return "Adaptive";
    case Label::Active: return "Active";
    case Label::Anomaly: return "Anomaly";
  }
  return "unknown";
}

std::optional<Category> category_of(Label l) {
  switch (l) {
    case Label::Direct: return Category::Direct;
    case Label::Adaptive: return Category::Adaptive;
    case Label::Active: return Category::Active;
    case Label::Anomaly: return std::nullopt;
  }
  return std::nullopt;
}

Label classify(const ModelOutcome& base, const ModelOutcome& teacher) {
  if (base.used_agent) throw Error("classify: base outcome must come from an agent-free run");
  if (base.correct) return teacher.correct ? Label::Direct : Label::Anomaly;
  if (teacher.correct && !teacher.used_agent) return Label::Adaptive;
  return Label::Active;
}

std::string SplitSummary::proportions() const {
  const double n = static_cast<double>(kept());
  auto pct = [&](std::size_t k) { return n > 0 ? 100.0 * static_cast<double>(k) / n : 0.0; };
  char buf[128];
  std::snprintf(buf, sizeof(buf), "%.1f%% Direct, %.1f%% Adaptive, %.1f%% Active", pct(direct),
                pct(adaptive), pct(active));
  return buf;
}

SplitSummary summarize(const std::vector<LabeledItem>& items) {
  SplitSummary s;
  for (const auto& li : items) {
    if (!li.label) {
      ++s.unlabeled;
      continue;
    }
    switch (*li.label) {
      case Label::Direct: ++s.direct; break;
      case Label::Adaptive: ++s.adaptive; break;
      case Label::Active: ++s.active; break;
      case Label::Anomaly: ++s.anomaly; break;
    }
    if (*li.label == Label::Anomaly) continue;
    s.rl_ids.push_back(li.item.id);
    if (*li.label != Label::Direct) s.sft_ids.push_back(li.item.id);
  }
  return s;
}

namespace {

// Correctness of a finished episode; nullopt with `reason` set when the
// episode cannot be scored.
std::optional<bool> score_episode(const Trajectory& t, const QAItem& item, JudgeBackend* judge,
                                  const RewardOptions& options, std::string& reason) {
  if (t.terminal == Terminal::backend_failed) {
    reason = "backend failure: " + t.failure;
    return std::nullopt;
  }
  if (!t.final_answer) return false;
  try {
    return accuracy_reward(item, *t.final_answer, judge, options) >= options.correct_threshold;
  } catch (const std::exception& e) {
    reason = std::string("judge failure: ") + e.what();
    return std::nullopt;
  }
}

LabeledItem classify_item(const QAItem& item, ChatBackend& base, ChatBackend& teacher,
                          EmbeddingBackend& embedder, JudgeBackend* judge,
                          const ClassificationOptions& options) {
  LabeledItem out;
  out.item = item;
  try {
    const auto video = open_video(item.video);

    auto base_config = options.teacher_config;
    base_config.max_rounds = 0;
    out.base_trajectory = run_episode(item, video, base, embedder, base_config);
    out.teacher_trajectory = run_episode(item, video, teacher, embedder, options.teacher_config);
  } catch (const std::exception& e) {
    out.unlabeled_reason = e.what();
    return out;
  }

  std::string reason;
  const auto base_ok = score_episode(*out.base_trajectory, item, judge, options.reward, reason);
  if (!base_ok) {
    out.unlabeled_reason = "base " + reason;
    return out;
  }
  const auto teacher_ok =
      score_episode(*out.teacher_trajectory, item, judge, options.reward, reason);
  if (!teacher_ok) {
    out.unlabeled_reason = "teacher " + reason;
    return out;
  }

  out.base = ModelOutcome{*base_ok, false, std::string(kBaseFile) + "#" + item.id};
  out.teacher = ModelOutcome{*teacher_ok, out.teacher_trajectory->used_agent(),
                             std::string(kTeacherFile) + "#" + item.id};
  out.label = classify(out.base, out.teacher);
  return out;
}

json outcome_json(const ModelOutcome& o) {
  return {{"correct", o.correct},
          {"used_agent", o.used_agent},
          {"trajectory_ref", o.trajectory_ref ? json(*o.trajectory_ref) : json(nullptr)}};
}

}  // namespace

ClassificationResult run_classification(const std::vector<QAItem>& dataset, ChatBackend& base,
                                        ChatBackend& teacher, EmbeddingBackend& embedder,
                                        JudgeBackend* judge,
                                        const ClassificationOptions& options) {
  options.teacher_config.validate();
  ClassificationResult result;
  result.items.resize(dataset.size());
  parallel_for(dataset.size(), options.parallelism, [&](std::size_t i) {
    result.items[i] = classify_item(dataset[i], base, teacher, embedder, judge, options);
  });
  result.summary = summarize(result.items);
  return result;
}

json to_json(const LabeledItem& li) {
  json j = to_json(li.item);
  j["category"] = li.label ? json(std::string(to_string(*li.label))) : json(nullptr);
  if (!li.label) j["unlabeled_reason"] = li.unlabeled_reason;
  j["base_outcome"] = outcome_json(li.base);
  j["teacher_outcome"] = outcome_json(li.teacher);
  return j;
}

json to_json(const SplitSummary& s) {
  return {{"direct", s.direct},     {"adaptive", s.adaptive}, {"active", s.active},
          {"anomaly", s.anomaly},   {"unlabeled", s.unlabeled},
          {"sft_size", s.sft_ids.size()}, {"rl_size", s.rl_ids.size()},
          {"proportions", s.proportions()}};
}

void write_classification(const ClassificationResult& result, const std::string& dir) {
  fs::create_directories(dir);
  auto open = [&](const char* name) {
    std::ofstream out(fs::path(dir) / name);
    if (!out) throw Error("cannot write " + (fs::path(dir) / name).string());
    return out;
  };
  auto labeled = open("labeled.jsonl");
  auto base = open(kBaseFile);
  auto teacher = open(kTeacherFile);
  for (const auto& li : result.items) {
    labeled << to_json(li).dump() << '\n';
    if (li.base_trajectory) base << to_record(*li.base_trajectory) << '\n';
    if (li.teacher_trajectory) teacher << to_record(*li.teacher_trajectory) << '\n';
  }
  auto sft = open("sft.jsonl");
  for (const auto& id : result.summary.sft_ids) sft << json(id).dump() << '\n';
  auto rl = open("rl.jsonl");
  for (const auto& id : result.summary.rl_ids) rl << json(id).dump() << '\n';
  open("summary.json") << to_json(result.summary).dump(2) << '\n';
}

}  // namespace framewise
