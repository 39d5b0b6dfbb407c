#include "framewise/evalkit.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>

#include <nlohmann/json.hpp>

#include "framewise/error.hpp"
#include "framewise/parallel.hpp"

namespace framewise {

using nlohmann::json;

json to_json(const Report& r) {
  return {{"name", r.name},
          {"accuracy", r.accuracy},
          {"avg_frames", r.avg_frames},
          {"per_category", r.per_category},
          {"counts",
           {{"total", r.counts.total},
            {"correct", r.counts.correct},
            {"failed", r.counts.failed},
            {"terminals", r.counts.terminals}}}};
}

Report report_from_json(const json& j) {
  try {
    Report r;
    r.name = j.at("name").get<std::string>();
    r.accuracy = j.at("accuracy").get<double>();
    r.avg_frames = j.at("avg_frames").get<double>();
    r.per_category = j.at("per_category").get<std::map<std::string, double>>();
    const auto& c = j.at("counts");
    r.counts.total = c.at("total").get<std::size_t>();
    r.counts.correct = c.at("correct").get<std::size_t>();
    r.counts.failed = c.at("failed").get<std::size_t>();
    r.counts.terminals = c.at("terminals").get<std::map<std::string, std::size_t>>();
    return r;
  } catch (const json::exception& e) {
    throw SchemaError(std::string("bad report: ") + e.what());
  }
}

Report compute_report(const std::vector<QAItem>& items, const std::vector<ItemResult>& results,
                      std::string name) {
  if (items.size() != results.size()) throw Error("compute_report: items and results differ");
  Report r;
  r.name = std::move(name);
  r.counts.total = items.size();

  std::map<std::string, std::pair<std::size_t, std::size_t>> tags;  // tag -> (correct, total)
  double frames = 0.0;
  std::size_t with_trajectory = 0;
  for (std::size_t i = 0; i < items.size(); ++i) {
    const auto& res = results[i];
    if (res.correct) ++r.counts.correct;
    if (!res.failure.empty()) ++r.counts.failed;
    if (res.trajectory) {
      frames += static_cast<double>(res.trajectory->frames_delivered);
      ++with_trajectory;
      ++r.counts.terminals[std::string(to_string(res.trajectory->terminal))];
    } else {
      ++r.counts.terminals["setup_failed"];
    }
    if (items[i].question_category) {
      auto& [ok, n] = tags[*items[i].question_category];
      ++n;
      if (res.correct) ++ok;
    }
  }
  if (r.counts.total > 0) {
    r.accuracy = 100.0 * static_cast<double>(r.counts.correct) / static_cast<double>(r.counts.total);
  }
  if (with_trajectory > 0) r.avg_frames = frames / static_cast<double>(with_trajectory);
  for (const auto& [tag, counts] : tags) {
    r.per_category[tag] = 100.0 * static_cast<double>(counts.first) /
                          static_cast<double>(counts.second);
  }
  return r;
}

BenchmarkRun run_benchmark(const std::vector<QAItem>& items, ChatBackend& chat,
                           EmbeddingBackend& embedder, JudgeBackend* judge,
                           const BenchmarkOptions& options) {
  options.config.validate();
  BenchmarkRun run;
  run.results.resize(items.size());
  EmbeddingCache cache;

  parallel_for(items.size(), options.parallelism, [&](std::size_t i) {
    const auto& item = items[i];
    auto& res = run.results[i];
    res.item_id = item.id;
    try {
      const auto video = open_video(item.video);
      res.trajectory = run_episode(item, video, chat, embedder, options.config, &cache);
    } catch (const std::exception& e) {
      res.failure = e.what();
      return;
    }
    const auto& t = *res.trajectory;
    if (t.terminal == Terminal::backend_failed || t.terminal == Terminal::parse_failed) {
      res.failure = std::string(to_string(t.terminal)) + (t.failure.empty() ? "" : ": " + t.failure);
      return;
    }
    if (!t.final_answer) return;
    try {
      res.score = accuracy_reward(item, *t.final_answer, judge, options.reward);
      res.correct = res.score >= options.reward.correct_threshold;
    } catch (const std::exception& e) {
      res.failure = std::string("grading failed: ") + e.what();
    }
  });

  run.report = compute_report(items, run.results, options.name);
  return run;
}

namespace {

std::string fixed1(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.1f", v);
  return buf;
}

std::string signed1(double v) {
  if (std::fabs(v) < 0.05) return "+0.0";
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%+.1f", v);
  return buf;
}

std::string percent_change(double current, double baseline) {
  if (baseline == 0.0) return "n/a";
  const long pct = std::lround(100.0 * (current - baseline) / baseline);
  return (pct > 0 ? "+" : "") + std::to_string(pct) + "%";
}

}  // namespace

std::string emit_report(const Report& report, ReportFormat format, const Report* baseline) {
  if (format == ReportFormat::json) {
    json j = to_json(report);
    if (baseline) j["baseline"] = to_json(*baseline);
    return j.dump(2) + "\n";
  }

  std::string out = "| Model | Acc (%) | Frame |\n|---|---:|---:|\n";
  auto row = [&](const Report& r) {
    out += "| " + r.name + " | " + fixed1(r.accuracy) + " | " + fixed1(r.avg_frames) + " |\n";
  };
  if (baseline) row(*baseline);
  row(report);
  if (baseline) {
    out += "| \xCE\x94 vs Baseline | " + signed1(report.accuracy - baseline->accuracy) + " | " +
           percent_change(report.avg_frames, baseline->avg_frames) + " |\n";
  }
  if (!report.per_category.empty()) {
    out += "\n| Category | Acc (%) |\n|---|---:|\n";
    for (const auto& [tag, acc] : report.per_category) {
      out += "| " + tag + " | " + fixed1(acc) + " |\n";
    }
  }
  return out;
}

RunConfig run_config_from_json(const json& j) {
  if (!j.is_object()) throw SchemaError("config must be a JSON object");
  static const std::set<std::string> kKeys = {
      "n_initial",      "max_rounds",     "clip_n",      "uniform_n",   "frame_budget",
      "parallel",       "chat_endpoint",  "embed_endpoint", "judge_endpoint", "chat_model",
      "embed_model",    "judge_model",    "api_key",     "timeout_seconds", "correct_threshold"};
  for (const auto& [key, _] : j.items()) {
    if (!kKeys.count(key)) throw SchemaError("unknown config key: " + key);
  }

  RunConfig c;
  try {
    auto& o = c.orchestrator;
    o.n_initial = j.value("n_initial", o.n_initial);
    o.max_rounds = j.value("max_rounds", o.max_rounds);
    o.clip_n = j.value("clip_n", o.clip_n);
    o.uniform_n = j.value("uniform_n", o.uniform_n);
    if (j.contains("frame_budget") && !j["frame_budget"].is_null()) {
      o.frame_budget = j["frame_budget"].get<std::int64_t>();
    }
    c.parallel = j.value("parallel", c.parallel);
    c.chat_endpoint = j.value("chat_endpoint", c.chat_endpoint);
    c.embed_endpoint = j.value("embed_endpoint", c.embed_endpoint);
    c.judge_endpoint = j.value("judge_endpoint", c.judge_endpoint);
    c.chat_model = j.value("chat_model", c.chat_model);
    c.embed_model = j.value("embed_model", c.embed_model);
    c.judge_model = j.value("judge_model", c.judge_model);
    c.api_key = j.value("api_key", c.api_key);
    c.timeout_seconds = j.value("timeout_seconds", c.timeout_seconds);
    c.correct_threshold = j.value("correct_threshold", c.correct_threshold);
  } catch (const json::exception& e) {
    throw SchemaError(std::string("bad config value: ") + e.what());
  }
  c.orchestrator.validate();
  if (c.parallel < 1) throw SchemaError("parallel must be >= 1");
  return c;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open config: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw SchemaError("config " + path + ": " + e.what());
  }
  return run_config_from_json(j);
}

}  // namespace framewise
