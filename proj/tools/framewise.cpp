// framewise: command-line front end for the agentic frame-sampling runtime.
//
//   framewise eval     --dataset D --config C --chat-endpoint URL --embed-endpoint URL --out DIR
//   framewise classify --dataset D --base URL --teacher URL --out DIR
//   framewise reward   --trajectories F --categories F --dataset D
//   framewise replay   --trajectory F
//   framewise sample   --video V --mode clip|uniform --start S --end E [--prompt P]
//   framewise export   --rewarded F --out F [--group-size G]
//
// FRAMEWISE_CHAT_URL, FRAMEWISE_EMBED_URL and FRAMEWISE_API_KEY take
// precedence over the corresponding flags.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "framewise/classifier.hpp"
#include "framewise/error.hpp"
#include "framewise/evalkit.hpp"
#include "framewise/frame_store.hpp"
#include "framewise/grpo.hpp"
#include "framewise/http_backends.hpp"
#include "framewise/orchestrator.hpp"
#include "framewise/reward.hpp"
#include "framewise/sampling.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace framewise;

namespace {

void env_override(std::string& value, const char* name) {
  if (const char* v = std::getenv(name); v && *v) value = v;
}

std::ofstream open_out(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  return out;
}

struct Common {
  std::string config_path;
  std::string embed_url;
  std::string judge_url;
  std::string api_key;
  std::size_t parallel = 0;

  RunConfig load() const {
    RunConfig c = config_path.empty() ? RunConfig{} : load_run_config(config_path);
    if (!embed_url.empty()) c.embed_endpoint = embed_url;
    if (!judge_url.empty()) c.judge_endpoint = judge_url;
    if (!api_key.empty()) c.api_key = api_key;
    if (parallel > 0) c.parallel = parallel;
    env_override(c.embed_endpoint, "FRAMEWISE_EMBED_URL");
    env_override(c.api_key, "FRAMEWISE_API_KEY");
    return c;
  }
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config_path, "JSON config file");
  cmd->add_option("--embed-endpoint", c.embed_url, "OpenAI-compatible embeddings server");
  cmd->add_option("--judge-endpoint", c.judge_url, "OpenAI-compatible chat server used as judge");
  cmd->add_option("--api-key", c.api_key, "Bearer token for all endpoints");
  cmd->add_option("--parallel", c.parallel, "Episodes run concurrently");
}

Endpoint endpoint(const RunConfig& c, const std::string& url, const std::string& model) {
  return Endpoint{url, model, c.api_key, c.timeout_seconds};
}

std::unique_ptr<EmbeddingBackend> make_embedder(const RunConfig& c) {
  if (c.embed_endpoint.empty()) {
    std::cerr << "warning: no embedding endpoint configured; clip_sample uses the hash embedder\n";
    return std::make_unique<HashEmbedder>();
  }
  return std::make_unique<OpenAIEmbeddingBackend>(endpoint(c, c.embed_endpoint, c.embed_model));
}

struct Judge {
  std::unique_ptr<ChatBackend> chat;
  std::unique_ptr<JudgeBackend> judge;
};

Judge make_judge(const RunConfig& c) {
  Judge j;
  if (c.judge_endpoint.empty()) return j;
  j.chat = std::make_unique<OpenAIChatBackend>(endpoint(c, c.judge_endpoint, c.judge_model));
  j.judge = std::make_unique<ChatJudgeBackend>(*j.chat);
  return j;
}

std::vector<json> read_jsonl(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path);
  std::vector<json> out;
  std::string line;
  for (std::size_t n = 1; std::getline(in, line); ++n) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(json::parse(line));
    } catch (const json::exception& e) {
      throw SchemaError(path + " line " + std::to_string(n) + ": " + e.what());
    }
  }
  return out;
}

// ---------------------------------------------------------------------------

int cmd_eval(const Common& common, const std::string& dataset, std::string chat_url,
             const std::string& out_dir, const std::string& baseline_path,
             const std::string& name) {
  auto cfg = common.load();
  if (!chat_url.empty()) cfg.chat_endpoint = chat_url;
  env_override(cfg.chat_endpoint, "FRAMEWISE_CHAT_URL");
  if (cfg.chat_endpoint.empty()) throw Error("eval needs --chat-endpoint");

  const auto items = load_dataset(dataset);
  OpenAIChatBackend chat(endpoint(cfg, cfg.chat_endpoint, cfg.chat_model));
  auto embedder = make_embedder(cfg);
  auto judge = make_judge(cfg);

  BenchmarkOptions options;
  options.config = cfg.orchestrator;
  options.parallelism = cfg.parallel;
  options.reward.correct_threshold = cfg.correct_threshold;
  options.name = name;
  const auto run = run_benchmark(items, chat, *embedder, judge.judge.get(), options);

  const fs::path out(out_dir);
  auto traj = open_out(out / "trajectories.jsonl");
  for (const auto& r : run.results) {
    if (r.trajectory) traj << to_record(*r.trajectory) << '\n';
  }
  std::optional<Report> baseline;
  if (!baseline_path.empty()) {
    std::ifstream in(baseline_path);
    if (!in) throw Error("cannot open baseline report " + baseline_path);
    baseline = report_from_json(json::parse(in));
  }
  const Report* base = baseline ? &*baseline : nullptr;
  open_out(out / "report.json") << emit_report(run.report, ReportFormat::json);
  const auto md = emit_report(run.report, ReportFormat::markdown, base);
  open_out(out / "report.md") << md;
  std::cout << md;
  for (const auto& r : run.results) {
    if (!r.failure.empty()) std::cerr << "failed " << r.item_id << ": " << r.failure << '\n';
  }
  return 0;
}

int cmd_classify(const Common& common, const std::string& dataset, std::string base_url,
                 std::string teacher_url, const std::string& out_dir) {
  auto cfg = common.load();
  env_override(base_url, "FRAMEWISE_CHAT_URL");
  if (base_url.empty() || teacher_url.empty()) throw Error("classify needs --base and --teacher");

  const auto items = load_dataset(dataset);
  OpenAIChatBackend base(endpoint(cfg, base_url, cfg.chat_model));
  OpenAIChatBackend teacher(endpoint(cfg, teacher_url, ""));
  auto embedder = make_embedder(cfg);
  auto judge = make_judge(cfg);

  ClassificationOptions options;
  options.teacher_config = cfg.orchestrator;
  options.parallelism = cfg.parallel;
  options.reward.correct_threshold = cfg.correct_threshold;
  const auto result =
      run_classification(items, base, teacher, *embedder, judge.judge.get(), options);
  write_classification(result, out_dir);
  std::cout << to_json(result.summary).dump(2) << '\n';
  for (const auto& li : result.items) {
    if (!li.label) std::cerr << "unlabeled " << li.item.id << ": " << li.unlabeled_reason << '\n';
  }
  return 0;
}

int cmd_reward(const Common& common, const std::string& trajectories,
               const std::string& categories, const std::string& dataset,
               const std::string& out_path) {
  const auto cfg = common.load();
  std::map<std::string, QAItem> items;
  for (auto& item : load_dataset(dataset)) items.emplace(item.id, std::move(item));

  std::map<std::string, Category> labels;
  for (const auto& j : read_jsonl(categories)) {
    const auto id = j.at("id").get<std::string>();
    if (j.at("category").is_null()) continue;
    auto c = category_from_string(j["category"].get<std::string>());
    if (c) labels[id] = *c;  // anomalies carry no reward category
  }

  auto judge = make_judge(cfg);
  RewardOptions options;
  options.correct_threshold = cfg.correct_threshold;

  std::ofstream file;
  if (!out_path.empty()) file = open_out(out_path);
  std::ostream& out = out_path.empty() ? std::cout : file;
  int status = 0;
  for (auto& record : read_jsonl(trajectories)) {
    const auto t = trajectory_from_json(record);
    const auto item = items.find(t.item_id);
    std::optional<Category> category = labels.count(t.item_id)
                                           ? std::optional(labels[t.item_id])
                                           : (item != items.end() ? item->second.category
                                                                  : std::nullopt);
    if (item == items.end() || !category) {
      std::cerr << "skipping " << t.item_id << ": no dataset item or category\n";
      status = 1;
      continue;
    }
    record["reward"] = to_json(total_reward(t, item->second, *category, judge.judge.get(), options));
    record["category"] = std::string(to_string(*category));
    out << record.dump() << '\n';
  }
  return status;
}

int cmd_replay(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path);
  std::string line;
  int status = 0;
  for (std::size_t n = 1; std::getline(in, line); ++n) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto t = replay_episode(std::string_view(line));
      std::cout << "ok " << t.item_id << " frames_delivered=" << t.frames_delivered
                << " terminal=" << to_string(t.terminal) << '\n';
    } catch (const CorruptRecord& e) {
      std::cout << "corrupt line " << n << ": " << e.what() << '\n';
      status = 1;
    }
  }
  return status;
}

int cmd_sample(const Common& common, const std::string& video_path, const std::string& mode,
               FrameIndex start, FrameIndex end, const std::string& prompt, std::int64_t n) {
  const auto video = open_video(video_path);
  SampleResult result;
  if (mode == "clip") {
    const auto cfg = common.load();
    auto embedder = make_embedder(cfg);
    result = clip_sample(video, start, end, n > 0 ? n : kDefaultClipFrames, prompt, *embedder);
  } else {
    result = uniform_sample_exec(video, start, end, n > 0 ? n : kDefaultUniformFrames);
  }
  json out = {{"video", video.id}, {"mode", mode}, {"indices", json::array()}};
  for (const auto& f : result.frames) out["indices"].push_back(f.index);
  if (!result.scored.empty()) {
    out["scores"] = json::array();
    for (const auto& s : result.scored) out["scores"].push_back(s.score);
  }
  std::cout << out.dump() << '\n';
  return 0;
}

int cmd_export(const std::string& rewarded, const std::string& out_path, std::size_t group_size) {
  std::vector<RolloutRecord> records;
  for (const auto& j : read_jsonl(rewarded)) {
    RolloutRecord r;
    r.trajectory = trajectory_from_json(j);
    r.prompt_id = j.value("prompt_id", r.trajectory.item_id);
    if (j.contains("category") && j["category"].is_string()) {
      r.category = category_from_string(j["category"].get<std::string>());
    }
    if (j.contains("reward")) r.reward = reward_from_json(j["reward"]);
    records.push_back(std::move(r));
  }
  ExportOptions options;
  if (group_size > 0) options.group_size = group_size;
  auto out = open_out(out_path);
  const auto result = export_rl_batch(records, out, options);
  std::cout << "groups written: " << result.groups_written
            << ", records written: " << result.records_written << '\n';
  for (const auto& [id, reason] : result.rejected) {
    std::cerr << "rejected group " << id << ": " << reason << '\n';
  }
  return result.rejected.empty() ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"framewise: agentic frame sampling for video question answering"};
  app.require_subcommand(1);

  Common common;
  std::string dataset, chat_url, out, baseline, name = "framewise";
  auto* eval = app.add_subcommand("eval", "Run the agent loop over a dataset and report metrics");
  add_common(eval, common);
  eval->add_option("--dataset", dataset, "Dataset JSONL")->required();
  eval->add_option("--chat-endpoint", chat_url, "OpenAI-compatible chat server");
  eval->add_option("--out", out, "Output directory")->required();
  eval->add_option("--baseline", baseline, "Baseline report.json for the delta row");
  eval->add_option("--name", name, "Model name in the report");

  std::string base_url, teacher_url;
  auto* classify = app.add_subcommand("classify", "Label items Direct/Adaptive/Active");
  add_common(classify, common);
  classify->add_option("--dataset", dataset, "Dataset JSONL")->required();
  classify->add_option("--base", base_url, "Chat server for the base model");
  classify->add_option("--teacher", teacher_url, "Chat server for the teacher model")->required();
  classify->add_option("--out", out, "Output directory")->default_val("classified");

  std::string trajectories, categories;
  auto* reward = app.add_subcommand("reward", "Score trajectories with the gated reward");
  add_common(reward, common);
  reward->add_option("--trajectories", trajectories, "Trajectory JSONL")->required();
  reward->add_option("--categories", categories, "JSONL with id and category")->required();
  reward->add_option("--dataset", dataset, "Dataset JSONL with gold answers")->required();
  reward->add_option("--out", out, "Output JSONL (default stdout)");

  std::string trajectory;
  auto* replay = app.add_subcommand("replay", "Re-run logged episodes and check them");
  replay->add_option("--trajectory", trajectory, "Trajectory JSONL")->required();

  std::string video, mode, prompt;
  FrameIndex start = 0, end = 0;
  std::int64_t n = 0;
  auto* sample = app.add_subcommand("sample", "Run one sampling agent on a video");
  add_common(sample, common);
  sample->add_option("--video", video, "Frame directory or adapter locator")->required();
  sample->add_option("--mode", mode, "clip or uniform")
      ->required()
      ->check(CLI::IsMember({"clip", "uniform"}));
  sample->add_option("--start", start, "First frame (inclusive)")->required();
  sample->add_option("--end", end, "Last frame (exclusive)")->required();
  sample->add_option("--prompt", prompt, "Text prompt for clip mode");
  sample->add_option("--n", n, "Frames to return");

  std::string rewarded;
  std::size_t group_size = 0;
  auto* exp = app.add_subcommand("export", "Write advantage-annotated RL batches");
  exp->add_option("--rewarded", rewarded, "Rewarded trajectory JSONL")->required();
  exp->add_option("--out", out, "Output JSONL")->required();
  exp->add_option("--group-size", group_size, "Required trajectories per prompt");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*eval) return cmd_eval(common, dataset, chat_url, out, baseline, name);
    if (*classify) return cmd_classify(common, dataset, base_url, teacher_url, out);
    if (*reward) return cmd_reward(common, trajectories, categories, dataset, out);
    if (*replay) return cmd_replay(trajectory);
    if (*sample) {
      if (mode == "clip" && prompt.empty()) throw Error("clip mode needs --prompt");
      return cmd_sample(common, video, mode, start, end, prompt, n);
    }
    if (*exp) return cmd_export(rewarded, out, group_size);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
