#include "framewise/orchestrator.hpp"

#include <algorithm>
#include <functional>

#include <nlohmann/json.hpp>

#include "framewise/error.hpp"

namespace framewise {

using nlohmann::json;

void OrchestratorConfig::validate() const {
  if (n_initial < 1) throw Error("n_initial must be >= 1");
  if (max_rounds < 0) throw Error("max_rounds must be >= 0");
  if (clip_n < 1 || uniform_n < 1) throw Error("clip_n and uniform_n must be >= 1");
  if (frame_budget && *frame_budget < n_initial) throw Error("frame_budget must be >= n_initial");
}

std::string_view to_string(ToolStatus s) {
  switch (s) {
    case ToolStatus::executed: return "executed";
    case ToolStatus::duplicate: return "duplicate";
    case ToolStatus::invalid_range: return "invalid_range";
    case ToolStatus::invalid_segment: return "invalid_segment";
    case ToolStatus::over_budget: return "over_budget";
    case ToolStatus::over_round_limit: return "over_round_limit";
    case ToolStatus::agent_failed: return "agent_failed";
  }
  return "unknown";
}

std::string_view to_string(Terminal t) {
  switch (t) {
    case Terminal::answered: return "answered";
    case Terminal::exhausted_rounds: return "exhausted_rounds";
    case Terminal::parse_failed: return "parse_failed";
    case Terminal::backend_failed: return "backend_failed";
  }
  return "unknown";
}

std::vector<std::string> Trajectory::raw_outputs() const {
  std::vector<std::string> out;
  out.reserve(turns.size());
  for (const auto& t : turns) out.push_back(t.raw_output);
  return out;
}

// ---------------------------------------------------------------------------
// Live executor

std::vector<Frame> VideoAgentExecutor::fetch(std::span<const FrameIndex> indices) {
  return get_frames(video_, indices);
}

SampleResult VideoAgentExecutor::execute(const ToolCall& call, const OrchestratorConfig& config) {
  if (call.name == ToolName::clip_sample) {
    return clip_sample(video_, call.start_frame, call.end_frame, config.clip_n,
                       call.prompt.value_or(""), embedder_, cache_);
  }
  return uniform_sample_exec(video_, call.start_frame, call.end_frame, config.uniform_n);
}

// ---------------------------------------------------------------------------
// The loop

namespace {

std::int64_t projected_frames(const ToolCall& call, const OrchestratorConfig& config) {
  const auto length = call.end_frame - call.start_frame;
  if (call.name == ToolName::clip_sample) return std::min(config.clip_n, candidate_count(length));
  return static_cast<std::int64_t>(
      uniform_indices(call.start_frame, call.end_frame, config.uniform_n).size());
}

class Episode {
 public:
  Episode(ChatBackend& backend, AgentExecutor& agents, const OrchestratorConfig& config)
      : backend_(backend), agents_(agents), config_(config) {}

  Trajectory run(Trajectory t) {
    t.initial_indices = uniform_indices(0, t.video.total_frames, config_.n_initial);
    messages_.push_back(Message{
        Role::user,
        build_initial_prompt(t.question, t.video.total_frames, t.video.fps, t.initial_indices),
        agents_.fetch(t.initial_indices)});
    t.frames_delivered = static_cast<std::int64_t>(t.initial_indices.size());

    const auto system = build_system_prompt();
    std::int64_t rounds = 0;
    bool retried = false;
    bool forced = false;

    for (;;) {
      std::string text;
      try {
        text = backend_.complete(system, messages_);
      } catch (const CorruptRecord&) {
        throw;
      } catch (const std::exception& e) {
        t.terminal = Terminal::backend_failed;
        t.failure = e.what();
        return t;
      }
      messages_.push_back(Message{Role::assistant, text, {}});

      TurnRecord turn;
      turn.raw_output = text;
      auto parsed = parse_turn(text);

      if (auto* e = std::get_if<ParseError>(&parsed)) {
        turn.parse_error = *e;
        t.turns.push_back(std::move(turn));
        if (retried) {
          t.terminal = Terminal::parse_failed;
          return t;
        }
        retried = true;
        messages_.push_back(Message{Role::user, build_format_retry_prompt(to_string(e->kind)), {}});
        continue;
      }

      auto& pt = std::get<ParsedTurn>(parsed);
      turn.parsed = pt;
      if (const auto* answer = std::get_if<Answer>(&pt.action)) {
        t.final_answer = answer->text;
        t.terminal = Terminal::answered;
        t.turns.push_back(std::move(turn));
        return t;
      }

      const auto& call = std::get<ToolCall>(pt.action);
      if (forced) {
        t.turns.push_back(std::move(turn));
        t.terminal = Terminal::exhausted_rounds;
        return t;
      }
      if (rounds >= config_.max_rounds) {
        turn.tool_result = ToolResultSummary{ToolStatus::over_round_limit, {}, {},
                                             "round limit reached"};
        t.turns.push_back(std::move(turn));
        forced = true;
        messages_.push_back(Message{Role::user, build_forced_answer_prompt(), {}});
        continue;
      }
      ++rounds;

      if (auto rejection = check_call(call, t)) {
        const auto message = rejection->message;
        turn.tool_result = std::move(*rejection);
        t.turns.push_back(std::move(turn));
        messages_.push_back(Message{Role::user, build_tool_error_prompt(message), {}});
        continue;
      }

      SampleResult result;
      try {
        result = agents_.execute(call, config_);
      } catch (const InvalidSegment& e) {
        turn.tool_result = ToolResultSummary{ToolStatus::invalid_segment, {}, {}, e.what()};
        t.turns.push_back(std::move(turn));
        messages_.push_back(Message{Role::user, build_tool_error_prompt(e.what()), {}});
        continue;
      } catch (const CorruptRecord&) {
        throw;
      } catch (const std::exception& e) {
        turn.tool_result = ToolResultSummary{ToolStatus::agent_failed, {}, {}, e.what()};
        t.turns.push_back(std::move(turn));
        t.terminal = Terminal::backend_failed;
        t.failure = e.what();
        return t;
      }

      ToolResultSummary summary;
      summary.status = ToolStatus::executed;
      for (const auto& f : result.frames) summary.indices.push_back(f.index);
      for (const auto& s : result.scored) summary.scores.push_back(s.score);
      turn.tool_result = std::move(summary);
      t.turns.push_back(std::move(turn));
      t.executed_calls.push_back(call);
      t.frames_delivered += static_cast<std::int64_t>(result.frames.size());

      std::vector<FrameIndex> indices;
      for (const auto& f : result.frames) indices.push_back(f.index);
      messages_.push_back(
          Message{Role::user, build_turn_prompt(indices), std::move(result.frames)});
    }
  }

 private:
  std::optional<ToolResultSummary> check_call(const ToolCall& call, const Trajectory& t) const {
    auto reject = [](ToolStatus s, std::string msg) {
      return ToolResultSummary{s, {}, {}, std::move(msg)};
    };
    if (is_duplicate_call(call, t.executed_calls)) {
      return reject(ToolStatus::duplicate, "duplicate call");
    }
    if (call.end_frame > t.video.total_frames) {
      return reject(ToolStatus::invalid_range,
                    "end_frame " + std::to_string(call.end_frame) + " exceeds total frames " +
                        std::to_string(t.video.total_frames));
    }
    if (call.name == ToolName::clip_sample && call.end_frame - call.start_frame <= config_.clip_n) {
      return reject(ToolStatus::invalid_segment, "Invalid segment");
    }
    if (config_.frame_budget &&
        t.frames_delivered + projected_frames(call, config_) > *config_.frame_budget) {
      return reject(ToolStatus::over_budget,
                    "frame budget of " + std::to_string(*config_.frame_budget) +
                        " would be exceeded");
    }
    return std::nullopt;
  }

  ChatBackend& backend_;
  AgentExecutor& agents_;
  const OrchestratorConfig& config_;
  std::vector<Message> messages_;
};

}  // namespace

Trajectory run_episode(const std::string& item_id, const std::string& question,
                       const VideoInfo& video, ChatBackend& backend, AgentExecutor& agents,
                       const OrchestratorConfig& config) {
  config.validate();
  if (question.empty()) throw Error("question must be non-empty");
  if (video.total_frames < 1) throw Error("video has no frames");
  Trajectory t;
  t.item_id = item_id;
  t.question = question;
  t.video = video;
  t.config = config;
  return Episode(backend, agents, config).run(std::move(t));
}

Trajectory run_episode(const QAItem& item, const VideoRef& video, ChatBackend& backend,
                       EmbeddingBackend& embedder, const OrchestratorConfig& config,
                       EmbeddingCache* cache) {
  VideoAgentExecutor agents(video, embedder, cache);
  return run_episode(item.id, item.prompt_text(), VideoInfo{video.id, video.total_frames, video.fps},
                     backend, agents, config);
}

// ---------------------------------------------------------------------------
// Serialization

namespace {

json call_to_json(const ToolCall& c) { return json::parse(tool_call_json(c)); }

ToolCall call_from_json(const json& j) {
  auto r = parse_tool_call_json(j.dump());
  if (auto* e = std::get_if<ParseError>(&r)) throw CorruptRecord("bad tool call: " + e->message);
  return std::get<ToolCall>(r);
}

json config_to_json(const OrchestratorConfig& c) {
  json j = {{"n_initial", c.n_initial},
            {"max_rounds", c.max_rounds},
            {"clip_n", c.clip_n},
            {"uniform_n", c.uniform_n},
            {"frame_budget", nullptr}};
  if (c.frame_budget) j["frame_budget"] = *c.frame_budget;
  return j;
}

OrchestratorConfig config_from_json(const json& j) {
  OrchestratorConfig c;
  c.n_initial = j.at("n_initial").get<std::int64_t>();
  c.max_rounds = j.at("max_rounds").get<std::int64_t>();
  c.clip_n = j.at("clip_n").get<std::int64_t>();
  c.uniform_n = j.at("uniform_n").get<std::int64_t>();
  if (!j.at("frame_budget").is_null()) c.frame_budget = j["frame_budget"].get<std::int64_t>();
  return c;
}

json turn_to_json(const TurnRecord& t) {
  json j;
  j["raw_output"] = t.raw_output;
  j["parsed"] = nullptr;
  if (t.parsed) {
    json action;
    if (const auto* a = std::get_if<Answer>(&t.parsed->action)) {
      action = {{"type", "answer"}, {"text", a->text}};
    } else {
      action = {{"type", "tool_call"}, {"call", call_to_json(std::get<ToolCall>(t.parsed->action))}};
    }
    j["parsed"] = {{"thinking", t.parsed->thinking},
                   {"action", std::move(action)},
                   {"trailing", t.parsed->trailing}};
  }
  j["parse_error"] = nullptr;
  if (t.parse_error) {
    j["parse_error"] = {{"kind", std::string(to_string(t.parse_error->kind))},
                        {"message", t.parse_error->message}};
  }
  j["tool_result"] = nullptr;
  if (t.tool_result) {
    j["tool_result"] = {{"status", std::string(to_string(t.tool_result->status))},
                        {"indices", t.tool_result->indices},
                        {"scores", t.tool_result->scores},
                        {"message", t.tool_result->message}};
  }
  return j;
}

template <typename Enum, std::size_t N>
Enum enum_from(const json& j, const Enum (&values)[N]) {
  const auto s = j.get<std::string>();
  for (auto v : values) {
    if (to_string(v) == s) return v;
  }
  throw CorruptRecord("unknown enum value: " + s);
}

TurnRecord turn_from_json(const json& j) {
  static constexpr ParseErrorKind kKinds[] = {
      ParseErrorKind::missing_thinking, ParseErrorKind::empty_thinking,
      ParseErrorKind::missing_action,   ParseErrorKind::empty_action,
      ParseErrorKind::ambiguous_turn,   ParseErrorKind::bad_json,
      ParseErrorKind::bad_schema,       ParseErrorKind::range_order};
  static constexpr ToolStatus kStatuses[] = {
      ToolStatus::executed,    ToolStatus::duplicate,        ToolStatus::invalid_range,
      ToolStatus::invalid_segment, ToolStatus::over_budget, ToolStatus::over_round_limit,
      ToolStatus::agent_failed};

  TurnRecord t;
  t.raw_output = j.at("raw_output").get<std::string>();
  if (const auto& p = j.at("parsed"); !p.is_null()) {
    ParsedTurn pt;
    pt.thinking = p.at("thinking").get<std::string>();
    pt.trailing = p.at("trailing").get<std::string>();
    const auto& action = p.at("action");
    const auto type = action.at("type").get<std::string>();
    if (type == "answer") {
      pt.action = Answer{action.at("text").get<std::string>()};
    } else if (type == "tool_call") {
      pt.action = call_from_json(action.at("call"));
    } else {
      throw CorruptRecord("unknown action type: " + type);
    }
    t.parsed = std::move(pt);
  }
  if (const auto& e = j.at("parse_error"); !e.is_null()) {
    t.parse_error = ParseError{enum_from(e.at("kind"), kKinds), e.at("message").get<std::string>()};
  }
  if (const auto& r = j.at("tool_result"); !r.is_null()) {
    ToolResultSummary s;
    s.status = enum_from(r.at("status"), kStatuses);
    s.indices = r.at("indices").get<std::vector<FrameIndex>>();
    s.scores = r.at("scores").get<std::vector<double>>();
    s.message = r.at("message").get<std::string>();
    t.tool_result = std::move(s);
  }
  return t;
}

}  // namespace

json to_json(const Trajectory& t) {
  json j;
  j["item_id"] = t.item_id;
  j["question"] = t.question;
  j["video"] = {{"id", t.video.id}, {"total_frames", t.video.total_frames}, {"fps", t.video.fps}};
  j["config"] = config_to_json(t.config);
  j["initial_indices"] = t.initial_indices;
  j["turns"] = json::array();
  for (const auto& turn : t.turns) j["turns"].push_back(turn_to_json(turn));
  j["executed_calls"] = json::array();
  for (const auto& c : t.executed_calls) j["executed_calls"].push_back(call_to_json(c));
  j["frames_delivered"] = t.frames_delivered;
  j["final_answer"] = t.final_answer ? json(*t.final_answer) : json(nullptr);
  j["terminal"] = std::string(to_string(t.terminal));
  j["failure"] = t.failure;
  return j;
}

Trajectory trajectory_from_json(const json& j) {
  static constexpr Terminal kTerminals[] = {Terminal::answered, Terminal::exhausted_rounds,
                                            Terminal::parse_failed, Terminal::backend_failed};
  try {
    Trajectory t;
    t.item_id = j.at("item_id").get<std::string>();
    t.question = j.at("question").get<std::string>();
    const auto& v = j.at("video");
    t.video = VideoInfo{v.at("id").get<std::string>(), v.at("total_frames").get<FrameIndex>(),
                        v.at("fps").get<double>()};
    t.config = config_from_json(j.at("config"));
    t.initial_indices = j.at("initial_indices").get<std::vector<FrameIndex>>();
    for (const auto& turn : j.at("turns")) t.turns.push_back(turn_from_json(turn));
    for (const auto& c : j.at("executed_calls")) t.executed_calls.push_back(call_from_json(c));
    t.frames_delivered = j.at("frames_delivered").get<std::int64_t>();
    if (!j.at("final_answer").is_null()) t.final_answer = j["final_answer"].get<std::string>();
    t.terminal = enum_from(j.at("terminal"), kTerminals);
    t.failure = j.at("failure").get<std::string>();
    return t;
  } catch (const json::exception& e) {
    throw CorruptRecord(std::string("corrupt trajectory record: ") + e.what());
  }
}

std::string to_record(const Trajectory& t) { return to_json(t).dump(); }

// ---------------------------------------------------------------------------
// Replay

namespace {

class LoggedAgentExecutor final : public AgentExecutor {
 public:
  explicit LoggedAgentExecutor(const Trajectory& log) {
    for (const auto& turn : log.turns) {
      if (turn.tool_result && (turn.tool_result->status == ToolStatus::executed ||
                               turn.tool_result->status == ToolStatus::agent_failed)) {
        results_.push_back(&*turn.tool_result);
      }
    }
  }

  std::vector<Frame> fetch(std::span<const FrameIndex> indices) override {
    std::vector<Frame> out;
    for (auto idx : indices) out.push_back(Frame{idx, {}, {}});
    return out;
  }

  SampleResult execute(const ToolCall& call, const OrchestratorConfig& config) override {
    if (next_ >= results_.size()) throw CorruptRecord("replay log has no result for tool call");
    const auto& r = *results_[next_++];
    if (r.status == ToolStatus::agent_failed) throw BackendError(r.message);
    check_result(call, config, r);
    SampleResult out;
    for (std::size_t i = 0; i < r.indices.size(); ++i) {
      out.frames.push_back(Frame{r.indices[i], {}, {}});
      if (!r.scores.empty()) out.scored.push_back(ScoredFrame{r.indices[i], r.scores[i]});
    }
    return out;
  }

 private:
  // Uniform results are recomputed exactly; clip results can only be checked
  // for shape since their scores need the embedding backend.
  static void check_result(const ToolCall& call, const OrchestratorConfig& config,
                           const ToolResultSummary& r) {
    if (call.name == ToolName::uniform_sample) {
      if (!r.scores.empty() ||
          r.indices != uniform_indices(call.start_frame, call.end_frame, config.uniform_n)) {
        throw CorruptRecord("logged uniform_sample result does not match its call");
      }
      return;
    }
    const bool shape_ok =
        r.scores.size() == r.indices.size() &&
        static_cast<std::int64_t>(r.indices.size()) <= config.clip_n &&
        std::adjacent_find(r.indices.begin(), r.indices.end(), std::greater_equal<>()) ==
            r.indices.end() &&
        std::all_of(r.indices.begin(), r.indices.end(), [&](FrameIndex i) {
          return i >= call.start_frame && i < call.end_frame;
        });
    if (!shape_ok) throw CorruptRecord("logged clip_sample result does not match its call");
  }

  std::vector<const ToolResultSummary*> results_;
  std::size_t next_ = 0;
};

}  // namespace

Trajectory replay_episode(const json& record) {
  const Trajectory log = trajectory_from_json(record);

  std::size_t next = 0;
  FunctionChatBackend chat([&](const std::string&, std::span<const Message>) -> std::string {
    if (next < log.turns.size()) return log.turns[next++].raw_output;
    if (log.terminal == Terminal::backend_failed) throw BackendError(log.failure);
    throw CorruptRecord("replay log exhausted after " + std::to_string(next) + " turns");
  });
  LoggedAgentExecutor agents(log);

  Trajectory replayed;
  try {
    replayed = run_episode(log.item_id, log.question, log.video, chat, agents, log.config);
  } catch (const CorruptRecord&) {
    throw;
  } catch (const std::exception& e) {
    throw CorruptRecord(std::string("replay failed: ") + e.what());
  }
  if (next != log.turns.size()) throw CorruptRecord("replay stopped before the end of the log");
  if (to_json(replayed) != to_json(log)) throw CorruptRecord("replay diverged from the record");
  return replayed;
}

Trajectory replay_episode(std::string_view record) {
  json j;
  try {
    j = json::parse(record);
  } catch (const json::exception& e) {
    throw CorruptRecord(std::string("unparseable trajectory record: ") + e.what());
  }
  return replay_episode(j);
}

}  // namespace framewise
