#include "framewise/protocol.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <cstdlib>
#include <set>

#include <nlohmann/json.hpp>

namespace framewise {

using nlohmann::json;

namespace {

constexpr std::string_view kThinkOpen = "<thinking>";
constexpr std::string_view kThinkClose = "</thinking>";
constexpr std::string_view kCallOpen = "<tool_call>";
constexpr std::string_view kCallClose = "</tool_call>";
constexpr std::string_view kAnswerOpen = "<answer>";
constexpr std::string_view kAnswerClose = "</answer>";

std::string_view trim(std::string_view s) {
  auto space = [](unsigned char c) { return std::isspace(c) != 0; };
  while (!s.empty() && space(s.front())) s.remove_prefix(1);
  while (!s.empty() && space(s.back())) s.remove_suffix(1);
  return s;
}

std::size_t count_of(std::string_view text, std::string_view needle) {
  std::size_t n = 0;
  for (auto pos = text.find(needle); pos != std::string_view::npos;
       pos = text.find(needle, pos + needle.size())) {
    ++n;
  }
  return n;
}

struct Block {
  std::string_view content;
  std::size_t end;  // one past the closing tag
};

// Block opened at or after `from`; nullopt if the open or close tag is absent.
std::optional<Block> find_block(std::string_view text, std::string_view open,
                                std::string_view close, std::size_t from = 0) {
  const auto o = text.find(open, from);
  if (o == std::string_view::npos) return std::nullopt;
  const auto body = o + open.size();
  const auto c = text.find(close, body);
  if (c == std::string_view::npos) return std::nullopt;
  return Block{text.substr(body, c - body), c + close.size()};
}

ParseError err(ParseErrorKind kind, std::string msg) { return ParseError{kind, std::move(msg)}; }

bool has_exact_keys(const json& obj, std::initializer_list<std::string_view> keys) {
  if (obj.size() != keys.size()) return false;
  return std::all_of(keys.begin(), keys.end(),
                     [&](std::string_view k) { return obj.contains(std::string(k)); });
}

constexpr std::string_view kFormatBlock =
    "Start with <thinking>. Format strictly as:\n"
    "<thinking>...</thinking><tool_call>...</tool_call>\n"
    "or\n"
    "<thinking>...</thinking><answer>...</answer>";

void append_frame_lines(std::string& out, std::span<const FrameIndex> indices) {
  if (indices.empty()) return;
  out += "\n\n";
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (i) out += '\n';
    out += "frame ";
    out += std::to_string(indices[i]);
    out += ": <image>";
  }
}

}  // namespace

std::string_view to_string(ToolName name) {
  return name == ToolName::uniform_sample ? "uniform_sample" : "clip_sample";
}

std::string_view to_string(ParseErrorKind kind) {
  switch (kind) {
    case ParseErrorKind::missing_thinking: return "missing_thinking";
    case ParseErrorKind::empty_thinking: return "empty_thinking";
    case ParseErrorKind::missing_action: return "missing_action";
    case ParseErrorKind::empty_action: return "empty_action";
    case ParseErrorKind::ambiguous_turn: return "ambiguous_turn";
    case ParseErrorKind::bad_json: return "bad_json";
    case ParseErrorKind::bad_schema: return "bad_schema";
    case ParseErrorKind::range_order: return "range_order";
  }
  return "unknown";
}

ToolCallResult parse_tool_call_json(std::string_view body) {
  json doc;
  try {
    doc = json::parse(body);
  } catch (const json::parse_error& e) {
    return err(ParseErrorKind::bad_json, e.what());
  }
  if (!doc.is_object() || !has_exact_keys(doc, {"name", "arguments"})) {
    return err(ParseErrorKind::bad_schema, "tool call must be {\"name\", \"arguments\"}");
  }
  const auto& name = doc["name"];
  const auto& args = doc["arguments"];
  if (!name.is_string() || !args.is_object()) {
    return err(ParseErrorKind::bad_schema, "name must be a string and arguments an object");
  }

  ToolCall call;
  const auto tool = name.get<std::string>();
  if (tool == "uniform_sample") {
    call.name = ToolName::uniform_sample;
    if (!has_exact_keys(args, {"start_frame", "end_frame"})) {
      return err(ParseErrorKind::bad_schema,
                 "uniform_sample takes exactly start_frame and end_frame");
    }
  } else if (tool == "clip_sample") {
    call.name = ToolName::clip_sample;
    if (!has_exact_keys(args, {"start_frame", "end_frame", "prompt"})) {
      return err(ParseErrorKind::bad_schema,
                 "clip_sample takes exactly start_frame, end_frame and prompt");
    }
    const auto& prompt = args["prompt"];
    if (!prompt.is_string() || trim(prompt.get_ref<const std::string&>()).empty()) {
      return err(ParseErrorKind::bad_schema, "clip_sample prompt must be a non-empty string");
    }
    call.prompt = std::string(trim(prompt.get_ref<const std::string&>()));
  } else {
    return err(ParseErrorKind::bad_schema, "unknown tool: " + tool);
  }

  const auto& s = args["start_frame"];
  const auto& e = args["end_frame"];
  if (!s.is_number_integer() || !e.is_number_integer()) {
    return err(ParseErrorKind::bad_schema, "start_frame and end_frame must be integers");
  }
  call.start_frame = s.get<FrameIndex>();
  call.end_frame = e.get<FrameIndex>();
  if (call.start_frame < 0 || call.end_frame < 0) {
    return err(ParseErrorKind::bad_schema, "frame indices must be non-negative");
  }
  if (call.start_frame >= call.end_frame) {
    return err(ParseErrorKind::range_order, "start_frame must be less than end_frame");
  }
  return call;
}

std::string tool_call_json(const ToolCall& call) {
  json args = json::object();
  args["start_frame"] = call.start_frame;
  args["end_frame"] = call.end_frame;
  if (call.name == ToolName::clip_sample) args["prompt"] = call.prompt.value_or("");
  json doc = {{"name", std::string(to_string(call.name))}, {"arguments", std::move(args)}};
  return doc.dump();
}

ParseResult parse_turn(std::string_view text) {
  const auto think_open = text.find(kThinkOpen);
  if (think_open == std::string_view::npos) {
    return err(ParseErrorKind::missing_thinking, "no <thinking> block");
  }
  const auto think = find_block(text, kThinkOpen, kThinkClose, think_open);
  if (!think) return err(ParseErrorKind::missing_thinking, "unterminated <thinking> block");
  const auto thinking = trim(think->content);
  if (thinking.empty()) return err(ParseErrorKind::empty_thinking, "empty <thinking> block");

  const auto rest_from = think->end;
  const auto call_pos = text.find(kCallOpen, rest_from);
  const auto answer_pos = text.find(kAnswerOpen, rest_from);
  if (call_pos != std::string_view::npos && answer_pos != std::string_view::npos) {
    return err(ParseErrorKind::ambiguous_turn, "turn contains both <tool_call> and <answer>");
  }
  if (call_pos == std::string_view::npos && answer_pos == std::string_view::npos) {
    return err(ParseErrorKind::missing_action, "no <tool_call> or <answer> after <thinking>");
  }

  ParsedTurn turn;
  turn.thinking = std::string(thinking);
  if (answer_pos != std::string_view::npos) {
    const auto block = find_block(text, kAnswerOpen, kAnswerClose, answer_pos);
    if (!block) return err(ParseErrorKind::missing_action, "unterminated <answer> block");
    const auto answer = trim(block->content);
    if (answer.empty()) return err(ParseErrorKind::empty_action, "empty <answer> block");
    turn.action = Answer{std::string(answer)};
    turn.trailing = std::string(text.substr(block->end));
    return turn;
  }

  const auto block = find_block(text, kCallOpen, kCallClose, call_pos);
  if (!block) return err(ParseErrorKind::missing_action, "unterminated <tool_call> block");
  const auto body = trim(block->content);
  if (body.empty()) return err(ParseErrorKind::empty_action, "empty <tool_call> block");
  auto call = parse_tool_call_json(body);
  if (auto* e = std::get_if<ParseError>(&call)) return *e;
  turn.action = std::get<ToolCall>(std::move(call));
  turn.trailing = std::string(text.substr(block->end));
  return turn;
}

std::string render_turn(const ParsedTurn& turn) {
  std::string out;
  out += kThinkOpen;
  out += turn.thinking;
  out += kThinkClose;
  if (const auto* a = std::get_if<Answer>(&turn.action)) {
    out += kAnswerOpen;
    out += a->text;
    out += kAnswerClose;
  } else {
    out += kCallOpen;
    out += tool_call_json(std::get<ToolCall>(turn.action));
    out += kCallClose;
  }
  out += turn.trailing;
  return out;
}

bool is_duplicate_call(const ToolCall& call, std::span<const ToolCall> history) {
  return std::any_of(history.begin(), history.end(), [&](const ToolCall& prior) {
    if (prior.name != call.name) return false;
    if (call.name == ToolName::clip_sample) {
      return trim(prior.prompt.value_or("")) == trim(call.prompt.value_or(""));
    }
    return std::llabs(prior.start_frame - call.start_frame) <= 1 &&
           std::llabs(prior.end_frame - call.end_frame) <= 1;
  });
}

namespace {

constexpr std::array<std::string_view, 8> kRuleNames = {
    "tag_mismatch", "empty_content",     "bad_json",       "bad_schema",
    "range_order",  "duplicate_uniform", "duplicate_clip", "count_equation",
};

std::string join_outputs(std::span<const std::string> raw_outputs) {
  std::string all;
  for (std::size_t i = 0; i < raw_outputs.size(); ++i) {
    if (i) all += '\n';
    all += raw_outputs[i];
  }
  return all;
}

class VerdictBuilder {
 public:
  void add(FormatRule rule, std::string detail) {
    rules_.insert(rule);
    details_.push_back(std::string(to_string(rule)) + ": " + std::move(detail));
  }
  bool empty() const { return rules_.empty(); }
  FormatVerdict finish() && {
    FormatVerdict v;
    v.violations.assign(rules_.begin(), rules_.end());
    v.details = std::move(details_);
    v.pass = v.violations.empty();
    return v;
  }

 private:
  std::set<FormatRule> rules_;
  std::vector<std::string> details_;
};

// Checks (a)-(d); returns the schema-valid calls in order.
std::vector<ToolCall> check_structure(std::string_view all, VerdictBuilder* verdict) {
  struct Pair {
    std::string_view open, close, name;
  };
  const std::array<Pair, 3> pairs = {{{kThinkOpen, kThinkClose, "thinking"},
                                      {kCallOpen, kCallClose, "tool_call"},
                                      {kAnswerOpen, kAnswerClose, "answer"}}};

  std::vector<ToolCall> calls;
  std::array<std::size_t, 3> opens{};
  for (std::size_t p = 0; p < pairs.size(); ++p) {
    const auto& [open, close, name] = pairs[p];
    opens[p] = count_of(all, open);
    const auto closes = count_of(all, close);
    if (verdict && opens[p] != closes) {
      verdict->add(FormatRule::tag_mismatch, std::string(name) + " has " +
                                                 std::to_string(opens[p]) + " open and " +
                                                 std::to_string(closes) + " close tags");
    }

    std::size_t from = 0;
    while (auto block = find_block(all, open, close, from)) {
      from = block->end;
      const auto content = trim(block->content);
      if (content.empty()) {
        if (verdict) verdict->add(FormatRule::empty_content, "empty " + std::string(name) + " block");
        continue;
      }
      if (open != kCallOpen) continue;
      auto parsed = parse_tool_call_json(content);
      if (auto* call = std::get_if<ToolCall>(&parsed)) {
        calls.push_back(std::move(*call));
      } else if (verdict) {
        const auto& e = std::get<ParseError>(parsed);
        const auto rule = e.kind == ParseErrorKind::bad_json     ? FormatRule::bad_json
                          : e.kind == ParseErrorKind::range_order ? FormatRule::range_order
                                                                  : FormatRule::bad_schema;
        verdict->add(rule, e.message);
      }
    }
  }

  if (verdict && opens[0] != opens[1] + opens[2]) {
    verdict->add(FormatRule::count_equation,
                 "#thinking=" + std::to_string(opens[0]) + " but #tool_call + #answer=" +
                     std::to_string(opens[1] + opens[2]));
  }
  return calls;
}

void check_duplicates(std::span<const ToolCall> calls, VerdictBuilder& verdict) {
  for (std::size_t i = 0; i < calls.size(); ++i) {
    if (is_duplicate_call(calls[i], calls.first(i))) {
      const bool clip = calls[i].name == ToolName::clip_sample;
      verdict.add(clip ? FormatRule::duplicate_clip : FormatRule::duplicate_uniform,
                  "call " + std::to_string(i + 1) + " repeats an earlier call: " +
                      tool_call_json(calls[i]));
    }
  }
}

}  // namespace

std::string_view to_string(FormatRule rule) { return kRuleNames[static_cast<std::size_t>(rule)]; }

std::optional<FormatRule> format_rule_from_string(std::string_view s) {
  for (std::size_t i = 0; i < kRuleNames.size(); ++i) {
    if (kRuleNames[i] == s) return static_cast<FormatRule>(i);
  }
  return std::nullopt;
}

std::vector<ToolCall> extract_tool_calls(std::span<const std::string> raw_outputs) {
  return check_structure(join_outputs(raw_outputs), nullptr);
}

namespace {

FormatRule rule_for(ParseErrorKind kind) {
  switch (kind) {
    case ParseErrorKind::empty_thinking:
    case ParseErrorKind::empty_action: return FormatRule::empty_content;
    case ParseErrorKind::bad_json: return FormatRule::bad_json;
    case ParseErrorKind::bad_schema: return FormatRule::bad_schema;
    case ParseErrorKind::range_order: return FormatRule::range_order;
    default: return FormatRule::count_equation;
  }
}

// Aggregate counts can balance while a single turn is still malformed, e.g.
// a turn without any tags or with the action before the thinking block. Such
// turns are reported only when nothing else was found.
void check_turns(std::span<const std::string> raw_outputs, VerdictBuilder& verdict) {
  if (!verdict.empty()) return;
  for (std::size_t i = 0; i < raw_outputs.size(); ++i) {
    const auto r = parse_turn(raw_outputs[i]);
    if (const auto* e = std::get_if<ParseError>(&r)) {
      verdict.add(rule_for(e->kind), "turn " + std::to_string(i + 1) + ": " + e->message);
    }
  }
}

}  // namespace

FormatVerdict validate_trajectory_format(std::span<const std::string> raw_outputs,
                                         std::span<const ToolCall> calls) {
  VerdictBuilder verdict;
  check_structure(join_outputs(raw_outputs), &verdict);
  check_duplicates(calls, verdict);
  check_turns(raw_outputs, verdict);
  return std::move(verdict).finish();
}

FormatVerdict validate_trajectory_format(std::span<const std::string> raw_outputs) {
  VerdictBuilder verdict;
  const auto calls = check_structure(join_outputs(raw_outputs), &verdict);
  check_duplicates(calls, verdict);
  check_turns(raw_outputs, verdict);
  return std::move(verdict).finish();
}

// ---------------------------------------------------------------------------

std::string build_system_prompt() {
  return R"(You are a helpful assistant to answer video questions.

You will initially see 16 uniformly sampled frames from the video. These initial frames may not be sufficient to answer the question accurately. You can use the provided tools to gather more targeted frames before answering.

# Tools

You can call one or more functions to assist with the user query, especially when the initial frames are insufficient. You are provided with function signatures within <tools></tools> XML tags:

<tools>
[
  {
    "type": "function",
    "function": {
      "name": "uniform_sample",
      "description": "Uniformly sample 8 frames between start_frame and end_frame.",
      "parameters": { ... }
    }
  },
  {
    "type": "function",
    "function": {
      "name": "clip_sample",
      "description": "Sample 4 frames within the frame range based on semantic relevance to a text prompt.",
      "parameters": { ... }
    }
  }
]
</tools>

# How to call a tool

Return a JSON object with the function name and arguments inside XML tags:

<tool_call>
{"name": "<function-name>", "arguments": { /* params */ }}
</tool_call>

# Instructions
1. When you think there is insufficient information, you can obtain more frames by calling uniform_sample or clip_sample.
2. For problems such as inference, sorting, or summarization, uniform_sample can be considered first.
3. For visual positioning and confirming specific information, clip_sample can be considered as a priority.
4. When using clip_sample, a concise and to-the-point prompt is crucial.)";
}

std::string format_real(double value) {
  char buf[64];
  auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  return ec == std::errc{} ? std::string(buf, p) : std::to_string(value);
}

std::string build_initial_prompt(std::string_view question, FrameIndex total_frames, double fps,
                                 std::span<const FrameIndex> frame_indices) {
  std::string out;
  out += "Question: ";
  out += question;
  out += "\n\n# Video Information:\n- Total frames: ";
  out += std::to_string(total_frames);
  out += "\n- FPS: ";
  out += format_real(fps);
  out += "\n\n# Output Format:\n";
  out += kFormatBlock;
  append_frame_lines(out, frame_indices);
  return out;
}

std::string build_turn_prompt(std::span<const FrameIndex> frame_indices) {
  std::string out(kFormatBlock);
  out += "\n\nBased on sampling, here are the following frames:";
  append_frame_lines(out, frame_indices);
  return out;
}

std::string build_tool_error_prompt(std::string_view reason) {
  std::string out = "Tool error: ";
  out += reason;
  out += "\n\n";
  out += build_turn_prompt({});
  return out;
}

std::string build_forced_answer_prompt() {
  return "You have used all available tool calls. Answer now without tools.\n\n"
         "Start with <thinking>. Format strictly as:\n"
         "<thinking>...</thinking><answer>...</answer>";
}

std::string build_format_retry_prompt(std::string_view reason) {
  std::string out = "Your previous response could not be parsed (";
  out += reason;
  out += ").\n\n";
  out += kFormatBlock;
  return out;
}

}  // namespace framewise
