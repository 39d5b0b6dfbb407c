#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "framewise/frame_store.hpp"

namespace framewise {

// ---------------------------------------------------------------------------
// Tool calls and parsed turns
// ---------------------------------------------------------------------------

enum class ToolName { uniform_sample, clip_sample };

std::string_view to_string(ToolName name);

struct ToolCall {
  ToolName name = ToolName::uniform_sample;
  FrameIndex start_frame = 0;
  FrameIndex end_frame = 0;
  std::optional<std::string> prompt;  // set (trimmed, non-empty) iff clip_sample

  bool operator==(const ToolCall&) const = default;
};

struct Answer {
  std::string text;
  bool operator==(const Answer&) const = default;
};

using Action = std::variant<ToolCall, Answer>;

struct ParsedTurn {
  std::string thinking;
  Action action;
  std::string trailing;  // anything after the action block, kept for the log

  bool operator==(const ParsedTurn&) const = default;
};

enum class ParseErrorKind {
  missing_thinking,
  empty_thinking,
  missing_action,
  empty_action,
  ambiguous_turn,
  bad_json,
  bad_schema,
  range_order,
};

std::string_view to_string(ParseErrorKind kind);

struct ParseError {
  ParseErrorKind kind = ParseErrorKind::missing_thinking;
  std::string message;
};

using ParseResult = std::variant<ParsedTurn, ParseError>;
using ToolCallResult = std::variant<ToolCall, ParseError>;

// First thinking block, then the first tool_call or answer block after it.
// A turn carrying both a tool_call and an answer is rejected as ambiguous.
ParseResult parse_turn(std::string_view text);

// Schema check for the JSON body of a <tool_call> block. Extra fields,
// non-integer frames, and an empty clip prompt are schema violations.
ToolCallResult parse_tool_call_json(std::string_view body);

std::string tool_call_json(const ToolCall& call);

// Canonical text form of a turn; parse_turn(render_turn(t)) == t for turns
// with trimmed fields and no trailing text.
std::string render_turn(const ParsedTurn& turn);

inline bool is_answer(const ParsedTurn& t) { return std::holds_alternative<Answer>(t.action); }

// ---------------------------------------------------------------------------
// Duplicate detection and the trajectory format gate
// ---------------------------------------------------------------------------

// uniform_sample: some earlier uniform call within +-1 on both endpoints.
// clip_sample: some earlier clip call with a byte-identical (trimmed) prompt.
bool is_duplicate_call(const ToolCall& call, std::span<const ToolCall> history);

enum class FormatRule {
  tag_mismatch,
  empty_content,
  bad_json,
  bad_schema,
  range_order,
  duplicate_uniform,
  duplicate_clip,
  count_equation,
};

std::string_view to_string(FormatRule rule);
std::optional<FormatRule> format_rule_from_string(std::string_view s);

struct FormatVerdict {
  bool pass = true;
  std::vector<FormatRule> violations;  // distinct, in FormatRule order
  std::vector<std::string> details;    // human-readable, one per finding
};

// Schema-valid tool calls found in the raw outputs, in order of appearance.
std::vector<ToolCall> extract_tool_calls(std::span<const std::string> raw_outputs);

// Gate over the concatenated turn texts. `calls` is the sequence scanned for
// duplicates.
FormatVerdict validate_trajectory_format(std::span<const std::string> raw_outputs,
                                         std::span<const ToolCall> calls);

// Same gate, scanning for duplicates over extract_tool_calls(raw_outputs).
FormatVerdict validate_trajectory_format(std::span<const std::string> raw_outputs);

// ---------------------------------------------------------------------------
// Prompt templates
// ---------------------------------------------------------------------------

std::string build_system_prompt();

// One `frame {idx}: <image>` line per index; images are attached by the
// caller in the same order.
std::string build_initial_prompt(std::string_view question, FrameIndex total_frames, double fps,
                                 std::span<const FrameIndex> frame_indices);

std::string build_turn_prompt(std::span<const FrameIndex> frame_indices);

// Recoverable failure of a tool call (duplicate, budget, bad range).
std::string build_tool_error_prompt(std::string_view reason);

// Sent once after the round limit is reached.
std::string build_forced_answer_prompt();

// Sent once after an unparseable turn.
std::string build_format_retry_prompt(std::string_view reason);

// Shortest decimal form that round-trips, as used for the FPS line.
std::string format_real(double value);

}  // namespace framewise
