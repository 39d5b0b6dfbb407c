#include <doctest.h>

#include <random>

#include "framewise/protocol.hpp"
#include "support.hpp"

using namespace framewise;
using namespace framewise::testing;

namespace {

ParsedTurn must_parse(std::string_view text) {
  auto r = parse_turn(text);
  REQUIRE_MESSAGE(std::holds_alternative<ParsedTurn>(r), std::string(text));
  return std::get<ParsedTurn>(r);
}

ParseErrorKind must_fail(std::string_view text) {
  auto r = parse_turn(text);
  REQUIRE_MESSAGE(std::holds_alternative<ParseError>(r), std::string(text));
  return std::get<ParseError>(r).kind;
}

std::vector<std::string> rule_names(const FormatVerdict& v) {
  std::vector<std::string> out;
  for (auto r : v.violations) out.emplace_back(to_string(r));
  return out;
}

}  // namespace

TEST_CASE("parse answer turn") {
  const auto t = must_parse("<thinking>The frames show it.</thinking><answer>B</answer>");
  CHECK(t.thinking == "The frames show it.");
  REQUIRE(is_answer(t));
  CHECK(std::get<Answer>(t.action).text == "B");
}

TEST_CASE("parse clip_sample tool call") {
  const auto t = must_parse(
      "<thinking>Find the crane.</thinking><tool_call>{\"name\": \"clip_sample\", \"arguments\": "
      "{\"start_frame\": 0, \"end_frame\": 209000, \"prompt\": \"crane status\"}}</tool_call>");
  REQUIRE(std::holds_alternative<ToolCall>(t.action));
  const auto& c = std::get<ToolCall>(t.action);
  CHECK(c.name == ToolName::clip_sample);
  CHECK(c.start_frame == 0);
  CHECK(c.end_frame == 209000);
  REQUIRE(c.prompt.has_value());
  CHECK(*c.prompt == "crane status");
}

TEST_CASE("parse uniform_sample tool call") {
  const auto t = must_parse(uniform_turn(18947, 19277));
  const auto& c = std::get<ToolCall>(t.action);
  CHECK(c.name == ToolName::uniform_sample);
  CHECK(c.start_frame == 18947);
  CHECK(c.end_frame == 19277);
  CHECK_FALSE(c.prompt.has_value());
}

TEST_CASE("parse failures") {
  CHECK(must_fail("<answer>B</answer>") == ParseErrorKind::missing_thinking);
  CHECK(must_fail("<thinking>  </thinking><answer>B</answer>") == ParseErrorKind::empty_thinking);
  CHECK(must_fail("<thinking>x</thinking>") == ParseErrorKind::missing_action);
  CHECK(must_fail("<thinking>x</thinking><answer> </answer>") == ParseErrorKind::empty_action);
  CHECK(must_fail("<thinking>x</thinking><tool_call>{not json}</tool_call>") ==
        ParseErrorKind::bad_json);
  CHECK(must_fail("<thinking>x</thinking><tool_call>{\"name\": \"uniform_sample\", \"arguments\": "
                  "{\"start_frame\": 10, \"end_frame\": 5}}</tool_call>") ==
        ParseErrorKind::range_order);
  CHECK(must_fail("<thinking>x</thinking><tool_call>{\"name\": \"uniform_sample\", \"arguments\": "
                  "{\"start_frame\": 5, \"end_frame\": 5}}</tool_call>") ==
        ParseErrorKind::range_order);
  CHECK(must_fail("<thinking>x</thinking><tool_call>{\"name\": \"uniform_sample\", \"arguments\": "
                  "{\"start_frame\": 0, \"end_frame\": 5}}</tool_call><answer>B</answer>") ==
        ParseErrorKind::ambiguous_turn);
}

TEST_CASE("tool call schema") {
  auto kind = [](std::string_view body) {
    auto r = parse_tool_call_json(body);
    return std::holds_alternative<ParseError>(r) ? std::get<ParseError>(r).kind
                                                 : ParseErrorKind::missing_thinking;
  };
  CHECK(kind(R"({"name": "zoom", "arguments": {"start_frame": 0, "end_frame": 5}})") ==
        ParseErrorKind::bad_schema);
  CHECK(kind(R"({"name": "uniform_sample", "arguments": {"start_frame": 0, "end_frame": 5, "x": 1}})") ==
        ParseErrorKind::bad_schema);
  CHECK(kind(R"({"name": "uniform_sample", "arguments": {"start_frame": 0.5, "end_frame": 5}})") ==
        ParseErrorKind::bad_schema);
  CHECK(kind(R"({"name": "uniform_sample", "arguments": {"start_frame": -1, "end_frame": 5}})") ==
        ParseErrorKind::bad_schema);
  CHECK(kind(R"({"name": "clip_sample", "arguments": {"start_frame": 0, "end_frame": 5}})") ==
        ParseErrorKind::bad_schema);
  CHECK(kind(R"({"name": "clip_sample", "arguments": {"start_frame": 0, "end_frame": 5, "prompt": "   "}})") ==
        ParseErrorKind::bad_schema);
  CHECK(kind(R"({"name": "uniform_sample", "arguments": {"start_frame": 0, "end_frame": 5, "prompt": "a"}})") ==
        ParseErrorKind::bad_schema);
  CHECK(kind(R"([1, 2])") == ParseErrorKind::bad_schema);

  auto ok = parse_tool_call_json(
      R"({"name": "clip_sample", "arguments": {"start_frame": 3, "end_frame": 50, "prompt": "  red car "}})");
  REQUIRE(std::holds_alternative<ToolCall>(ok));
  CHECK(*std::get<ToolCall>(ok).prompt == "red car");
}

TEST_CASE("duplicate detection") {
  const ToolCall u{ToolName::uniform_sample, 100, 200, std::nullopt};
  const std::vector<ToolCall> hist{u};
  CHECK(is_duplicate_call({ToolName::uniform_sample, 101, 199, std::nullopt}, hist));
  CHECK(is_duplicate_call({ToolName::uniform_sample, 99, 201, std::nullopt}, hist));
  CHECK_FALSE(is_duplicate_call({ToolName::uniform_sample, 102, 200, std::nullopt}, hist));
  CHECK_FALSE(is_duplicate_call({ToolName::uniform_sample, 100, 198, std::nullopt}, hist));

  const ToolCall c{ToolName::clip_sample, 0, 1000, std::string("red car")};
  const std::vector<ToolCall> chist{c};
  CHECK(is_duplicate_call({ToolName::clip_sample, 50, 60, std::string("red car")}, chist));
  CHECK_FALSE(is_duplicate_call({ToolName::clip_sample, 0, 1000, std::string("Red car")}, chist));
  // Tools never duplicate each other.
  CHECK_FALSE(is_duplicate_call({ToolName::uniform_sample, 0, 1000, std::nullopt}, chist));
  CHECK_FALSE(is_duplicate_call(u, {}));
}

TEST_CASE("render and parse round trip") {
  std::mt19937_64 rng(5);
  const char* words[] = {"alpha", "beta", "red car", "the \"quoted\" one", "x<y", "sky\nline"};
  for (int i = 0; i < 300; ++i) {
    ParsedTurn t;
    t.thinking = std::string(words[rng() % 6]) + " " + std::to_string(i);
    switch (rng() % 3) {
      case 0:
        t.action = Answer{std::string(words[rng() % 6])};
        break;
      case 1: {
        const FrameIndex s = static_cast<FrameIndex>(rng() % 100000);
        t.action = ToolCall{ToolName::uniform_sample, s, s + 1 + static_cast<FrameIndex>(rng() % 5000),
                            std::nullopt};
        break;
      }
      default: {
        const FrameIndex s = static_cast<FrameIndex>(rng() % 100000);
        t.action = ToolCall{ToolName::clip_sample, s, s + 1 + static_cast<FrameIndex>(rng() % 5000),
                            std::string(words[rng() % 6])};
      }
    }
    const auto text = render_turn(t);
    CHECK(must_parse(text) == t);
    const std::vector<std::string> one{text};
    CHECK(validate_trajectory_format(one).pass);
  }
}

TEST_CASE("format gate corpus") {
  std::ifstream in(source_path("tests/fixtures/format_gate.jsonl"));
  REQUIRE(in);
  std::string line;
  int cases = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto j = nlohmann::json::parse(line);
    const auto outputs = j.at("outputs").get<std::vector<std::string>>();
    const auto expected = j.at("expected").get<std::vector<std::string>>();
    const auto verdict = validate_trajectory_format(outputs);
    INFO(j.at("name").get<std::string>());
    CHECK(rule_names(verdict) == expected);
    CHECK(verdict.pass == expected.empty());
    if (verdict.pass) {
      // A passing trajectory parses turn by turn.
      for (const auto& o : outputs) CHECK(std::holds_alternative<ParsedTurn>(parse_turn(o)));
    }
    ++cases;
  }
  CHECK(cases >= 30);
}

TEST_CASE("format rule names round trip") {
  for (int r = 0; r <= static_cast<int>(FormatRule::count_equation); ++r) {
    const auto rule = static_cast<FormatRule>(r);
    CHECK(format_rule_from_string(to_string(rule)) == rule);
  }
  CHECK_FALSE(format_rule_from_string("nope").has_value());
}

TEST_CASE("prompt goldens") {
  CHECK(build_system_prompt() == read_file(source_path("prompts/system.txt")));
  const std::vector<FrameIndex> initial{31, 93, 156, 218, 281, 343, 406, 468,
                                        531, 593, 656, 718, 781, 843, 906, 968};
  CHECK(build_initial_prompt("What is the maid doing from 13:11-13:24?", 1000, 23.97, initial) ==
        read_file(source_path("prompts/initial_example.txt")));
  CHECK(uniform_indices(0, 1000, 16) == initial);
  const std::vector<FrameIndex> turn{100, 200};
  CHECK(build_turn_prompt(turn) == read_file(source_path("prompts/turn_example.txt")));
}

TEST_CASE("prompt helpers") {
  CHECK(format_real(23.97) == "23.97");
  CHECK(format_real(30.0) == "30");
  CHECK(format_real(29.97002997002997) == "29.97002997002997");
  const auto err = build_tool_error_prompt("duplicate call");
  CHECK(err.rfind("Tool error: duplicate call\n\n", 0) == 0);
  CHECK(build_forced_answer_prompt().find("<answer>") != std::string::npos);
  CHECK(build_format_retry_prompt("bad_json").find("bad_json") != std::string::npos);
  CHECK(build_turn_prompt({}).find("frame ") == std::string::npos);
}
