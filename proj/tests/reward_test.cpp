#include <doctest.h>

#include "framewise/error.hpp"
#include "framewise/reward.hpp"
#include "support.hpp"

using namespace framewise;
using namespace framewise::testing;

namespace {

QAItem mc_item() {
  QAItem q;
  q.id = "mc1";
  q.video = "synthetic://5000@30";
  q.question = "Which vehicle appears first?";
  q.options = {{"A", "a bicycle"}, {"B", "a red car"}, {"C", "a bus"}, {"D", "a truck"}};
  q.gold = "B";
  return q;
}

QAItem oe_item() {
  QAItem q;
  q.id = "oe1";
  q.video = "synthetic://5000@30";
  q.question = "Describe the weather.";
  q.answer_type = AnswerType::oe;
  q.gold = "light rain";
  return q;
}

Trajectory episode(std::vector<std::string> script, const QAItem& q = mc_item()) {
  auto chat = scripted(std::move(script));
  HashEmbedder e;
  return run_episode(q, open_video(q.video), chat, e, {});
}

class FixedJudge final : public JudgeBackend {
 public:
  explicit FixedJudge(double score) : score_(score) {}
  double judge_mc(const std::string&, const std::vector<Option>&, const std::string& gold,
                  const std::string& answer) override {
    ++calls;
    return answer == gold ? 1.0 : 0.0;
  }
  double judge_oe(const std::string&, const std::string&, const std::string&) override {
    ++calls;
    return score_;
  }
  int calls = 0;

 private:
  double score_;
};

}  // namespace

TEST_CASE("behavior matrix") {
  struct Cell {
    Category c;
    bool agent, correct;
    double expected;
  };
  const Cell cells[] = {
      {Category::Direct, false, true, 0.5},   {Category::Direct, false, false, 0.0},
      {Category::Direct, true, true, 0.0},    {Category::Direct, true, false, 0.0},
      {Category::Adaptive, false, true, 0.5}, {Category::Adaptive, false, false, 0.0},
      {Category::Adaptive, true, true, 0.5},  {Category::Adaptive, true, false, 0.0},
      {Category::Active, false, true, 0.0},   {Category::Active, false, false, 0.0},
      {Category::Active, true, true, 0.5},    {Category::Active, true, false, 0.2},
  };
  for (const auto& cell : cells) {
    INFO(to_string(cell.c), " agent=", cell.agent, " correct=", cell.correct);
    CHECK(behavior_reward(cell.c, cell.agent, cell.correct) == cell.expected);
  }
}

TEST_CASE("composite totals") {
  const auto q = mc_item();
  SUBCASE("direct correct without agents") {
    const auto t = episode({answer_turn("B")});
    const auto r = total_reward(t, q, Category::Direct, nullptr);
    CHECK(r.format_pass);
    CHECK(r.total == doctest::Approx(1.55).epsilon(1e-12));
  }
  SUBCASE("active wrong with agents") {
    const auto t = episode({clip_turn(0, 5000, "red car"), answer_turn("C")});
    const auto r = total_reward(t, q, Category::Active, nullptr);
    CHECK(r.r_accuracy == 0.0);
    CHECK(r.r_behavior == 0.2);
    CHECK(r.total == doctest::Approx(0.25).epsilon(1e-12));
  }
  SUBCASE("adaptive correct with agents") {
    const auto t = episode({uniform_turn(0, 100), answer_turn("B")});
    CHECK(total_reward(t, q, Category::Adaptive, nullptr).total == doctest::Approx(1.55));
  }
  SUBCASE("direct correct with agents") {
    const auto t = episode({uniform_turn(0, 100), answer_turn("B")});
    CHECK(total_reward(t, q, Category::Direct, nullptr).total == doctest::Approx(1.05));
  }
  SUBCASE("no answer") {
    auto t = episode({uniform_turn(0, 100), uniform_turn(200, 300), uniform_turn(400, 500),
                      uniform_turn(600, 700), uniform_turn(800, 900), uniform_turn(1000, 1100),
                      uniform_turn(1200, 1300)});
    CHECK(t.terminal == Terminal::exhausted_rounds);
    const auto r = total_reward(t, q, Category::Active, nullptr);
    CHECK(r.format_pass);
    CHECK(r.total == doctest::Approx(0.25));
  }
}

TEST_CASE("format failure zeroes the reward") {
  const auto q = mc_item();
  SUBCASE("duplicate clip prompt") {
    const auto t = episode({clip_turn(0, 5000, "red car"), clip_turn(100, 900, "red car"),
                            answer_turn("B")});
    const auto r = total_reward(t, q, Category::Active, nullptr);
    CHECK_FALSE(r.format_pass);
    CHECK(r.violations == std::vector<FormatRule>{FormatRule::duplicate_clip});
    CHECK(r.total == 0.0);
    CHECK(r.r_accuracy == 0.0);
  }
  SUBCASE("unparseable turn") {
    const auto t = episode({"I think B", answer_turn("B")});
    const auto r = total_reward(t, q, Category::Direct, nullptr);
    CHECK_FALSE(r.format_pass);
    CHECK(r.total == 0.0);
  }
}

TEST_CASE("multiple choice extraction") {
  const auto opts = mc_item().options;
  CHECK(extract_option_label("B", opts) == "B");
  CHECK(extract_option_label(" (B). ", opts) == "B");
  CHECK(extract_option_label("The answer is B.", opts) == "B");
  CHECK(extract_option_label("a red car", opts) == "B");
  CHECK(extract_option_label("B. a red car", opts) == "B");
  CHECK_FALSE(extract_option_label("A or B", opts).has_value());
  CHECK_FALSE(extract_option_label("no idea", opts).has_value());

  const auto q = mc_item();
  CHECK(accuracy_reward(q, "The answer is B.", nullptr) == 1.0);
  CHECK(accuracy_reward(q, "C", nullptr) == 0.0);
}

TEST_CASE("judge routing") {
  FixedJudge judge(0.7);
  CHECK(accuracy_reward(oe_item(), "drizzle", &judge) == doctest::Approx(0.7));
  CHECK_THROWS_AS(accuracy_reward(oe_item(), "drizzle", nullptr), Error);

  CHECK(accuracy_reward(mc_item(), "B", &judge) == 1.0);
  CHECK(judge.calls == 1);  // built-in grader handles MC by default
  RewardOptions opts;
  opts.judge_multiple_choice = true;
  CHECK(accuracy_reward(mc_item(), "B", &judge, opts) == 1.0);
  CHECK(judge.calls == 2);

  FixedJudge bad(1.5);
  CHECK_THROWS_AS(accuracy_reward(oe_item(), "x", &bad), BackendError);
}

TEST_CASE("open-ended correctness threshold") {
  FixedJudge judge(0.7);
  const auto q = oe_item();
  const auto t = episode({answer_turn("drizzle")}, q);
  const auto r = total_reward(t, q, Category::Direct, &judge);
  CHECK(r.total == doctest::Approx(0.05 + 0.7 + 0.5));
  FixedJudge low(0.3);
  CHECK(total_reward(t, q, Category::Direct, &low).total == doctest::Approx(0.35));
}

TEST_CASE("reward json round trip") {
  RewardBreakdown r{false, 0, 0, 0, 0, {FormatRule::tag_mismatch, FormatRule::count_equation}};
  CHECK(reward_from_json(to_json(r)) == r);
  RewardBreakdown ok{true, 0.05, 1.0, 0.5, 1.55, {}};
  CHECK(reward_from_json(to_json(ok)) == ok);
}
