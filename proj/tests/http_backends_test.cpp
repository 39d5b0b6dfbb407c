#include <doctest.h>

#include <httplib.h>

#include <thread>

#include "framewise/error.hpp"
#include "framewise/http_backends.hpp"
#include "support.hpp"

using namespace framewise;
using namespace framewise::testing;

namespace {

// In-process OpenAI-compatible server recording the last request bodies.
class FakeServer {
 public:
  FakeServer() {
    server_.Post("/v1/chat/completions", [this](const httplib::Request& req, httplib::Response& res) {
      last_chat = nlohmann::json::parse(req.body);
      auth = req.get_header_value("Authorization");
      nlohmann::json reply = {
          {"choices", {{{"index", 0}, {"message", {{"role", "assistant"}, {"content", chat_reply}}}}}}};
      res.set_content(reply.dump(), "application/json");
    });
    server_.Post("/v1/embeddings", [this](const httplib::Request& req, httplib::Response& res) {
      last_embed = nlohmann::json::parse(req.body);
      nlohmann::json data = nlohmann::json::array();
      const auto n = last_embed.at("input").size();
      // Reverse order with explicit indices.
      for (std::size_t i = n; i-- > 0;) {
        data.push_back({{"index", i}, {"embedding", {static_cast<double>(i) + 1.0, 0.5, -0.5}}});
      }
      res.set_content(nlohmann::json{{"data", data}}.dump(), "application/json");
    });
    server_.Post("/broken/v1/chat/completions", [](const httplib::Request&, httplib::Response& res) {
      res.status = 500;
      res.set_content("oops", "text/plain");
    });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~FakeServer() {
    server_.stop();
    thread_.join();
  }
  std::string url() const { return "http://127.0.0.1:" + std::to_string(port_); }

  nlohmann::json last_chat, last_embed;
  std::string auth;
  std::string chat_reply = "<thinking>t</thinking><answer>A</answer>";

 private:
  httplib::Server server_;
  int port_ = 0;
  std::thread thread_;
};

}  // namespace

TEST_CASE("base64") {
  CHECK(base64_encode("") == "");
  CHECK(base64_encode("f") == "Zg==");
  CHECK(base64_encode("fo") == "Zm8=");
  CHECK(base64_encode("foo") == "Zm9v");
  CHECK(base64_encode("foobar") == "Zm9vYmFy");
  Frame f{3, "abc", "image/jpeg"};
  CHECK(data_url(f) == "data:image/jpeg;base64,YWJj");
}

TEST_CASE("chat request body splits image placeholders") {
  std::vector<Message> msgs{
      Message{Role::user, "look\nframe 0: <image>\nframe 5: <image>", {{0, "a", "image/png"}, {5, "b", "image/png"}}},
      Message{Role::assistant, "reply", {}}};
  const auto body = chat_request_body("m", "sys", msgs);
  CHECK(body["model"] == "m");
  CHECK(body["temperature"] == 0);
  const auto& m = body["messages"];
  REQUIRE(m.size() == 3);
  CHECK(m[0] == nlohmann::json{{"role", "system"}, {"content", "sys"}});
  const auto& parts = m[1]["content"];
  REQUIRE(parts.size() == 4);
  CHECK(parts[0]["text"] == "look\nframe 0: ");
  CHECK(parts[1]["image_url"]["url"] == "data:image/png;base64,YQ==");
  CHECK(parts[2]["text"] == "\nframe 5: ");
  CHECK(parts[3]["type"] == "image_url");
  CHECK(m[2] == nlohmann::json{{"role", "assistant"}, {"content", "reply"}});

  CHECK(chat_request_body("", "", msgs)["messages"].size() == 2);
}

TEST_CASE("response parsing") {
  CHECK(parse_chat_response(nlohmann::json::parse(
            R"({"choices": [{"message": {"content": "hi"}}]})")) == "hi");
  CHECK_THROWS_AS(parse_chat_response(nlohmann::json::parse(R"({"choices": []})")), BackendError);
  const auto e = parse_embeddings_response(
      nlohmann::json::parse(R"({"data": [{"index": 1, "embedding": [2]}, {"index": 0, "embedding": [1]}]})"), 2);
  CHECK(e == std::vector<Embedding>{{1.0}, {2.0}});
  CHECK_THROWS_AS(parse_embeddings_response(nlohmann::json::parse(R"({"data": []})"), 1), BackendError);
}

TEST_CASE("judge templates") {
  const auto mc = render_judge_mc("Q?", {{"A", "x"}, {"B", "y"}}, "B", "y");
  CHECK(mc.find("Q?") != std::string::npos);
  CHECK(mc.find("{question}") == std::string::npos);
  CHECK(std::string(judge_mc_template()) == read_file(source_path("prompts/judge_mc.txt")));
  CHECK(std::string(judge_oe_template()) == read_file(source_path("prompts/judge_oe.txt")));
  CHECK(parse_judge_score("Score: 0.7") == doctest::Approx(0.7));
  CHECK(parse_judge_score("1") == 1.0);
  CHECK_THROWS_AS(parse_judge_score("no number"), BackendError);
}

TEST_CASE("clients against an in-process server") {
  FakeServer server;

  SUBCASE("chat") {
    OpenAIChatBackend chat({server.url() + "/v1", "vlm", "secret", 5.0});
    const std::vector<Message> msgs{Message{Role::user, "frame 1: <image>", {{1, "p", "image/jpeg"}}}};
    CHECK(chat.complete("sys", msgs) == server.chat_reply);
    CHECK(server.auth == "Bearer secret");
    CHECK(server.last_chat["model"] == "vlm");
    CHECK(server.last_chat["messages"][1]["content"][1]["image_url"]["url"] ==
          "data:image/jpeg;base64,cA==");
  }
  SUBCASE("embeddings") {
    OpenAIEmbeddingBackend emb({server.url(), "clip", "", 5.0});
    CHECK(emb.dim() == 0);
    const auto t = emb.embed_text("red car");
    CHECK(t == Embedding{1.0, 0.5, -0.5});
    CHECK(emb.dim() == 3);
    CHECK(server.last_embed["input"] == nlohmann::json::array({"red car"}));
    std::vector<Frame> frames{{0, "a", "image/png"}, {1, "b", "image/png"}};
    const auto imgs = emb.embed_images(frames);
    REQUIRE(imgs.size() == 2);
    CHECK(imgs[1][0] == 2.0);
    CHECK(server.last_embed["input"][0] == "data:image/png;base64,YQ==");
  }
  SUBCASE("judge over chat") {
    server.chat_reply = "0.8";
    OpenAIChatBackend chat({server.url(), "judge", "", 5.0});
    ChatJudgeBackend judge(chat);
    CHECK(judge.judge_oe("Q?", "rain", "drizzle") == doctest::Approx(0.8));
    CHECK(judge.judge_mc("Q?", {{"A", "x"}}, "A", "A") == 1.0);
  }
  SUBCASE("server errors") {
    OpenAIChatBackend broken({server.url() + "/broken", "m", "", 5.0});
    CHECK_THROWS_AS(broken.complete("", {}), BackendError);
  }
}

TEST_CASE("unreachable server") {
  OpenAIChatBackend chat({"http://127.0.0.1:1", "m", "", 1.0});
  CHECK_THROWS_AS(chat.complete("s", {}), BackendError);
}
