#pragma once

#include <atomic>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "framewise/chat.hpp"
#include "framewise/embedding.hpp"
#include "framewise/reward.hpp"

namespace framewise {

// An OpenAI-compatible server. `url` is the server root, with or without a
// trailing "/v1"; https is not supported.
struct Endpoint {
  std::string url;
  std::string model;
  std::string api_key;
  double timeout_seconds = 120.0;
};

std::string base64_encode(std::string_view bytes);
std::string data_url(const Frame& frame);

// Request bodies, exposed so the wire format can be checked without a server.
nlohmann::json chat_request_body(const std::string& model, const std::string& system,
                                 std::span<const Message> messages);
nlohmann::json embeddings_request_body(const std::string& model,
                                       const std::vector<std::string>& inputs);

// Parses `data[i].embedding`, honouring `data[i].index` when present.
std::vector<Embedding> parse_embeddings_response(const nlohmann::json& body, std::size_t expected);
std::string parse_chat_response(const nlohmann::json& body);

// POST /v1/chat/completions
class OpenAIChatBackend final : public ChatBackend {
 public:
  explicit OpenAIChatBackend(Endpoint endpoint) : endpoint_(std::move(endpoint)) {}
  std::string complete(const std::string& system, std::span<const Message> messages) override;

 private:
  Endpoint endpoint_;
};

// POST /v1/embeddings. Images travel as base64 data URLs. The dimension is
// learned from the first response unless given up front.
class OpenAIEmbeddingBackend final : public EmbeddingBackend {
 public:
  explicit OpenAIEmbeddingBackend(Endpoint endpoint, std::size_t dim = 0)
      : endpoint_(std::move(endpoint)), dim_(dim) {}

  Embedding embed_text(const std::string& text) override;
  std::vector<Embedding> embed_images(std::span<const Frame> frames) override;
  std::size_t dim() const override { return dim_.load(); }

 private:
  std::vector<Embedding> embed(const std::vector<std::string>& inputs);

  Endpoint endpoint_;
  std::atomic<std::size_t> dim_;
};

// Grading templates; `{question}`, `{options}`, `{gold}` and `{answer}` are
// substituted. Mirrored by prompts/judge_mc.txt and prompts/judge_oe.txt.
std::string_view judge_mc_template();
std::string_view judge_oe_template();
std::string render_judge_mc(const std::string& question, const std::vector<Option>& options,
                            const std::string& gold, const std::string& answer);
std::string render_judge_oe(const std::string& question, const std::string& gold,
                            const std::string& answer);

// First number in a judge reply, or throws BackendError.
double parse_judge_score(std::string_view reply);

// LLM-as-judge over a chat backend.
class ChatJudgeBackend final : public JudgeBackend {
 public:
  explicit ChatJudgeBackend(ChatBackend& chat) : chat_(chat) {}

  double judge_mc(const std::string& question, const std::vector<Option>& options,
                  const std::string& gold, const std::string& answer) override;
  double judge_oe(const std::string& question, const std::string& gold,
                  const std::string& answer) override;

 private:
  ChatBackend& chat_;
};

}  // namespace framewise
