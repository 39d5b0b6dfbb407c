#include "framewise/http_backends.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdlib>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "framewise/error.hpp"

namespace framewise {

using nlohmann::json;

std::string base64_encode(std::string_view bytes) {
  static constexpr char kAlphabet[] =
      "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";
  std::string out;
  out.reserve((bytes.size() + 2) / 3 * 4);
  std::size_t i = 0;
  for (; i + 2 < bytes.size(); i += 3) {
    const auto n = (static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[i])) << 16) |
                   (static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[i + 1])) << 8) |
                   static_cast<unsigned char>(bytes[i + 2]);
    out += kAlphabet[(n >> 18) & 63];
    out += kAlphabet[(n >> 12) & 63];
    out += kAlphabet[(n >> 6) & 63];
    out += kAlphabet[n & 63];
  }
  if (const auto rest = bytes.size() - i; rest > 0) {
    std::uint32_t n = static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[i])) << 16;
    if (rest == 2) n |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[i + 1])) << 8;
    out += kAlphabet[(n >> 18) & 63];
    out += kAlphabet[(n >> 12) & 63];
    out += rest == 2 ? kAlphabet[(n >> 6) & 63] : '=';
    out += '=';
  }
  return out;
}

std::string data_url(const Frame& frame) {
  const auto type = frame.media_type.empty() ? std::string("image/jpeg") : frame.media_type;
  return "data:" + type + ";base64," + base64_encode(frame.payload);
}

json chat_request_body(const std::string& model, const std::string& system,
                       std::span<const Message> messages) {
  constexpr std::string_view kPlaceholder = "<image>";
  json msgs = json::array();
  if (!system.empty()) msgs.push_back({{"role", "system"}, {"content", system}});
  for (const auto& m : messages) {
    if (m.role == Role::assistant) {
      msgs.push_back({{"role", "assistant"}, {"content", m.text}});
      continue;
    }
    json parts = json::array();
    auto add_text = [&](std::string_view t) {
      if (!t.empty()) parts.push_back({{"type", "text"}, {"text", std::string(t)}});
    };
    auto add_image = [&](const Frame& f) {
      parts.push_back({{"type", "image_url"}, {"image_url", {{"url", data_url(f)}}}});
    };
    std::string_view text = m.text;
    std::size_t next_image = 0;
    for (auto pos = text.find(kPlaceholder);
         pos != std::string_view::npos && next_image < m.images.size();
         pos = text.find(kPlaceholder)) {
      add_text(text.substr(0, pos));
      add_image(m.images[next_image++]);
      text.remove_prefix(pos + kPlaceholder.size());
    }
    add_text(text);
    for (; next_image < m.images.size(); ++next_image) add_image(m.images[next_image]);
    msgs.push_back({{"role", "user"}, {"content", std::move(parts)}});
  }
  json body = {{"messages", std::move(msgs)}, {"temperature", 0}};
  if (!model.empty()) body["model"] = model;
  return body;
}

json embeddings_request_body(const std::string& model, const std::vector<std::string>& inputs) {
  json body = {{"input", inputs}};
  if (!model.empty()) body["model"] = model;
  return body;
}

std::vector<Embedding> parse_embeddings_response(const json& body, std::size_t expected) {
  try {
    const auto& data = body.at("data");
    if (!data.is_array() || data.size() != expected) {
      throw BackendError("embeddings response has " + std::to_string(data.size()) +
                         " entries, expected " + std::to_string(expected));
    }
    std::vector<Embedding> out(expected);
    std::vector<bool> filled(expected, false);
    for (std::size_t i = 0; i < data.size(); ++i) {
      const auto slot = data[i].contains("index") ? data[i]["index"].get<std::size_t>() : i;
      if (slot >= expected || filled[slot]) throw BackendError("bad index in embeddings response");
      out[slot] = data[i].at("embedding").get<Embedding>();
      filled[slot] = true;
    }
    return out;
  } catch (const json::exception& e) {
    throw BackendError(std::string("malformed embeddings response: ") + e.what());
  }
}

std::string parse_chat_response(const json& body) {
  try {
    const auto& content = body.at("choices").at(0).at("message").at("content");
    if (content.is_string()) return content.get<std::string>();
    // Some servers return content as an array of text parts.
    std::string out;
    for (const auto& part : content) {
      if (part.value("type", "") == "text") out += part.at("text").get<std::string>();
    }
    return out;
  } catch (const json::exception& e) {
    throw BackendError(std::string("malformed chat response: ") + e.what());
  }
}

namespace {

struct Target {
  std::string origin;  // scheme://host[:port]
  std::string path;    // full request path
};

Target resolve(const std::string& url, std::string_view route) {
  const auto scheme = url.find("://");
  if (scheme == std::string::npos || url.compare(0, scheme, "http") != 0) {
    throw BackendError("endpoint must be an http:// URL: " + url);
  }
  const auto slash = url.find('/', scheme + 3);
  Target t;
  t.origin = url.substr(0, slash);
  std::string prefix = slash == std::string::npos ? "" : url.substr(slash);
  while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();
  if (prefix.size() >= 3 && prefix.compare(prefix.size() - 3, 3, "/v1") == 0) {
    prefix.resize(prefix.size() - 3);
  }
  t.path = prefix + "/v1/" + std::string(route);
  return t;
}

json post_json(const Endpoint& endpoint, std::string_view route, const json& body) {
  const auto target = resolve(endpoint.url, route);
  httplib::Client client(target.origin);
  const auto secs = static_cast<time_t>(endpoint.timeout_seconds);
  const auto usecs = static_cast<time_t>((endpoint.timeout_seconds - static_cast<double>(secs)) * 1e6);
  client.set_connection_timeout(secs, usecs);
  client.set_read_timeout(secs, usecs);
  client.set_write_timeout(secs, usecs);
  httplib::Headers headers;
  if (!endpoint.api_key.empty()) headers.emplace("Authorization", "Bearer " + endpoint.api_key);

  auto res = client.Post(target.path, headers, body.dump(), "application/json");
  if (!res) {
    throw BackendError("request to " + target.origin + target.path +
                       " failed: " + httplib::to_string(res.error()));
  }
  if (res->status != 200) {
    throw BackendError("request to " + target.path + " returned HTTP " +
                       std::to_string(res->status) + ": " + res->body.substr(0, 200));
  }
  try {
    return json::parse(res->body);
  } catch (const json::exception& e) {
    throw BackendError(std::string("response is not JSON: ") + e.what());
  }
}

}  // namespace

std::string OpenAIChatBackend::complete(const std::string& system,
                                        std::span<const Message> messages) {
  return parse_chat_response(
      post_json(endpoint_, "chat/completions", chat_request_body(endpoint_.model, system, messages)));
}

std::vector<Embedding> OpenAIEmbeddingBackend::embed(const std::vector<std::string>& inputs) {
  auto out = parse_embeddings_response(
      post_json(endpoint_, "embeddings", embeddings_request_body(endpoint_.model, inputs)),
      inputs.size());
  for (const auto& e : out) {
    std::size_t known = 0;
    if (!dim_.compare_exchange_strong(known, e.size()) && known != e.size()) {
      throw BackendError("embedding dimension changed from " + std::to_string(known) + " to " +
                         std::to_string(e.size()));
    }
  }
  return out;
}

Embedding OpenAIEmbeddingBackend::embed_text(const std::string& text) {
  return std::move(embed({text}).front());
}

std::vector<Embedding> OpenAIEmbeddingBackend::embed_images(std::span<const Frame> frames) {
  if (frames.empty()) return {};
  std::vector<std::string> inputs;
  inputs.reserve(frames.size());
  for (const auto& f : frames) inputs.push_back(data_url(f));
  return embed(inputs);
}

// ---------------------------------------------------------------------------
// Judge

std::string_view judge_mc_template() {
  return R"(You are grading an answer to a multiple-choice video question.

Question: {question}
Options:
{options}
Correct option: {gold}
Model answer: {answer}

Reply with 1 if the model answer selects the correct option and 0 otherwise. Reply with the single digit only.)";
}

std::string_view judge_oe_template() {
  return R"(You are grading an answer to an open-ended video question.

Question: {question}
Reference answer: {gold}
Model answer: {answer}

Rate how well the model answer agrees in meaning with the reference answer on a scale from 0 to 1, where 1 means fully equivalent and 0 means unrelated or wrong. Reply with the number only.)";
}

namespace {

std::string substitute(std::string_view tmpl,
                       std::initializer_list<std::pair<std::string_view, std::string>> values) {
  std::string out;
  std::size_t i = 0;
  while (i < tmpl.size()) {
    bool replaced = false;
    if (tmpl[i] == '{') {
      for (const auto& [key, value] : values) {
        if (tmpl.compare(i + 1, key.size(), key) == 0 && i + 1 + key.size() < tmpl.size() &&
            tmpl[i + 1 + key.size()] == '}') {
          out += value;
          i += key.size() + 2;
          replaced = true;
          break;
        }
      }
    }
    if (!replaced) out += tmpl[i++];
  }
  return out;
}

}  // namespace

std::string render_judge_mc(const std::string& question, const std::vector<Option>& options,
                            const std::string& gold, const std::string& answer) {
  std::string opts;
  for (std::size_t i = 0; i < options.size(); ++i) {
    if (i) opts += '\n';
    opts += options[i].label + ". " + options[i].text;
  }
  return substitute(judge_mc_template(),
                    {{"question", question}, {"options", opts}, {"gold", gold}, {"answer", answer}});
}

std::string render_judge_oe(const std::string& question, const std::string& gold,
                            const std::string& answer) {
  return substitute(judge_oe_template(),
                    {{"question", question}, {"gold", gold}, {"answer", answer}});
}

double parse_judge_score(std::string_view reply) {
  for (std::size_t i = 0; i < reply.size(); ++i) {
    if (!std::isdigit(static_cast<unsigned char>(reply[i]))) continue;
    const std::string tail(reply.substr(i));
    char* end = nullptr;
    const double v = std::strtod(tail.c_str(), &end);
    if (end != tail.c_str() && std::isfinite(v)) return v;
  }
  throw BackendError("judge reply has no score: " + std::string(reply.substr(0, 80)));
}

double ChatJudgeBackend::judge_mc(const std::string& question, const std::vector<Option>& options,
                                  const std::string& gold, const std::string& answer) {
  const std::vector<Message> msgs{
      Message{Role::user, render_judge_mc(question, options, gold, answer), {}}};
  return parse_judge_score(chat_.complete("", msgs)) >= 0.5 ? 1.0 : 0.0;
}

double ChatJudgeBackend::judge_oe(const std::string& question, const std::string& gold,
                                  const std::string& answer) {
  const std::vector<Message> msgs{Message{Role::user, render_judge_oe(question, gold, answer), {}}};
  return std::clamp(parse_judge_score(chat_.complete("", msgs)), 0.0, 1.0);
}

}  // namespace framewise
