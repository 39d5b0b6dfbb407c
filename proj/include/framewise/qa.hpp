#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace framewise {

enum class Category { Direct, Adaptive, Active };

std::string_view to_string(Category c);
std::optional<Category> category_from_string(std::string_view s);

enum class AnswerType { mc, oe };

struct Option {
  std::string label;  // "A", "B", ...
  std::string text;
  bool operator==(const Option&) const = default;
};

struct QAItem {
  std::string id;
  std::string video;  // locator passed to open_video
  std::string question;
  AnswerType answer_type = AnswerType::mc;
  std::vector<Option> options;  // non-empty iff mc
  std::string gold;             // option label for mc, reference text for oe
  std::optional<Category> category;
  std::optional<std::string> question_category;  // benchmark tag, e.g. "temporal"
  std::string source;

  // Question text as shown to the model; options are listed one per line.
  std::string prompt_text() const;

  bool operator==(const QAItem&) const = default;
};

// Throws SchemaError describing the first violated field.
QAItem item_from_json(const nlohmann::json& j);
nlohmann::json to_json(const QAItem& item);

// JSONL, one item per non-blank line. Errors name the offending line and
// duplicate ids are rejected.
std::vector<QAItem> parse_dataset(std::istream& in);
std::vector<QAItem> load_dataset(const std::string& path);

}  // namespace framewise
