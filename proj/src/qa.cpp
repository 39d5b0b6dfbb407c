#include "framewise/qa.hpp"

#include <algorithm>
#include <fstream>
#include <set>

#include <nlohmann/json.hpp>

#include "framewise/error.hpp"

namespace framewise {

using nlohmann::json;

std::string_view to_string(Category c) {
  switch (c) {
    case Category::Direct: return "Direct";
    case Category::Adaptive: return "Adaptive";
    case Category::Active: return "Active";
  }
  return "unknown";
}

std::optional<Category> category_from_string(std::string_view s) {
  for (auto c : {Category::Direct, Category::Adaptive, Category::Active}) {
    if (to_string(c) == s) return c;
  }
  return std::nullopt;
}

std::string QAItem::prompt_text() const {
  if (options.empty()) return question;
  std::string out = question;
  out += "\nOptions:";
  for (const auto& o : options) {
    out += '\n';
    out += o.label;
    out += ". ";
    out += o.text;
  }
  return out;
}

namespace {

std::string required_string(const json& j, const char* key) {
  if (!j.contains(key) || !j[key].is_string() || j[key].get_ref<const std::string&>().empty()) {
    throw SchemaError(std::string("field '") + key + "' must be a non-empty string");
  }
  return j[key].get<std::string>();
}

std::vector<Option> parse_options(const json& j) {
  std::vector<Option> out;
  if (j.is_array()) {
    for (std::size_t i = 0; i < j.size(); ++i) {
      const auto& o = j[i];
      if (o.is_string()) {
        if (i >= 26) throw SchemaError("too many options");
        out.push_back(Option{std::string(1, static_cast<char>('A' + i)), o.get<std::string>()});
      } else if (o.is_object() && o.contains("label") && o["label"].is_string() &&
                 o.contains("text") && o["text"].is_string()) {
        out.push_back(Option{o["label"].get<std::string>(), o["text"].get<std::string>()});
      } else {
        throw SchemaError("options entries must be strings or {label, text} objects");
      }
    }
  } else if (j.is_object()) {
    for (const auto& [label, text] : j.items()) {
      if (!text.is_string()) throw SchemaError("option '" + label + "' must be a string");
      out.push_back(Option{label, text.get<std::string>()});
    }
  } else {
    throw SchemaError("options must be an array or an object");
  }
  std::set<std::string> seen;
  for (const auto& o : out) {
    if (o.label.empty() || !seen.insert(o.label).second) {
      throw SchemaError("option labels must be non-empty and distinct");
    }
  }
  return out;
}

}  // namespace

QAItem item_from_json(const json& j) {
  if (!j.is_object()) throw SchemaError("item must be a JSON object");
  QAItem item;
  item.id = required_string(j, "id");
  item.video = required_string(j, "video");
  item.question = required_string(j, "question");
  const auto type = required_string(j, "type");
  if (type == "mc") {
    item.answer_type = AnswerType::mc;
  } else if (type == "oe") {
    item.answer_type = AnswerType::oe;
  } else {
    throw SchemaError("field 'type' must be \"mc\" or \"oe\"");
  }
  item.gold = required_string(j, "gold");

  if (j.contains("options") && !j["options"].is_null()) item.options = parse_options(j["options"]);
  if (item.answer_type == AnswerType::mc) {
    if (item.options.empty()) throw SchemaError("mc item requires options");
    const bool known = std::any_of(item.options.begin(), item.options.end(),
                                   [&](const Option& o) { return o.label == item.gold; });
    if (!known) throw SchemaError("gold '" + item.gold + "' is not one of the option labels");
  }

  if (j.contains("source")) {
    if (!j["source"].is_string()) throw SchemaError("field 'source' must be a string");
    item.source = j["source"].get<std::string>();
  }
  if (j.contains("category") && !j["category"].is_null()) {
    auto c = j["category"].is_string()
                 ? category_from_string(j["category"].get_ref<const std::string&>())
                 : std::nullopt;
    if (!c) throw SchemaError("field 'category' must be Direct, Adaptive or Active");
    item.category = c;
  }
  if (j.contains("question_category") && !j["question_category"].is_null()) {
    item.question_category = required_string(j, "question_category");
  }
  return item;
}

json to_json(const QAItem& item) {
  json j;
  j["id"] = item.id;
  j["video"] = item.video;
  j["question"] = item.question;
  j["type"] = item.answer_type == AnswerType::mc ? "mc" : "oe";
  if (!item.options.empty()) {
    json opts = json::array();
    for (const auto& o : item.options) opts.push_back({{"label", o.label}, {"text", o.text}});
    j["options"] = std::move(opts);
  }
  j["gold"] = item.gold;
  j["source"] = item.source;
  if (item.category) j["category"] = std::string(to_string(*item.category));
  if (item.question_category) j["question_category"] = *item.question_category;
  return j;
}

std::vector<QAItem> parse_dataset(std::istream& in) {
  std::vector<QAItem> items;
  std::set<std::string> ids;
  std::string line;
  for (std::size_t lineno = 1; std::getline(in, line); ++lineno) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    QAItem item;
    try {
      item = item_from_json(json::parse(line));
    } catch (const json::exception& e) {
      throw SchemaError("line " + std::to_string(lineno) + ": " + e.what());
    } catch (const SchemaError& e) {
      throw SchemaError("line " + std::to_string(lineno) + ": " + e.what());
    }
    if (!ids.insert(item.id).second) {
      throw SchemaError("line " + std::to_string(lineno) + ": duplicate id '" + item.id + "'");
    }
    items.push_back(std::move(item));
  }
  return items;
}

std::vector<QAItem> load_dataset(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open dataset: " + path);
  return parse_dataset(in);
}

}  // namespace framewise
