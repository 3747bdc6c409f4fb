#include "mia/convert.hpp"

#include <fstream>
#include <functional>
#include <sstream>

#include "json.hpp"
#include "mia/errors.hpp"
#include "mia/text.hpp"

namespace mia::convert {

using nlohmann::json;

namespace {

void for_each_json_line(const std::filesystem::path& path,
                        const std::function<void(const json&, std::size_t)>& fn) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open " + path.string());
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (text::trim(line).empty()) continue;
    try {
      fn(json::parse(line), line_no);
    } catch (const json::exception& e) {
      throw ConfigError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
}

Label binary_label(const json& v) {
  int x = v.is_string() ? std::stoi(v.get<std::string>()) : v.get<int>();
  if (x != 0 && x != 1) throw ConfigError("label must be 0 or 1, got " + v.dump());
  return x == 1 ? Label::member : Label::non_member;
}

std::string id_part(const json& v) { return v.is_string() ? v.get<std::string>() : v.dump(); }

std::vector<std::string> read_texts(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  std::string body = buf.str();
  std::vector<std::string> out;
  auto first = text::trim(body);
  if (!first.empty() && first.front() == '[') {
    try {
      for (const auto& v : json::parse(first)) out.push_back(v.is_string() ? v.get<std::string>() : v.at("text").get<std::string>());
    } catch (const json::exception& e) {
      throw ConfigError(path.string() + ": " + e.what());
    }
    return out;
  }
  for_each_json_line(path, [&](const json& j, std::size_t) {
    out.push_back(j.is_string() ? j.get<std::string>() : j.at("text").get<std::string>());
  });
  return out;
}

}  // namespace

std::vector<Document> wikimia(const std::filesystem::path& path) {
  std::vector<Document> docs;
  for_each_json_line(path, [&](const json& j, std::size_t) {
    Document d;
    d.id = "wikimia-" + std::to_string(docs.size());
    d.text = j.at("input").get<std::string>();
    d.label = binary_label(j.at("label"));
    d.source = "wikimia";
    docs.push_back(std::move(d));
  });
  return docs;
}

std::vector<Document> bookmia(const std::filesystem::path& path) {
  std::vector<Document> docs;
  for_each_json_line(path, [&](const json& j, std::size_t) {
    Document d;
    d.id = id_part(j.at("book_id")) + "-" + id_part(j.at("snippet_id"));
    d.text = j.at("snippet").get<std::string>();
    d.label = binary_label(j.at("label"));
    d.source = j.value("book", std::string("bookmia"));
    docs.push_back(std::move(d));
  });
  return docs;
}

std::vector<Document> mimir(const std::filesystem::path& members, const std::filesystem::path& non_members) {
  std::vector<Document> docs;
  auto add = [&](const std::filesystem::path& path, Label label, const char* prefix) {
    std::size_t n = 0;
    for (auto& t : read_texts(path)) {
      Document d;
      d.id = std::string(prefix) + std::to_string(n++);
      d.text = std::move(t);
      d.label = label;
      d.source = "mimir";
      docs.push_back(std::move(d));
    }
  };
  add(members, Label::member, "member-");
  add(non_members, Label::non_member, "nonmember-");
  return docs;
}

}  // namespace mia::convert
