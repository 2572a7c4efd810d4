#include "dcsr/config.hpp"

#include <cctype>
#include <charconv>
#include <fstream>
#include <sstream>

#include "dcsr/error.hpp"

namespace dcsr {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

class LineParser {
 public:
  LineParser(std::string_view text, std::size_t line) : s_(text), line_(line) {}

  nlohmann::json value() {
    skip_ws();
    if (pos_ >= s_.size()) fail("missing value");
    const char c = s_[pos_];
    if (c == '"') return string_value();
    if (c == '[') return array_value();
    return scalar_value();
  }

  void expect_end() {
    skip_ws();
    if (pos_ < s_.size() && s_[pos_] != '#') fail("unexpected trailing text");
  }

  [[noreturn]] void fail(const std::string& what) const {
    throw ConfigError("config line " + std::to_string(line_) + ": " + what);
  }

 private:
  void skip_ws() {
    while (pos_ < s_.size() && (s_[pos_] == ' ' || s_[pos_] == '\t')) ++pos_;
  }

  nlohmann::json string_value() {
    ++pos_;
    std::string out;
    while (pos_ < s_.size() && s_[pos_] != '"') {
      char c = s_[pos_++];
      if (c == '\\') {
        if (pos_ >= s_.size()) fail("unterminated escape");
        const char e = s_[pos_++];
        switch (e) {
          case 'n': c = '\n'; break;
          case 't': c = '\t'; break;
          case '"': c = '"'; break;
          case '\\': c = '\\'; break;
          default: fail(std::string("unsupported escape \\") + e);
        }
      }
      out.push_back(c);
    }
    if (pos_ >= s_.size()) fail("unterminated string");
    ++pos_;
    return out;
  }

  nlohmann::json array_value() {
    ++pos_;
    nlohmann::json arr = nlohmann::json::array();
    for (;;) {
      skip_ws();
      if (pos_ >= s_.size()) fail("unterminated array");
      if (s_[pos_] == ']') {
        ++pos_;
        return arr;
      }
      arr.push_back(value());
      skip_ws();
      if (pos_ < s_.size() && s_[pos_] == ',') ++pos_;
      else if (pos_ < s_.size() && s_[pos_] != ']') fail("expected ',' or ']' in array");
    }
  }

  nlohmann::json scalar_value() {
    const std::size_t start = pos_;
    while (pos_ < s_.size() && s_[pos_] != ',' && s_[pos_] != ']' && s_[pos_] != '#' && s_[pos_] != ' ' &&
           s_[pos_] != '\t')
      ++pos_;
    std::string tok(s_.substr(start, pos_ - start));
    if (tok == "true") return true;
    if (tok == "false") return false;
    std::string digits;
    for (char c : tok)
      if (c != '_') digits.push_back(c);
    const bool is_float = digits.find_first_of(".eE") != std::string::npos || digits == "inf" || digits == "nan";
    if (!is_float) {
      long long v = 0;
      const char* b = digits.data() + (digits.size() > 0 && digits[0] == '+' ? 1 : 0);
      auto [p, ec] = std::from_chars(b, digits.data() + digits.size(), v);
      if (ec == std::errc() && p == digits.data() + digits.size()) return v;
    } else {
      try {
        std::size_t used = 0;
        const double v = std::stod(digits, &used);
        if (used == digits.size()) return v;
      } catch (const std::exception&) {
      }
    }
    fail("cannot parse value '" + tok + "'");
  }

  std::string_view s_;
  std::size_t line_;
  std::size_t pos_ = 0;
};

nlohmann::json::json_pointer pointer_for(const std::string& dotted, std::size_t line) {
  nlohmann::json::json_pointer ptr;
  std::size_t start = 0;
  for (;;) {
    const std::size_t dot = dotted.find('.', start);
    const std::string part(trim(std::string_view(dotted).substr(start, dot == std::string::npos ? dotted.npos : dot - start)));
    if (part.empty()) throw ConfigError("config line " + std::to_string(line) + ": empty key segment");
    ptr /= part;
    if (dot == std::string::npos) return ptr;
    start = dot + 1;
  }
}

}  // namespace

nlohmann::json parse_toml(std::string_view text) {
  nlohmann::json root = nlohmann::json::object();
  nlohmann::json::json_pointer section;
  std::istringstream in{std::string(text)};
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    std::string_view line = trim(raw);
    if (line.empty() || line.front() == '#') continue;
    if (line.front() == '[') {
      const auto close = line.find(']');
      if (close == std::string_view::npos) throw ConfigError("config line " + std::to_string(line_no) + ": unterminated section header");
      LineParser(line.substr(close + 1), line_no).expect_end();
      section = pointer_for(std::string(line.substr(1, close - 1)), line_no);
      if (root.contains(section) && !root[section].is_object())
        throw ConfigError("config line " + std::to_string(line_no) + ": section clashes with a key");
      root[section] = root.value(section, nlohmann::json::object());
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw ConfigError("config line " + std::to_string(line_no) + ": expected key = value");
    const std::string key(trim(line.substr(0, eq)));
    LineParser p(line.substr(eq + 1), line_no);
    nlohmann::json v = p.value();
    p.expect_end();
    const auto ptr = section / pointer_for(key, line_no);
    if (root.contains(ptr)) throw ConfigError("config line " + std::to_string(line_no) + ": duplicate key '" + key + "'");
    root[ptr] = std::move(v);
  }
  return root;
}

nlohmann::json load_config_file(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw ConfigError("cannot open config " + file.string());
  std::stringstream ss;
  ss << in.rdbuf();
  if (file.extension() == ".json") {
    try {
      return nlohmann::json::parse(ss.str());
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError("config " + file.string() + ": " + e.what());
    }
  }
  return parse_toml(ss.str());
}

}  // namespace dcsr
