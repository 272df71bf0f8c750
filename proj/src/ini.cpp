#include "evtes/ini.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <sstream>

namespace evtes {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split_ws(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i]))) ++i;
    std::size_t j = i;
    while (j < s.size() && !std::isspace(static_cast<unsigned char>(s[j]))) ++j;
    if (j > i) out.push_back(s.substr(i, j - i));
    i = j;
  }
  return out;
}

// `key = value` or several `k=v` tokens on one line.
void parse_assignments(std::string_view body, IniSection& section, const std::string& where) {
  body = trim(body);
  if (body.empty()) return;
  const auto eq_count = std::count(body.begin(), body.end(), '=');
  if (eq_count == 0) throw ConfigError(where + ": expected key=value, got '" + std::string(body) + "'");
  if (eq_count == 1) {
    const auto eq = body.find('=');
    const auto key = trim(body.substr(0, eq));
    const auto value = trim(body.substr(eq + 1));
    if (key.empty()) throw ConfigError(where + ": empty key");
    section.set(std::string(key), std::string(value));
    return;
  }
  for (auto token : split_ws(body)) {
    const auto eq = token.find('=');
    if (eq == std::string_view::npos || eq == 0)
      throw ConfigError(where + ": malformed token '" + std::string(token) + "'");
    section.set(std::string(token.substr(0, eq)), std::string(token.substr(eq + 1)));
  }
}

}  // namespace

std::string format_double(double value) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  if (ec != std::errc{}) throw std::runtime_error("format_double: conversion failed");
  return std::string(buf, ptr);
}

double parse_double(std::string_view text, std::string_view what) {
  text = trim(text);
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc{} || ptr != text.data() + text.size())
    throw ConfigError(std::string(what) + ": not a number: '" + std::string(text) + "'");
  return value;
}

void IniSection::set(const std::string& key, const std::string& value) {
  for (auto& [k, v] : entries_) {
    if (k == key) {
      v = value;
      return;
    }
  }
  entries_.emplace_back(key, value);
}

bool IniSection::has(std::string_view key) const {
  return std::any_of(entries_.begin(), entries_.end(), [&](const auto& e) { return e.first == key; });
}

std::optional<std::string> IniSection::raw(std::string_view key) const {
  for (const auto& [k, v] : entries_) {
    if (k == key) {
      used_.insert(k);
      return v;
    }
  }
  return std::nullopt;
}

std::string IniSection::get_string(std::string_view key) const {
  auto v = raw(key);
  if (!v) throw ConfigError("[" + name_ + "] missing key '" + std::string(key) + "'");
  return *v;
}

std::string IniSection::get_string(std::string_view key, const std::string& fallback) const {
  auto v = raw(key);
  return v ? *v : fallback;
}

double IniSection::get_double(std::string_view key) const {
  return parse_double(get_string(key), "[" + name_ + "] " + std::string(key));
}

double IniSection::get_double(std::string_view key, double fallback) const {
  auto v = raw(key);
  return v ? parse_double(*v, "[" + name_ + "] " + std::string(key)) : fallback;
}

long long IniSection::get_int(std::string_view key) const {
  const auto text = get_string(key);
  long long value = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc{} || ptr != text.data() + text.size())
    throw ConfigError("[" + name_ + "] " + std::string(key) + ": not an integer: '" + text + "'");
  return value;
}

long long IniSection::get_int(std::string_view key, long long fallback) const {
  return has(key) ? get_int(key) : fallback;
}

bool IniSection::get_bool(std::string_view key, bool fallback) const {
  auto v = raw(key);
  if (!v) return fallback;
  std::string s = *v;
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
  if (s == "false" || s == "0" || s == "no" || s == "off") return false;
  throw ConfigError("[" + name_ + "] " + std::string(key) + ": not a boolean: '" + *v + "'");
}

std::vector<double> IniSection::get_double_list(std::string_view key) const {
  const auto text = get_string(key);
  std::vector<double> out;
  std::string_view rest = text;
  while (!rest.empty()) {
    const auto comma = rest.find(',');
    const auto item = trim(rest.substr(0, comma));
    if (!item.empty()) out.push_back(parse_double(item, "[" + name_ + "] " + std::string(key)));
    if (comma == std::string_view::npos) break;
    rest.remove_prefix(comma + 1);
  }
  return out;
}

void IniSection::reject_unknown() const {
  for (const auto& [k, v] : entries_) {
    if (!used_.count(k)) throw ConfigError("[" + name_ + "] unknown key '" + k + "'");
  }
}

IniDocument IniDocument::parse(std::string_view text, const std::string& origin) {
  IniDocument doc;
  IniSection* current = nullptr;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto nl = text.find('\n', pos);
    auto line = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    ++line_no;
    const auto where = origin + ":" + std::to_string(line_no);

    const auto hash = line.find_first_of("#;");
    if (hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;

    if (line.front() == '[') {
      const auto close = line.find(']');
      if (close == std::string_view::npos) throw ConfigError(where + ": unterminated section header");
      const auto name = trim(line.substr(1, close - 1));
      if (name.empty()) throw ConfigError(where + ": empty section name");
      if (doc.find(name)) throw ConfigError(where + ": duplicate section [" + std::string(name) + "]");
      doc.sections_.emplace_back(std::string(name));
      current = &doc.sections_.back();
      parse_assignments(line.substr(close + 1), *current, where);
      continue;
    }
    if (!current) throw ConfigError(where + ": key outside of any section");
    parse_assignments(line, *current, where);
  }
  return doc;
}

IniDocument IniDocument::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse(ss.str(), path);
}

const IniSection* IniDocument::find(std::string_view name) const {
  for (const auto& s : sections_)
    if (s.name() == name) return &s;
  return nullptr;
}

IniSection* IniDocument::find(std::string_view name) {
  for (auto& s : sections_)
    if (s.name() == name) return &s;
  return nullptr;
}

IniSection& IniDocument::ensure(const std::string& name) {
  if (auto* s = find(name)) return *s;
  sections_.emplace_back(name);
  return sections_.back();
}

std::string IniDocument::to_string() const {
  std::ostringstream out;
  bool first = true;
  for (const auto& s : sections_) {
    if (!first) out << '\n';
    first = false;
    out << '[' << s.name() << "]\n";
    for (const auto& [k, v] : s.entries()) out << k << " = " << v << '\n';
  }
  return out.str();
}

}  // namespace evtes
