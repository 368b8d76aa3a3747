#include "mconv/config.hpp"

#include <cctype>
#include <fstream>
#include <sstream>

namespace mconv {

namespace {

std::string trim(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

}  // namespace

Config Config::parse_file(const std::string& path) {
  std::ifstream in(path);
  require(in.good(), "cannot open config file '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  try {
    return parse_string(buf.str());
  } catch (const Error& e) {
    fail(path + ": " + e.what());
  }
}

Config Config::parse_string(const std::string& text) {
  Config cfg;
  std::istringstream in(text);
  std::string line, section;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      require(line.back() == ']', "line " + std::to_string(lineno) +
                                      ": unterminated section header");
      section = trim(line.substr(1, line.size() - 2));
      require(!section.empty(), "line " + std::to_string(lineno) + ": empty section name");
      cfg.data_[section];  // sections may legitimately stay empty
      continue;
    }
    const std::size_t eq = line.find('=');
    require(eq != std::string::npos,
            "line " + std::to_string(lineno) + ": expected 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    require(!key.empty(), "line " + std::to_string(lineno) + ": empty key");
    cfg.data_[section][key] = trim(line.substr(eq + 1));
  }
  return cfg;
}

bool Config::has(const std::string& section, const std::string& key) const {
  const auto s = data_.find(section);
  return s != data_.end() && s->second.count(key) > 0;
}

std::string Config::get_string(const std::string& section, const std::string& key) const {
  const auto s = data_.find(section);
  if (s != data_.end()) {
    const auto k = s->second.find(key);
    if (k != s->second.end()) return k->second;
  }
  fail("missing config entry [" + section + "] " + key);
}

double Config::get_double(const std::string& section, const std::string& key) const {
  const std::string v = get_string(section, key);
  try {
    // Full expression syntax is allowed for numeric values ("1/128", "2e-4").
    return Expression(v)(0, 0, 0);
  } catch (const Error&) {
    fail("config entry [" + section + "] " + key + " = '" + v + "' is not numeric");
  }
}

int Config::get_int(const std::string& section, const std::string& key) const {
  const double v = get_double(section, key);
  const int i = static_cast<int>(v < 0 ? v - 0.5 : v + 0.5);
  require(std::abs(v - i) < 1e-9,
          "config entry [" + section + "] " + key + " must be an integer");
  return i;
}

bool Config::get_bool(const std::string& section, const std::string& key) const {
  const std::string v = get_string(section, key);
  if (v == "true" || v == "yes" || v == "on" || v == "1") return true;
  if (v == "false" || v == "no" || v == "off" || v == "0") return false;
  fail("config entry [" + section + "] " + key + " = '" + v + "' is not a boolean");
}

std::string Config::get_string(const std::string& section, const std::string& key,
                               const std::string& dflt) const {
  return has(section, key) ? get_string(section, key) : dflt;
}

double Config::get_double(const std::string& section, const std::string& key,
                          double dflt) const {
  return has(section, key) ? get_double(section, key) : dflt;
}

int Config::get_int(const std::string& section, const std::string& key, int dflt) const {
  return has(section, key) ? get_int(section, key) : dflt;
}

bool Config::get_bool(const std::string& section, const std::string& key, bool dflt) const {
  return has(section, key) ? get_bool(section, key) : dflt;
}

Expression Config::get_expression(const std::string& section, const std::string& key,
                                  const std::string& dflt) const {
  const std::string v = get_string(section, key, dflt);
  if (v.empty()) return Expression();
  try {
    return Expression(v);
  } catch (const Error& e) {
    fail("config entry [" + section + "] " + key + ": " + e.what());
  }
}

void Config::set(const std::string& section, const std::string& key,
                 const std::string& value) {
  data_[section][key] = value;
}

void Config::set(const std::string& section, const std::string& key, double value) {
  std::ostringstream os;
  os.precision(17);
  os << value;
  data_[section][key] = os.str();
}

std::string Config::echo() const {
  std::ostringstream os;
  bool first = true;
  for (const auto& [section, entries] : data_) {
    if (!first) os << "\n";
    first = false;
    os << "[" << section << "]\n";
    for (const auto& [key, value] : entries) os << key << " = " << value << "\n";
  }
  return os.str();
}

}  // namespace mconv
