#ifndef TACTILE_HAND_CONFIG_HPP_
#define TACTILE_HAND_CONFIG_HPP_

// Structured text configuration: INI-style sections with dotted names for
// nesting ("[randomization.kp]"), "key = value" lines, '#' comments.
// Values are kept as strings; typed access parses on read. Doubles are
// written with 17 significant digits so a write/read cycle is exact.

#include <charconv>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "tactile_hand/common.hpp"

namespace tactile_hand {

class Config {
 public:
  using Section = std::map<std::string, std::string>;

  static Config parse(std::istream& in) {
    Config cfg;
    std::string line;
    std::string section;
    int line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      const auto hash = line.find('#');
      if (hash != std::string::npos) line.erase(hash);
      line = trim(line);
      if (line.empty()) continue;
      if (line.front() == '[') {
        if (line.back() != ']') {
          throw ConfigError("config line " + std::to_string(line_no) +
                            ": unterminated section header");
        }
        section = trim(line.substr(1, line.size() - 2));
        cfg.sections_[section];
        continue;
      }
      const auto eq = line.find('=');
      if (eq == std::string::npos) {
        throw ConfigError("config line " + std::to_string(line_no) +
                          ": expected key = value");
      }
      cfg.sections_[section][trim(line.substr(0, eq))] =
          trim(line.substr(eq + 1));
    }
    return cfg;
  }

  static Config parse_string(const std::string& text) {
    std::istringstream in(text);
    return parse(in);
  }

  static Config load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    return parse(in);
  }

  void write(std::ostream& out) const {
    bool first = true;
    for (const auto& [name, entries] : sections_) {
      if (!first) out << '\n';
      first = false;
      if (!name.empty()) out << '[' << name << "]\n";
      for (const auto& [key, value] : entries) {
        out << key << " = " << value << '\n';
      }
    }
  }

  void save(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write config file: " + path);
    write(out);
  }

  std::string to_string() const {
    std::ostringstream out;
    write(out);
    return out.str();
  }

  bool has(const std::string& section, const std::string& key) const {
    const auto it = sections_.find(section);
    return it != sections_.end() && it->second.count(key) > 0;
  }

  bool has_section(const std::string& section) const {
    return sections_.count(section) > 0;
  }

  std::string get_string(const std::string& section, const std::string& key,
                         const std::string& fallback) const {
    if (!has(section, key)) return fallback;
    return sections_.at(section).at(key);
  }

  double get_double(const std::string& section, const std::string& key,
                    double fallback) const {
    if (!has(section, key)) return fallback;
    return to_double(section, key, sections_.at(section).at(key));
  }

  long long get_int(const std::string& section, const std::string& key,
                    long long fallback) const {
    if (!has(section, key)) return fallback;
    const std::string& s = sections_.at(section).at(key);
    long long v = 0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
      throw ConfigError("[" + section + "] " + key + ": not an integer: " + s);
    }
    return v;
  }

  bool get_bool(const std::string& section, const std::string& key,
                bool fallback) const {
    if (!has(section, key)) return fallback;
    const std::string& s = sections_.at(section).at(key);
    if (s == "true" || s == "1" || s == "yes") return true;
    if (s == "false" || s == "0" || s == "no") return false;
    throw ConfigError("[" + section + "] " + key + ": not a boolean: " + s);
  }

  // Comma separated list of doubles.
  std::vector<double> get_list(const std::string& section,
                               const std::string& key,
                               std::vector<double> fallback) const {
    if (!has(section, key)) return fallback;
    std::vector<double> out;
    std::stringstream ss(sections_.at(section).at(key));
    std::string item;
    while (std::getline(ss, item, ',')) {
      out.push_back(to_double(section, key, trim(item)));
    }
    return out;
  }

  void set(const std::string& section, const std::string& key,
           const std::string& value) {
    sections_[section][key] = value;
  }
  void set(const std::string& section, const std::string& key,
           const char* value) {
    set(section, key, std::string(value));
  }
  void set(const std::string& section, const std::string& key, double value) {
    set(section, key, format_double(value));
  }
  void set(const std::string& section, const std::string& key, int value) {
    set(section, key, std::to_string(value));
  }
  void set(const std::string& section, const std::string& key,
           long long value) {
    set(section, key, std::to_string(value));
  }
  void set(const std::string& section, const std::string& key, bool value) {
    set(section, key, std::string(value ? "true" : "false"));
  }
  void set_list(const std::string& section, const std::string& key,
                const std::vector<double>& values) {
    std::string s;
    for (std::size_t i = 0; i < values.size(); ++i) {
      if (i) s += ", ";
      s += format_double(values[i]);
    }
    set(section, key, s);
  }

  // Overlay: entries of other replace entries here.
  void merge(const Config& other) {
    for (const auto& [name, entries] : other.sections_) {
      for (const auto& [key, value] : entries) sections_[name][key] = value;
    }
  }

  const std::map<std::string, Section>& sections() const { return sections_; }

  bool operator==(const Config& other) const {
    return sections_ == other.sections_;
  }

  static std::string format_double(double v) {
    std::ostringstream out;
    out << std::setprecision(17) << v;
    return out.str();
  }

 private:
  static std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
  }

  static double to_double(const std::string& section, const std::string& key,
                          const std::string& s) {
    try {
      std::size_t used = 0;
      const double v = std::stod(s, &used);
      if (used != s.size()) throw std::invalid_argument(s);
      return v;
    } catch (const std::exception&) {
      throw ConfigError("[" + section + "] " + key + ": not a number: " + s);
    }
  }

  std::map<std::string, Section> sections_;
};

}  // namespace tactile_hand

#endif  // TACTILE_HAND_CONFIG_HPP_
