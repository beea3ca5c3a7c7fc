#include "advdiff/config.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

#include "advdiff/errors.hpp"

namespace advdiff {

namespace {

std::string trim(const std::string& s) {
  std::size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

}  // namespace

Config Config::parse_text(const std::string& text, const std::string& name) {
  Config cfg;
  std::istringstream is(text);
  std::string line;
  std::string section;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') {
        throw ConfigError(name + ":" + std::to_string(lineno) +
                          ": unterminated section header");
      }
      section = trim(line.substr(1, line.size() - 2));
      if (section.empty()) {
        throw ConfigError(name + ":" + std::to_string(lineno) +
                          ": empty section name");
      }
      continue;
    }
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(name + ":" + std::to_string(lineno) +
                        ": expected 'key = value', found '" + line + "'");
    }
    if (section.empty()) {
      throw ConfigError(name + ":" + std::to_string(lineno) +
                        ": key outside any [section]");
    }
    ConfigEntry e;
    e.section = section;
    e.key = trim(line.substr(0, eq));
    e.value = trim(line.substr(eq + 1));
    e.line = lineno;
    if (e.key.empty()) {
      throw ConfigError(name + ":" + std::to_string(lineno) + ": empty key");
    }
    if (cfg.find(e.section, e.key)) {
      throw ConfigError(name + ":" + std::to_string(lineno) +
                        ": duplicate key '" + e.section + "." + e.key + "'");
    }
    cfg.entries_.push_back(std::move(e));
  }
  return cfg;
}

Config Config::parse_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("config: cannot open " + path);
  std::ostringstream buf;
  buf << is.rdbuf();
  return parse_text(buf.str(), path);
}

void Config::overlay(const Config& other) {
  for (const ConfigEntry& e : other.entries_) {
    set(e.section, e.key, e.value);
  }
}

void Config::set(const std::string& section, const std::string& key,
                 const std::string& value) {
  for (ConfigEntry& e : entries_) {
    if (e.section == section && e.key == key) {
      e.value = value;
      return;
    }
  }
  entries_.push_back({section, key, value, 0});
}

const ConfigEntry* Config::find(const std::string& section,
                                const std::string& key) const {
  for (const ConfigEntry& e : entries_) {
    if (e.section == section && e.key == key) return &e;
  }
  return nullptr;
}

std::string ConfigReader::lookup(const std::string& section,
                                 const std::string& key,
                                 const std::string& def, bool required) {
  if (consumed_.size() != cfg_->entries().size()) {
    consumed_.assign(cfg_->entries().size(), false);
  }
  for (std::size_t i = 0; i < cfg_->entries().size(); ++i) {
    const ConfigEntry& e = cfg_->entries()[i];
    if (e.section == section && e.key == key) {
      consumed_[i] = true;
      record(section, key, e.value);
      return e.value;
    }
  }
  if (required) {
    throw ConfigError("config: missing required key '" + section + "." + key +
                      "'");
  }
  record(section, key, def);
  return def;
}

void ConfigReader::record(const std::string& section, const std::string& key,
                          const std::string& value) {
  for (const ConfigEntry& e : resolved_) {
    if (e.section == section && e.key == key) return;
  }
  resolved_.push_back({section, key, value, 0});
}

std::string ConfigReader::get_string(const std::string& section,
                                     const std::string& key,
                                     const std::string& def) {
  return lookup(section, key, def, false);
}

std::string ConfigReader::require_string(const std::string& section,
                                         const std::string& key) {
  return lookup(section, key, "", true);
}

std::uint64_t ConfigReader::get_u64(const std::string& section,
                                    const std::string& key,
                                    std::uint64_t def) {
  const std::string v = lookup(section, key, std::to_string(def), false);
  try {
    std::size_t pos = 0;
    const std::uint64_t out = std::stoull(v, &pos);
    if (pos != v.size()) throw std::invalid_argument("trailing");
    return out;
  } catch (const std::exception&) {
    throw ConfigError("config: key '" + section + "." + key +
                      "' needs an unsigned integer, found '" + v + "'");
  }
}

double ConfigReader::get_double(const std::string& section,
                                const std::string& key, double def) {
  std::ostringstream d;
  d.precision(17);
  d << def;
  const std::string v = lookup(section, key, d.str(), false);
  try {
    std::size_t pos = 0;
    const double out = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument("trailing");
    return out;
  } catch (const std::exception&) {
    throw ConfigError("config: key '" + section + "." + key +
                      "' needs a real number, found '" + v + "'");
  }
}

bool ConfigReader::get_bool(const std::string& section, const std::string& key,
                            bool def) {
  const std::string v = lookup(section, key, def ? "true" : "false", false);
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ConfigError("config: key '" + section + "." + key +
                    "' needs true/false, found '" + v + "'");
}

std::string ConfigReader::get_enum(const std::string& section,
                                   const std::string& key,
                                   const std::string& def,
                                   const std::vector<std::string>& options) {
  const std::string v = lookup(section, key, def, false);
  if (std::find(options.begin(), options.end(), v) != options.end()) return v;
  std::string opts;
  for (const std::string& o : options) {
    if (!opts.empty()) opts += "|";
    opts += o;
  }
  throw ConfigError("config: key '" + section + "." + key + "' must be one of " +
                    opts + ", found '" + v + "'");
}

std::vector<std::size_t> ConfigReader::get_sizes(
    const std::string& section, const std::string& key,
    const std::vector<std::size_t>& def) {
  std::ostringstream d;
  for (std::size_t i = 0; i < def.size(); ++i) {
    if (i) d << ",";
    d << def[i];
  }
  const std::string v = lookup(section, key, d.str(), false);
  std::vector<std::size_t> out;
  std::istringstream is(v);
  std::string tok;
  try {
    while (std::getline(is, tok, ',')) {
      out.push_back(static_cast<std::size_t>(std::stoull(trim(tok))));
    }
  } catch (const std::exception&) {
    throw ConfigError("config: key '" + section + "." + key +
                      "' needs a comma-separated size list, found '" + v +
                      "'");
  }
  if (out.empty()) {
    throw ConfigError("config: key '" + section + "." + key +
                      "' needs at least one entry");
  }
  return out;
}

void ConfigReader::reject_unknown() const {
  std::string complaints;
  for (std::size_t i = 0; i < cfg_->entries().size(); ++i) {
    if (consumed_.size() == cfg_->entries().size() && consumed_[i]) continue;
    const ConfigEntry& e = cfg_->entries()[i];
    if (!complaints.empty()) complaints += "; ";
    complaints += "'" + e.section + "." + e.key + "'";
    if (e.line > 0) complaints += " (line " + std::to_string(e.line) + ")";
  }
  if (!complaints.empty()) {
    throw ConfigError("config: unknown key(s) " + complaints);
  }
}

std::string ConfigReader::render_resolved() const {
  std::ostringstream os;
  // group by section in first-use order
  std::vector<std::string> sections;
  for (const ConfigEntry& e : resolved_) {
    if (std::find(sections.begin(), sections.end(), e.section) ==
        sections.end()) {
      sections.push_back(e.section);
    }
  }
  for (const std::string& s : sections) {
    os << "[" << s << "]\n";
    for (const ConfigEntry& e : resolved_) {
      if (e.section == s) os << e.key << " = " << e.value << "\n";
    }
    os << "\n";
  }
  return os.str();
}

}  // namespace advdiff
