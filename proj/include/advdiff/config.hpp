#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace advdiff {

// Flat sectioned key=value text. '#' starts a comment, keys are unique
// per section, and every key a command does not recognize is a hard
// error (naming the key and its line).
struct ConfigEntry {
  std::string section;
  std::string key;
  std::string value;
  std::size_t line = 0;  // 0 for programmatic defaults
};

class Config {
 public:
  static Config parse_file(const std::string& path);
  static Config parse_text(const std::string& text, const std::string& name);

  // later entries win; used to layer a user file over a preset
  void overlay(const Config& other);
  void set(const std::string& section, const std::string& key,
           const std::string& value);
  const ConfigEntry* find(const std::string& section,
                          const std::string& key) const;
  const std::vector<ConfigEntry>& entries() const { return entries_; }

 private:
  std::vector<ConfigEntry> entries_;
};

// Typed access that records everything it resolves (explicit value or
// default) and remembers which file entries were consumed, so unknown
// keys can be rejected and the fully resolved config written back.
class ConfigReader {
 public:
  explicit ConfigReader(const Config& cfg) : cfg_(&cfg) {}

  std::string get_string(const std::string& section, const std::string& key,
                         const std::string& def);
  std::string require_string(const std::string& section,
                             const std::string& key);
  std::uint64_t get_u64(const std::string& section, const std::string& key,
                        std::uint64_t def);
  double get_double(const std::string& section, const std::string& key,
                    double def);
  bool get_bool(const std::string& section, const std::string& key, bool def);
  // value must be one of the given options
  std::string get_enum(const std::string& section, const std::string& key,
                       const std::string& def,
                       const std::vector<std::string>& options);
  std::vector<std::size_t> get_sizes(const std::string& section,
                                     const std::string& key,
                                     const std::vector<std::size_t>& def);

  // throws ConfigError when any file entry was never consumed
  void reject_unknown() const;
  // resolved entries in consumption order, rendered as a config file
  std::string render_resolved() const;

 private:
  std::string lookup(const std::string& section, const std::string& key,
                     const std::string& def, bool required);
  void record(const std::string& section, const std::string& key,
              const std::string& value);

  const Config* cfg_;
  std::vector<ConfigEntry> resolved_;
  std::vector<bool> consumed_ = {};
};

}  // namespace advdiff
