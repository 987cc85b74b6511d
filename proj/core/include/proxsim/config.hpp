/// Scenario configuration files: flat dotted keys with units in the names,
/// e.g. `uwb.inlier_sigma_m = 0.01`.  `#` starts a comment.  Unknown keys are
/// rejected with their line number — silent typos in noise parameters are the
/// classic way to invalidate an estimation experiment.
#pragma once

#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace proxsim {

struct ConfigError : std::runtime_error {
  ConfigError(const std::string& msg, int line_number = 0)
      : std::runtime_error(line_number > 0 ? msg + " (line " + std::to_string(line_number) + ")"
                                           : msg),
        line(line_number) {}
  int line;
};

class ConfigFile {
 public:
  static ConfigFile parse_file(const std::string& path);
  static ConfigFile parse_string(const std::string& text,
                                 const std::string& source_name = "<string>");

  bool has(const std::string& key) const;

  // Typed getters mark the key as consumed; the *_or forms fall back to a
  // default when the key is absent.
  double get_double(const std::string& key) const;
  double get_double_or(const std::string& key, double fallback) const;
  int get_int(const std::string& key) const;
  int get_int_or(const std::string& key, int fallback) const;
  bool get_bool_or(const std::string& key, bool fallback) const;
  std::string get_string_or(const std::string& key, const std::string& fallback) const;
  std::vector<double> get_double_list(const std::string& key) const;
  std::vector<double> get_double_list_or(const std::string& key,
                                         const std::vector<double>& fallback) const;

  /// Throws ConfigError naming every key that no getter touched.
  void require_all_consumed() const;

  const std::string& source_name() const { return source_; }

 private:
  struct Entry {
    std::string raw;
    int line;
    mutable bool consumed{false};
  };
  std::map<std::string, Entry> entries_;
  std::string source_;

  const Entry* find(const std::string& key) const;
  const Entry& require(const std::string& key) const;
};

}  // namespace proxsim
