#pragma once

#include "mconv/expression.hpp"
#include "mconv/types.hpp"

#include <map>
#include <string>
#include <vector>

namespace mconv {

// Sectioned key-value configuration:
//
//   # comment
//   [stokes]
//   averaging = harmonic        # inline comments allowed
//   initial_temperature = z + 0.01*cos(pi*x)*sin(pi*z)
//
// Values stay strings until queried; expression-valued keys are compiled on
// access. Unknown keys are tolerated on parse but can be listed for echo.
class Config {
public:
  Config() = default;

  static Config parse_file(const std::string& path);
  static Config parse_string(const std::string& text);

  bool has(const std::string& section, const std::string& key) const;

  // Throwing accessors (missing key -> Error with section/key in message).
  std::string get_string(const std::string& section, const std::string& key) const;
  double      get_double(const std::string& section, const std::string& key) const;
  int         get_int(const std::string& section, const std::string& key) const;
  bool        get_bool(const std::string& section, const std::string& key) const;

  // Defaulted accessors.
  std::string get_string(const std::string& section, const std::string& key,
                         const std::string& dflt) const;
  double get_double(const std::string& section, const std::string& key, double dflt) const;
  int    get_int(const std::string& section, const std::string& key, int dflt) const;
  bool   get_bool(const std::string& section, const std::string& key, bool dflt) const;

  Expression get_expression(const std::string& section, const std::string& key,
                            const std::string& dflt) const;

  void set(const std::string& section, const std::string& key, const std::string& value);
  void set(const std::string& section, const std::string& key, double value);

  // Serialized form with sections sorted; used for config echo and tests.
  std::string echo() const;

  const std::map<std::string, std::map<std::string, std::string>>& sections() const {
    return data_;
  }

private:
  std::map<std::string, std::map<std::string, std::string>> data_;
};

}  // namespace mconv
