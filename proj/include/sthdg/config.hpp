#pragma once

#include <iosfwd>
#include <map>
#include <stdexcept>
#include <string>

namespace sthdg {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// key = value lines with optional [section] headers; '#' and ';' start
// comments. Keys come back as "section.key", or "key" before any section.
std::map<std::string, std::string> parse_config(std::istream& is);
std::map<std::string, std::string> load_config(const std::string& path);

}  // namespace sthdg
