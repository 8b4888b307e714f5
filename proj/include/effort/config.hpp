#pragma once

#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "effort/protocol.hpp"

namespace effort {

/// Parse or validation failure; line is 0 when no single line is at fault.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string source, int line, const std::string& msg);
  const std::string& source() const { return source_; }
  int line() const { return line_; }

 private:
  std::string source_;
  int line_;
};

struct IniEntry {
  std::string value;
  int line = 0;
};

/// section -> key -> entry. Keys outside any section live under "".
using IniDocument = std::map<std::string, std::map<std::string, IniEntry>>;

IniDocument parse_ini(const std::string& text, const std::string& source = "<string>");

SessionConfig session_config_from_ini(const IniDocument& doc,
                                      const std::string& source = "<string>");
SessionConfig parse_session_config(const std::string& text,
                                   const std::string& source = "<string>");
SessionConfig load_session_config(const std::filesystem::path& path);

/// Round-trippable text form of a config.
std::string to_ini(const SessionConfig& cfg);

}  // namespace effort
