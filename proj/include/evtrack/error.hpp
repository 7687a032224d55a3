#pragma once

#include <stdexcept>
#include <string>

namespace evtrack {

/// Invalid configuration or input value; the CLI maps it to exit code 2.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed file contents. `where` holds "line N" or "offset N".
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, std::string where)
      : std::runtime_error(what + " (" + where + ")"), where_(std::move(where)) {}
  const std::string& where() const noexcept { return where_; }

 private:
  std::string where_;
};

/// Failure inside a processing stage at a given frame; exit code 3.
class StageError : public std::runtime_error {
 public:
  StageError(std::string stage, int frame, const std::string& what)
      : std::runtime_error(stage + " failed at frame " + std::to_string(frame) + ": " + what),
        stage_(std::move(stage)),
        frame_(frame) {}
  const std::string& stage() const noexcept { return stage_; }
  int frame() const noexcept { return frame_; }

 private:
  std::string stage_;
  int frame_;
};

}  // namespace evtrack
