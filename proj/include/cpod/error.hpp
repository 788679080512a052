#pragma once

#include <stdexcept>
#include <string>

namespace cpod {

// Error carries a short machine-readable kind ("dimension", "rank", "format",
// "config", ...) next to the human-readable message; the CLI serializes both.
class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& message)
      : std::runtime_error(message), kind_(std::move(kind)) {}

  const std::string& kind() const { return kind_; }

 private:
  std::string kind_;
};

}  // namespace cpod
