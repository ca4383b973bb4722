#pragma once

#include <optional>
#include <stdexcept>
#include <string>

namespace patchy {

/// Failure raised anywhere in the solver. `stage` names the pipeline step
/// (e.g. "scalar_hjb", "albrekht", "build_ring"); `patch` is set when the
/// failure is tied to a specific patch.
class Error : public std::runtime_error {
 public:
  Error(std::string stage, const std::string& what, std::optional<int> patch = std::nullopt)
      : std::runtime_error(format(stage, what, patch)), stage_(std::move(stage)), message_(what), patch_(patch) {}

  const std::string& stage() const noexcept { return stage_; }
  /// Message without the stage/patch prefix.
  const std::string& message() const noexcept { return message_; }
  std::optional<int> patch() const noexcept { return patch_; }

 private:
  static std::string format(const std::string& stage, const std::string& what,
                            std::optional<int> patch) {
    std::string msg = "[" + stage;
    if (patch) msg += " patch=" + std::to_string(*patch);
    msg += "] " + what;
    return msg;
  }

  std::string stage_;
  std::string message_;
  std::optional<int> patch_;
};

}  // namespace patchy
