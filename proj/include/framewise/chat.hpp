#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "framewise/frame_store.hpp"

namespace framewise {

enum class Role { user, assistant };

// One conversation message. `text` carries a `<image>` placeholder for each
// attached frame, in order.
struct Message {
  Role role = Role::user;
  std::string text;
  std::vector<Frame> images;
};

// Vision-language model contract. Implementations throw BackendError on
// timeout or transport failure.
class ChatBackend {
 public:
  virtual ~ChatBackend() = default;
  virtual std::string complete(const std::string& system, std::span<const Message> messages) = 0;
};

// Backend driven by a callback; the scripted policies in tests and the
// replay path are built on this.
class FunctionChatBackend final : public ChatBackend {
 public:
  using Policy = std::function<std::string(const std::string& system, std::span<const Message>)>;

  explicit FunctionChatBackend(Policy policy) : policy_(std::move(policy)) {}

  std::string complete(const std::string& system, std::span<const Message> messages) override {
    return policy_(system, messages);
  }

 private:
  Policy policy_;
};

}  // namespace framewise
