#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>

#include "kgqa/prompts.hpp"

namespace kgqa {

struct DecodeParams {
  double temperature = 0.3;
  double top_p = 1.0;
  std::optional<int> max_tokens;
};

struct Completion {
  std::string text;
  std::size_t prompt_tokens = 0;
  std::size_t completion_tokens = 0;
  double wall_seconds = 0.0;
  std::size_t attempts = 1;  // transport attempts behind this completion
};

struct BackendCaps {
  bool json_mode = false;
  std::size_t max_concurrency = 1;
};

/// Any model behind a chat-completion style interface.
class LlmBackend {
 public:
  virtual ~LlmBackend() = default;
  virtual Completion complete(const RenderedPrompt& prompt,
                              const DecodeParams& params) = 0;
  virtual BackendCaps caps() const { return {}; }
  virtual std::string name() const = 0;
};

class BackendError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class AuthError : public BackendError {
 public:
  using BackendError::BackendError;
};

class TimeoutError : public BackendError {
 public:
  using BackendError::BackendError;
};

class MalformedResponse : public BackendError {
 public:
  using BackendError::BackendError;
};

class MockMiss : public BackendError {
 public:
  explicit MockMiss(const std::string& question)
      : BackendError("mock backend has no script for question: " + question) {}
};

class ReplayMiss : public BackendError {
 public:
  explicit ReplayMiss(const std::string& what)
      : BackendError("replay trace has no response for " + what) {}
};

/// Whitespace-delimited token count; the token unit of offline backends.
std::size_t whitespace_tokens(std::string_view text);

}  // namespace kgqa

namespace kgqa::ctx {

// Context keys the engine attaches to rendered prompts.
inline constexpr const char* kQuestion = "question";
inline constexpr const char* kPath = "path";              // arrow form
inline constexpr const char* kPaths = "paths";            // newline-separated
inline constexpr const char* kOpenSlots = "open_slots";
inline constexpr const char* kCandidateCount = "candidate_count";

}  // namespace kgqa::ctx
