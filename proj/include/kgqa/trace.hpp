#pragma once

#include <iosfwd>
#include <mutex>
#include <string_view>
#include <vector>

#include "kgqa/json_repair.hpp"

namespace kgqa {

inline constexpr std::string_view kTraceSchema = "kgqa-trace/1";

class TraceSink {
 public:
  virtual ~TraceSink() = default;
  virtual void write(Json record) = 0;
};

/// Thread-safe in-memory record list.
class MemoryTrace final : public TraceSink {
 public:
  void write(Json record) override;
  std::vector<Json> records() const;

 private:
  mutable std::mutex mu_;
  std::vector<Json> records_;
};

/// Holds records until flushed, so concurrent producers can be serialized
/// into a deterministic order.
class BufferSink final : public TraceSink {
 public:
  void write(Json record) override { records_.push_back(std::move(record)); }
  void flush_to(TraceSink& target);

 private:
  std::vector<Json> records_;
};

void write_jsonl(std::ostream& out, const std::vector<Json>& records);
/// Throws std::runtime_error naming the offending line.
std::vector<Json> read_jsonl(std::istream& in);

}  // namespace kgqa
