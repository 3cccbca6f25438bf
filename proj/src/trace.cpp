#include "kgqa/trace.hpp"

#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>

#include "kgqa/text.hpp"

namespace kgqa {

void MemoryTrace::write(Json record) {
  std::lock_guard lock(mu_);
  records_.push_back(std::move(record));
}

std::vector<Json> MemoryTrace::records() const {
  std::lock_guard lock(mu_);
  return records_;
}

void BufferSink::flush_to(TraceSink& target) {
  for (auto& r : records_) target.write(std::move(r));
  records_.clear();
}

void write_jsonl(std::ostream& out, const std::vector<Json>& records) {
  for (const auto& r : records) out << r.dump() << '\n';
}

std::vector<Json> read_jsonl(std::istream& in) {
  std::vector<Json> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    Json j = Json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object()) {
      throw std::runtime_error("line " + std::to_string(line_no) +
                               ": not a JSON object");
    }
    out.push_back(std::move(j));
  }
  return out;
}

}  // namespace kgqa
