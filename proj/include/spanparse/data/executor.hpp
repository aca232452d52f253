#pragma once

#include <string>
#include <vector>

#include "spanparse/core.hpp"

namespace spanparse {

class ExecError : public Error {
 public:
  using Error::Error;
};

// Result of executing a program: an action sequence (order matters) or a
// canonicalized answer set (sorted, unique).
struct Denotation {
  std::vector<std::string> values;

  std::string str() const {
    std::string out;
    for (const auto& v : values) {
      if (!out.empty()) out += ' ';
      out += v;
    }
    return out;
  }
  friend bool operator==(const Denotation&, const Denotation&) = default;
};

class Executor {
 public:
  virtual ~Executor() = default;
  virtual Denotation execute(const Program& z) const = 0;
};

}  // namespace spanparse
