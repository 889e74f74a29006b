#pragma once

#include <string>

namespace mso2d {

struct EvalVerdict {
  enum class Value { True, False, Unknown } value = Value::Unknown;
  std::string note;  // for Unknown: which bound caused it

  bool is_true() const { return value == Value::True; }
  bool is_false() const { return value == Value::False; }
  bool is_unknown() const { return value == Value::Unknown; }

  static EvalVerdict yes() { return {Value::True, {}}; }
  static EvalVerdict no() { return {Value::False, {}}; }
  static EvalVerdict unknown(std::string note) { return {Value::Unknown, std::move(note)}; }
  static EvalVerdict of(bool b) { return b ? yes() : no(); }

  std::string str() const {
    switch (value) {
      case Value::True: return "True";
      case Value::False: return "False";
      case Value::Unknown: return "Unknown";
    }
    return "?";
  }
};

}  // namespace mso2d
