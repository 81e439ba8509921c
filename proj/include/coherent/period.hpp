#pragma once

#include <charconv>
#include <compare>
#include <string>
#include <string_view>

#include "coherent/error.hpp"

namespace coherent {

/// A calendar quarter, serialized as "YYYYQn" (e.g. "1984Q4").
class Period {
 public:
  Period() = default;
  Period(int year, int quarter) : index_(year * 4 + (quarter - 1)) {
    if (quarter < 1 || quarter > 4)
      throw input_error("quarter out of range: " + std::to_string(quarter));
  }

  static Period parse(std::string_view s) {
    auto qpos = s.find('Q');
    if (qpos == std::string_view::npos) qpos = s.find('q');
    if (qpos == std::string_view::npos || qpos == 0 || qpos + 2 != s.size())
      throw input_error("bad period '" + std::string(s) + "', expected YYYYQn");
    int year = 0, quarter = 0;
    auto r1 = std::from_chars(s.data(), s.data() + qpos, year);
    auto r2 = std::from_chars(s.data() + qpos + 1, s.data() + s.size(), quarter);
    if (r1.ec != std::errc{} || r2.ec != std::errc{} ||
        r1.ptr != s.data() + qpos || quarter < 1 || quarter > 4)
      throw input_error("bad period '" + std::string(s) + "', expected YYYYQn");
    return Period(year, quarter);
  }

  int year() const { return index_ >= 0 ? index_ / 4 : -((-index_ + 3) / 4); }
  int quarter() const { return index_ - year() * 4 + 1; }

  std::string str() const {
    return std::to_string(year()) + "Q" + std::to_string(quarter());
  }

  Period operator+(int quarters) const {
    Period p;
    p.index_ = index_ + quarters;
    return p;
  }
  Period operator-(int quarters) const { return *this + (-quarters); }
  /// Number of quarters from other to this.
  int operator-(Period other) const { return index_ - other.index_; }
  Period& operator++() {
    ++index_;
    return *this;
  }

  auto operator<=>(const Period&) const = default;

 private:
  int index_ = 0;  // year * 4 + (quarter - 1)
};

}  // namespace coherent
