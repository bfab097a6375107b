#pragma once

// Locale-independent CSV output: doubles with 17 significant digits via
// std::to_chars, integers verbatim, booleans as true/false.

#include <charconv>
#include <cstdint>
#include <fstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <type_traits>
#include <vector>

namespace ssg {

inline std::string format_number(double x) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, x, std::chars_format::general, 17);
  return std::string(buf, res.ptr);
}

template <typename T>
std::string csv_field(const T& x) {
  if constexpr (std::is_same_v<T, bool>) {
    return x ? "true" : "false";
  } else if constexpr (std::is_integral_v<T>) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof buf, x);
    return std::string(buf, res.ptr);
  } else if constexpr (std::is_floating_point_v<T>) {
    return format_number(static_cast<double>(x));
  } else {
    return std::string(x);
  }
}

/// Rows accumulate in memory; write() emits the whole file at once.
class CsvTable {
 public:
  explicit CsvTable(std::vector<std::string> header) : header_(std::move(header)) {}

  template <typename... Ts>
  void add(const Ts&... fields) {
    static_assert(sizeof...(Ts) > 0);
    if (sizeof...(Ts) != header_.size()) throw std::logic_error("csv row width does not match header");
    std::string line;
    ((line += csv_field(fields), line += ','), ...);
    line.back() = '\n';
    body_ += line;
  }

  void add_raw(const std::vector<std::string>& fields) {
    if (fields.size() != header_.size()) throw std::logic_error("csv row width does not match header");
    std::string line;
    for (const auto& f : fields) line += f + ',';
    line.back() = '\n';
    body_ += line;
  }

  std::string str() const {
    std::string out;
    for (const auto& h : header_) out += h + ',';
    out.back() = '\n';
    return out + body_;
  }

  void write(const std::string& path) const {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write '" + path + "'");
    out << str();
  }

 private:
  std::vector<std::string> header_;
  std::string body_;
};

}  // namespace ssg
