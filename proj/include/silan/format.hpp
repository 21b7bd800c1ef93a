#pragma once

#include <charconv>
#include <stdexcept>
#include <string>
#include <string_view>

namespace silan {

// Shortest decimal form that parses back to the identical double.
inline std::string format_double(double v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  if (ec != std::errc()) throw std::runtime_error("format_double: conversion failed");
  return std::string(buf, ptr);
}

inline double parse_double_strict(std::string_view s, const std::string& what) {
  double out = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw std::runtime_error(what + ": cannot parse number '" + std::string(s) + "'");
  }
  return out;
}

inline long parse_int_strict(std::string_view s, const std::string& what) {
  long out = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw std::runtime_error(what + ": expected an integer, got '" + std::string(s) + "'");
  }
  return out;
}

}  // namespace silan
