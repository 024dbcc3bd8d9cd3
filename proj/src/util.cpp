#include "beampower/util.hpp"

#include <cerrno>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <stdexcept>

namespace beampower {

std::string format_double(double v) {
  char buf[40];
  // %.17g always round-trips; prefer the shorter %.15g form when it does too.
  std::snprintf(buf, sizeof(buf), "%.15g", v);
  if (std::strtod(buf, nullptr) != v) {
    std::snprintf(buf, sizeof(buf), "%.17g", v);
  }
  return buf;
}

std::string trim(const std::string& s) {
  const char* ws = " \t\r\n";
  auto b = s.find_first_not_of(ws);
  if (b == std::string::npos) return "";
  auto e = s.find_last_not_of(ws);
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& s, const char* delims) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (std::strchr(delims, c) != nullptr) {
      if (!cur.empty()) out.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

double parse_double(const std::string& field, const std::string& what) {
  std::string t = trim(field);
  if (t.empty()) throw std::invalid_argument(what + ": empty field");
  errno = 0;
  char* end = nullptr;
  double v = std::strtod(t.c_str(), &end);
  if (end != t.c_str() + t.size() || errno == ERANGE) {
    throw std::invalid_argument(what + ": malformed number '" + t + "'");
  }
  return v;
}

long parse_long(const std::string& field, const std::string& what) {
  std::string t = trim(field);
  if (t.empty()) throw std::invalid_argument(what + ": empty field");
  errno = 0;
  char* end = nullptr;
  long v = std::strtol(t.c_str(), &end, 10);
  if (end != t.c_str() + t.size() || errno == ERANGE) {
    throw std::invalid_argument(what + ": malformed integer '" + t + "'");
  }
  return v;
}

}  // namespace beampower
