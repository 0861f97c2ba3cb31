#include "decatt/common.hpp"

#include <cmath>
#include <cstdio>

namespace decatt {

double Rng::normal(double mean, double stddev) {
  if (has_spare_) {
    has_spare_ = false;
    return mean + stddev * spare_;
  }
  double u1 = uniform();
  while (u1 <= 0.0) u1 = uniform();
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double theta = 2.0 * M_PI * u2;
  spare_ = r * std::sin(theta);
  has_spare_ = true;
  return mean + stddev * r * std::cos(theta);
}

std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t seed) {
  std::uint64_t h = seed;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string to_hex(std::uint64_t value) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(value));
  return std::string(buf);
}

std::size_t utf8_advance(std::string_view s, std::size_t pos) {
  const unsigned char lead = static_cast<unsigned char>(s[pos]);
  std::size_t len = 1;
  if ((lead & 0xE0) == 0xC0) {
    len = 2;
  } else if ((lead & 0xF0) == 0xE0) {
    len = 3;
  } else if ((lead & 0xF8) == 0xF0) {
    len = 4;
  }
  // Clamp to the end of the string and stop at the next lead byte so that
  // malformed input still advances.
  std::size_t end = pos + 1;
  while (end < s.size() && end < pos + len &&
         (static_cast<unsigned char>(s[end]) & 0xC0) == 0x80) {
    ++end;
  }
  return end - pos;
}

std::size_t utf8_length(std::string_view s) {
  std::size_t count = 0;
  for (std::size_t pos = 0; pos < s.size(); pos += utf8_advance(s, pos)) {
    ++count;
  }
  return count;
}

}  // namespace decatt
