#pragma once

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace decatt {

// Error category, mapped to process exit codes by the CLI.
enum class ErrorKind { kUsage = 1, kData = 2, kNumeric = 3 };

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& msg)
      : std::runtime_error(msg), kind_(kind) {}
  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

#define DECATT_DEFINE_ERROR(Name, Kind)                         \
  class Name : public Error {                                   \
   public:                                                      \
    explicit Name(const std::string& msg) : Error(Kind, msg) {} \
  }

DECATT_DEFINE_ERROR(EmptySequenceError, ErrorKind::kData);
DECATT_DEFINE_ERROR(EmptyCorpusError, ErrorKind::kData);
DECATT_DEFINE_ERROR(IoError, ErrorKind::kData);
DECATT_DEFINE_ERROR(FormatError, ErrorKind::kData);
DECATT_DEFINE_ERROR(PoolError, ErrorKind::kData);
DECATT_DEFINE_ERROR(VocabError, ErrorKind::kData);
DECATT_DEFINE_ERROR(ConfigError, ErrorKind::kUsage);
DECATT_DEFINE_ERROR(ShapeError, ErrorKind::kNumeric);
DECATT_DEFINE_ERROR(NumericError, ErrorKind::kNumeric);

#undef DECATT_DEFINE_ERROR

// Seeded RNG. The engine (mt19937_64) produces an identical stream on every
// conforming standard library; the distributions are hand-rolled because
// std::*_distribution output is implementation-defined. All sampling in the
// project goes through this class.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  // Uniform double in [0, 1) with 53 random bits.
  double uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  // Uniform integer in [0, n). n must be > 0.
  std::size_t below(std::size_t n) {
    const std::uint64_t bound = static_cast<std::uint64_t>(n);
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
    std::uint64_t r = next_u64();
    while (r >= limit) r = next_u64();
    return static_cast<std::size_t>(r % bound);
  }

  // Box-Muller with a cached spare.
  double normal(double mean = 0.0, double stddev = 1.0);

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::swap(v[i - 1], v[below(i)]);
    }
  }

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

// FNV-1a, used for vocabulary and input-file fingerprints.
std::uint64_t fnv1a64(std::string_view bytes,
                      std::uint64_t seed = 0xcbf29ce484222325ULL);

std::string to_hex(std::uint64_t value);

// Byte length of the UTF-8 code point starting at s[pos]; invalid lead bytes
// count as single-byte units.
std::size_t utf8_advance(std::string_view s, std::size_t pos);

// Number of code points in s.
std::size_t utf8_length(std::string_view s);

}  // namespace decatt
