// Shared infrastructure: error codes, deterministic RNG, worker pool,
// little-endian binary helpers.
#ifndef ANCLAB_COMMON_HPP
#define ANCLAB_COMMON_HPP

#include <cstdint>
#include <cstring>
#include <functional>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace anclab {

enum class ErrorCode {
  EmptyInput,
  InvalidHop,
  NonInvertibleConfig,
  EmptyFilter,
  TooShort,
  NotNormalized,
  OutOfRoom,
  AbsorptionOverflow,
  LengthMismatch,
  ZeroSignal,
  NumericFault,
  Diverged,
  CorruptLibrary,
  ShapeError,
  EmptyDataset,
  ConfigError,
  MissingDependency,
  IoError,
};

const char* error_code_name(ErrorCode code);

class AncError : public std::runtime_error {
 public:
  AncError(ErrorCode code, const std::string& msg)
      : std::runtime_error(std::string(error_code_name(code)) + ": " + msg),
        code_(code) {}
  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& msg) {
  throw AncError(code, msg);
}

inline void require(bool cond, ErrorCode code, const std::string& msg) {
  if (!cond) fail(code, msg);
}

// Deterministic RNG. Uniform/normal draws are generated from explicit
// formulas on mt19937_64 output so sequences do not depend on the
// standard library's distribution internals.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(split(seed)), inc_(split(seed ^ 0x9e3779b97f4a7c15ULL) | 1) {}

  std::uint64_t next_u64() {
    // xorshift128+ style mix on two splitmix-derived words
    std::uint64_t x = state_;
    std::uint64_t y = inc_;
    state_ = y;
    x ^= x << 23;
    inc_ = x ^ y ^ (x >> 17) ^ (y >> 26);
    return inc_ + y;
  }

  // uniform in [0, 1)
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // one coordinate of a Box-Muller pair; the partner is cached
  double normal();

  int uniform_int(int n) {  // [0, n)
    return static_cast<int>(next_u64() % static_cast<std::uint64_t>(n));
  }

  // derive an independent stream, e.g. per sample or per worker
  Rng fork(std::uint64_t salt) const {
    return Rng(split(state_ ^ split(salt + 0x632be59bd9b4e019ULL)));
  }

 private:
  static std::uint64_t split(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }
  std::uint64_t state_;
  std::uint64_t inc_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

// Number of worker threads: ANC_LAB_THREADS if set, else hardware count.
int worker_count();

// Runs fn(i) for i in [0, n). Work is split into contiguous blocks per
// worker; fn must write only to per-index slots so the result is
// independent of the thread count.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

// ---- little-endian binary io ----

inline void write_u32(std::ostream& os, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                        static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
  os.write(reinterpret_cast<const char*>(b), 4);
}

inline std::uint32_t read_u32(std::istream& is) {
  unsigned char b[4];
  is.read(reinterpret_cast<char*>(b), 4);
  if (!is) fail(ErrorCode::CorruptLibrary, "unexpected end of file");
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

inline void write_f64(std::ostream& os, double v) {
  std::uint64_t u;
  std::memcpy(&u, &v, 8);
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(u >> (8 * i));
  os.write(reinterpret_cast<const char*>(b), 8);
}

inline double read_f64(std::istream& is) {
  unsigned char b[8];
  is.read(reinterpret_cast<char*>(b), 8);
  if (!is) fail(ErrorCode::CorruptLibrary, "unexpected end of file");
  std::uint64_t u = 0;
  for (int i = 0; i < 8; ++i) u |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  double v;
  std::memcpy(&v, &u, 8);
  return v;
}

inline void write_f32(std::ostream& os, float v) {
  std::uint32_t u;
  std::memcpy(&u, &v, 4);
  write_u32(os, u);
}

inline float read_f32(std::istream& is) {
  std::uint32_t u = read_u32(is);
  float v;
  std::memcpy(&v, &u, 4);
  return v;
}

void write_f64_array(std::ostream& os, const double* data, std::size_t n);
void read_f64_array(std::istream& is, double* data, std::size_t n);
void write_f32_array(std::ostream& os, const float* data, std::size_t n);
void read_f32_array(std::istream& is, float* data, std::size_t n);

// FNV-1a over bytes; used for stage stamps and content hashes.
std::uint64_t fnv1a(const void* data, std::size_t n, std::uint64_t seed = 0xcbf29ce484222325ULL);
std::uint64_t fnv1a_file(const std::string& path);

constexpr double kPi = 3.14159265358979323846;

inline double deg2rad(double d) { return d * kPi / 180.0; }
inline double rad2deg(double r) { return r * 180.0 / kPi; }

// wrap an azimuth to [0, 360)
inline double wrap_deg(double d) {
  double w = std::fmod(d, 360.0);
  if (w < 0) w += 360.0;
  return w;
}

// circular distance on the 360 degree circle, result in [0, 180]
inline double circular_distance_deg(double a, double b) {
  double d = std::fabs(wrap_deg(a) - wrap_deg(b));
  return d > 180.0 ? 360.0 - d : d;
}

}  // namespace anclab

#endif  // ANCLAB_COMMON_HPP
