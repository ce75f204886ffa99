#include "anclab/common.hpp"

#include <cmath>
#include <cstdlib>
#include <fstream>

namespace anclab {

const char* error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::InvalidHop: return "InvalidHop";
    case ErrorCode::NonInvertibleConfig: return "NonInvertibleConfig";
    case ErrorCode::EmptyFilter: return "EmptyFilter";
    case ErrorCode::TooShort: return "TooShort";
    case ErrorCode::NotNormalized: return "NotNormalized";
    case ErrorCode::OutOfRoom: return "OutOfRoom";
    case ErrorCode::AbsorptionOverflow: return "AbsorptionOverflow";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::ZeroSignal: return "ZeroSignal";
    case ErrorCode::NumericFault: return "NumericFault";
    case ErrorCode::Diverged: return "Diverged";
    case ErrorCode::CorruptLibrary: return "CorruptLibrary";
    case ErrorCode::ShapeError: return "ShapeError";
    case ErrorCode::EmptyDataset: return "EmptyDataset";
    case ErrorCode::ConfigError: return "ConfigError";
    case ErrorCode::MissingDependency: return "MissingDependency";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

double Rng::normal() {
  if (have_spare_) {
    have_spare_ = false;
    return spare_;
  }
  // Box-Muller; u1 kept strictly positive
  double u1 = (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53;
  double u2 = static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  double r = std::sqrt(-2.0 * std::log(u1));
  spare_ = r * std::sin(2.0 * kPi * u2);
  have_spare_ = true;
  return r * std::cos(2.0 * kPi * u2);
}

int worker_count() {
  if (const char* env = std::getenv("ANC_LAB_THREADS")) {
    int n = std::atoi(env);
    if (n > 0) return n;
  }
  unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn) {
  const int workers = worker_count();
  if (workers <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  const std::size_t w = std::min<std::size_t>(static_cast<std::size_t>(workers), n);
  std::vector<std::thread> pool;
  pool.reserve(w);
  for (std::size_t t = 0; t < w; ++t) {
    pool.emplace_back([&, t]() {
      // block partition: worker t handles [lo, hi)
      std::size_t lo = n * t / w;
      std::size_t hi = n * (t + 1) / w;
      for (std::size_t i = lo; i < hi; ++i) fn(i);
    });
  }
  for (auto& th : pool) th.join();
}

void write_f64_array(std::ostream& os, const double* data, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) write_f64(os, data[i]);
}

void read_f64_array(std::istream& is, double* data, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) data[i] = read_f64(is);
}

void write_f32_array(std::ostream& os, const float* data, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) write_f32(os, data[i]);
}

void read_f32_array(std::istream& is, float* data, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) data[i] = read_f32(is);
}

std::uint64_t fnv1a(const void* data, std::size_t n, std::uint64_t seed) {
  const unsigned char* p = static_cast<const unsigned char*>(data);
  std::uint64_t h = seed;
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t fnv1a_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) return 0;
  char buf[1 << 16];
  std::uint64_t h = 0xcbf29ce484222325ULL;
  while (is) {
    is.read(buf, sizeof(buf));
    h = fnv1a(buf, static_cast<std::size_t>(is.gcount()), h);
  }
  return h;
}

}  // namespace anclab
