#include "anclab/room_acoustics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

namespace anclab {

void RoomSetup::validate() const {
  require(dimensions.x > 0 && dimensions.y > 0 && dimensions.z > 0, ErrorCode::ConfigError,
          "room dimensions must be positive");
  require(rt60 >= 0, ErrorCode::ConfigError, "rt60 must be nonnegative");
  require(speed_of_sound > 0, ErrorCode::ConfigError, "speed of sound must be positive");
}

double RoomSetup::reflection_coefficient() const {
  if (rt60 == 0.0) return 0.0;  // anechoic
  // Sabine: rt60 = 0.161 V / (alpha * S), uniform absorption on all walls
  const double alpha = 0.161 * volume() / (surface() * rt60);
  require(alpha < 1.0, ErrorCode::AbsorptionOverflow,
          "rt60 too small for Sabine inversion in this room");
  return std::sqrt(1.0 - alpha);
}

double cardioid_gain(const Vec3& orientation, const Vec3& incidence) {
  require(std::fabs(orientation.norm() - 1.0) < 1e-9, ErrorCode::NotNormalized,
          "orientation must be unit norm");
  require(std::fabs(incidence.norm() - 1.0) < 1e-9, ErrorCode::NotNormalized,
          "incidence must be unit norm");
  return 0.5 * (1.0 + orientation.dot(incidence));
}

MicArray make_tetrahedral_array(const Vec3& center, double diameter) {
  // capsule directions (az, el): (45, +35.26), (135, -35.26),
  // (225, +35.26), (315, -35.26) -- the vertices (+-1, +-1, +-1)/sqrt(3)
  const double s = 1.0 / std::sqrt(3.0);
  const Vec3 dirs[4] = {{s, s, s}, {-s, s, -s}, {-s, -s, s}, {s, -s, -s}};
  MicArray array;
  array.center = center;
  for (int i = 0; i < 4; ++i) {
    array.capsules[i].orientation = dirs[i];
    array.capsules[i].position = center + dirs[i] * (diameter / 2.0);
  }
  return array;
}

void enumerate_images(const RoomSetup& room, const Vec3& source, const Vec3& receiver,
                      int length, int sample_rate,
                      const std::function<void(const Vec3&, int, double)>& fn) {
  room.validate();
  const double beta = room.reflection_coefficient();
  const double max_dist = (static_cast<double>(length) + 0.5) * room.speed_of_sound / sample_rate;
  const Vec3& L = room.dimensions;

  const int n1 = static_cast<int>(std::ceil(max_dist / (2.0 * L.x))) + 1;
  const int n2 = static_cast<int>(std::ceil(max_dist / (2.0 * L.y))) + 1;
  const int n3 = static_cast<int>(std::ceil(max_dist / (2.0 * L.z))) + 1;
  const int max_order = room.max_reflection_order.value_or(-1);

  for (int mx = -n1; mx <= n1; ++mx) {
    for (int q = 0; q <= 1; ++q) {
      const double ix = (1 - 2 * q) * source.x + 2.0 * mx * L.x;
      const int rx = std::abs(mx - q) + std::abs(mx);
      if (max_order >= 0 && rx > max_order) continue;
      for (int my = -n2; my <= n2; ++my) {
        for (int j = 0; j <= 1; ++j) {
          const double iy = (1 - 2 * j) * source.y + 2.0 * my * L.y;
          const int ry = std::abs(my - j) + std::abs(my);
          if (max_order >= 0 && rx + ry > max_order) continue;
          for (int mz = -n3; mz <= n3; ++mz) {
            for (int k = 0; k <= 1; ++k) {
              const double iz = (1 - 2 * k) * source.z + 2.0 * mz * L.z;
              const int order = rx + ry + std::abs(mz - k) + std::abs(mz);
              if (max_order >= 0 && order > max_order) continue;
              const Vec3 image{ix, iy, iz};
              const double dist = (image - receiver).norm();
              if (dist > max_dist) continue;
              const double refl = order == 0 ? 1.0 : std::pow(beta, order);
              if (refl == 0.0 && order > 0) continue;  // anechoic
              fn(image, order, refl);
            }
          }
        }
      }
    }
  }
}

std::vector<double> simulate_rir(const RoomSetup& room, const Vec3& source,
                                 const Receiver& receiver, int length, int sample_rate) {
  room.validate();
  require(room.contains(source), ErrorCode::OutOfRoom, "source outside room");
  require(room.contains(receiver.position), ErrorCode::OutOfRoom, "receiver outside room");
  if (!receiver.omni)
    require(std::fabs(receiver.orientation.norm() - 1.0) < 1e-9, ErrorCode::NotNormalized,
            "receiver orientation must be unit norm");
  const double direct = (source - receiver.position).norm();
  const int direct_tap = static_cast<int>(std::lround(direct * sample_rate / room.speed_of_sound));
  require(direct_tap < length, ErrorCode::TooShort,
          "RIR length shorter than the direct-path delay");

  std::vector<double> rir(static_cast<std::size_t>(length), 0.0);
  enumerate_images(room, source, receiver.position, length, sample_rate,
                   [&](const Vec3& image, int, double refl) {
                     const Vec3 path = image - receiver.position;
                     const double dist = std::max(path.norm(), 1e-6);
                     const int tap =
                         static_cast<int>(std::lround(dist * sample_rate / room.speed_of_sound));
                     if (tap >= length) return;
                     double g = refl / (4.0 * kPi * dist);
                     if (!receiver.omni)
                       g *= cardioid_gain(receiver.orientation, path * (1.0 / dist));
                     rir[tap] += g;
                   });
  return rir;
}

double MotionLaw::eval(double x) const {
  switch (mode) {
    case MotionMode::Static:
      return initial_doa;
    case MotionMode::ConstantRate:
      return initial_doa + angular_velocity * x;
    case MotionMode::TimeVaryingRate:
      return initial_doa + amplitude * std::sin(2.0 * kPi * cycles * x / context_frames + phase);
    case MotionMode::Interpolated: {
      require(!knots.empty(), ErrorCode::ConfigError, "interpolated law without knots");
      if (x <= 0) return knots.front();
      if (x >= static_cast<double>(knots.size() - 1)) return knots.back();
      const int k = static_cast<int>(std::floor(x));
      const double t = x - k;
      // shortest-path circular interpolation between knots
      double a = knots[k];
      double d = wrap_deg(knots[k + 1] - a + 180.0) - 180.0;
      return a + t * d;
    }
  }
  return initial_doa;
}

void MotionTrajectory::validate() const {
  require(radius > 0, ErrorCode::ConfigError, "trajectory radius must be positive");
  require(num_frames >= 1, ErrorCode::ConfigError, "trajectory needs at least one frame");
  require(static_cast<int>(frame_doas.size()) == num_frames, ErrorCode::LengthMismatch,
          "frame_doas length mismatch");
  for (int k = 0; k < num_frames; ++k)
    require(std::fabs(circular_distance_deg(frame_doas[k], law.eval_wrapped(k))) < 1e-9,
            ErrorCode::ConfigError, "frame DoA inconsistent with motion law");
  require(std::fabs(circular_distance_deg(next_frame_doa, law.eval_wrapped(num_frames))) < 1e-9,
          ErrorCode::ConfigError, "next-frame DoA inconsistent with motion law");
}

MotionTrajectory make_trajectory(const MotionLaw& law, int num_frames, double radius) {
  MotionTrajectory t;
  t.law = law;
  t.num_frames = num_frames;
  t.radius = radius;
  t.frame_doas.resize(static_cast<std::size_t>(num_frames));
  for (int k = 0; k < num_frames; ++k) t.frame_doas[k] = law.eval_wrapped(k);
  t.next_frame_doa = law.eval_wrapped(num_frames);
  t.validate();
  return t;
}

MultichannelSignal render_moving_source(const std::vector<double>& noise,
                                        const MotionTrajectory& trajectory,
                                        const RoomSetup& room, const Vec3& circle_center,
                                        const std::vector<Receiver>& receivers, int block,
                                        int rir_length, int frame_len, int sample_rate) {
  trajectory.validate();
  require(block >= 1 && frame_len % block == 0, ErrorCode::ConfigError,
          "block must divide the frame length");
  const std::size_t out_len =
      static_cast<std::size_t>(trajectory.num_frames) * static_cast<std::size_t>(frame_len);
  require(noise.size() >= out_len, ErrorCode::LengthMismatch,
          "noise shorter than the trajectory");

  MultichannelSignal out;
  out.sample_rate = sample_rate;
  out.samples.assign(receivers.size(), std::vector<double>(out_len, 0.0));

  auto source_at = [&](double frame_index) {
    const double doa = deg2rad(trajectory.law.eval_wrapped(frame_index));
    return Vec3{circle_center.x + trajectory.radius * std::cos(doa),
                circle_center.y + trajectory.radius * std::sin(doa), circle_center.z};
  };

  // triangular chunks of length 2*block at hop block sum to one everywhere
  const long num_chunks = static_cast<long>((out_len + block - 1) / block);
  struct ChunkResult {
    std::vector<std::vector<double>> conv;  // per receiver, full convolution
    long start;
  };
  std::vector<ChunkResult> results(static_cast<std::size_t>(num_chunks + 1));

  parallel_for(static_cast<std::size_t>(num_chunks + 1), [&](std::size_t ci) {
    const long center = static_cast<long>(ci) * block;
    const long start = center - block;
    std::vector<double> chunk(static_cast<std::size_t>(2 * block), 0.0);
    bool any = false;
    for (long i = 0; i < 2 * block; ++i) {
      const long n = start + i;
      if (n < 0 || n >= static_cast<long>(out_len)) continue;
      const double w = 1.0 - std::fabs(static_cast<double>(n - center)) / block;
      if (w <= 0.0) continue;
      chunk[static_cast<std::size_t>(i)] = noise[static_cast<std::size_t>(n)] * w;
      any = true;
    }
    ChunkResult& res = results[ci];
    res.start = start;
    if (!any) return;
    const Vec3 src = source_at(static_cast<double>(center) / frame_len);
    res.conv.resize(receivers.size());
    for (std::size_t r = 0; r < receivers.size(); ++r) {
      const std::vector<double> rir = simulate_rir(room, src, receivers[r], rir_length, sample_rate);
      res.conv[r] = convolve_full(chunk, rir);
    }
  });

  for (const ChunkResult& res : results) {
    if (res.conv.empty()) continue;
    for (std::size_t r = 0; r < receivers.size(); ++r) {
      const std::vector<double>& c = res.conv[r];
      for (std::size_t i = 0; i < c.size(); ++i) {
        const long n = res.start + static_cast<long>(i);
        if (n < 0 || n >= static_cast<long>(out_len)) continue;
        out.samples[r][static_cast<std::size_t>(n)] += c[i];
      }
    }
  }
  return out;
}

MultichannelSignal timevarying_convolve(const std::vector<double>& noise,
                                        const MotionTrajectory& trajectory,
                                        const RoomSetup& room, const MicArray& array, int block,
                                        int rir_length, int frame_len) {
  std::vector<Receiver> receivers;
  receivers.reserve(4);
  for (const CardioidMic& mic : array.capsules)
    receivers.push_back(Receiver{mic.position, mic.orientation, false});
  return render_moving_source(noise, trajectory, room, array.center, receivers, block, rir_length,
                              frame_len);
}

MultichannelSignal mix_at_snr(const MultichannelSignal& clean, double snr_db,
                              std::uint64_t rng_seed) {
  clean.validate();
  if (std::isinf(snr_db) && snr_db > 0) return clean;
  const double p_clean = mean_power(clean);
  require(p_clean > 0, ErrorCode::ZeroSignal, "clean signal has zero power");
  const double sigma = std::sqrt(p_clean * std::pow(10.0, -snr_db / 10.0));

  MultichannelSignal out = clean;
  Rng rng(rng_seed);
  for (auto& ch : out.samples) {
    Rng chan = rng.fork(static_cast<std::uint64_t>(&ch - out.samples.data()));
    for (double& v : ch) v += sigma * chan.normal();
  }
  return out;
}

void save_rir_cache(const RirCache& cache, const std::string& path) {
  require(cache.rirs.size() ==
              static_cast<std::size_t>(cache.num_directions) * cache.num_receivers,
          ErrorCode::ShapeError, "cache entry count mismatch");
  std::ofstream os(path, std::ios::binary);
  require(static_cast<bool>(os), ErrorCode::IoError, "cannot write " + path);
  os.write("ANCR", 4);
  write_u32(os, 1);  // version
  write_u32(os, cache.num_directions);
  write_u32(os, cache.num_receivers);
  write_u32(os, cache.length);
  for (const auto& rir : cache.rirs) {
    require(rir.size() == cache.length, ErrorCode::ShapeError, "RIR length mismatch");
    write_f64_array(os, rir.data(), rir.size());
  }
}

RirCache load_rir_cache(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  require(static_cast<bool>(is), ErrorCode::IoError, "cannot open " + path);
  char magic[4];
  is.read(magic, 4);
  require(is && std::string(magic, 4) == "ANCR", ErrorCode::CorruptLibrary,
          path + ": bad magic");
  const std::uint32_t version = read_u32(is);
  require(version == 1, ErrorCode::CorruptLibrary, path + ": unsupported version");
  RirCache cache;
  cache.num_directions = read_u32(is);
  cache.num_receivers = read_u32(is);
  cache.length = read_u32(is);
  const std::size_t count =
      static_cast<std::size_t>(cache.num_directions) * cache.num_receivers;
  cache.rirs.resize(count);
  for (auto& rir : cache.rirs) {
    rir.resize(cache.length);
    read_f64_array(is, rir.data(), rir.size());
  }
  require(static_cast<bool>(is), ErrorCode::CorruptLibrary, path + ": truncated file");
  return cache;
}

}  // namespace anclab
