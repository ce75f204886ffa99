// Shoebox-room simulation: image-source RIRs with cardioid receivers,
// moving sources rendered by block-wise time-varying convolution, and
// sensor-noise mixing.
#ifndef ANCLAB_ROOM_ACOUSTICS_HPP
#define ANCLAB_ROOM_ACOUSTICS_HPP

#include <array>
#include <cmath>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "anclab/signal_core.hpp"

namespace anclab {

struct Vec3 {
  double x = 0, y = 0, z = 0;

  Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
  Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
  Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
  double dot(const Vec3& o) const { return x * o.x + y * o.y + z * o.z; }
  double norm() const { return std::sqrt(dot(*this)); }
  Vec3 normalized() const {
    double n = norm();
    return {x / n, y / n, z / n};
  }
};

struct RoomSetup {
  Vec3 dimensions{6, 4, 3};           // meters
  double rt60 = 0.2;                  // seconds; 0 means anechoic
  double speed_of_sound = 343.0;      // m/s
  std::optional<int> max_reflection_order;  // unset: cutoff by RIR length

  void validate() const;
  double volume() const { return dimensions.x * dimensions.y * dimensions.z; }
  double surface() const {
    return 2.0 * (dimensions.x * dimensions.y + dimensions.x * dimensions.z +
                  dimensions.y * dimensions.z);
  }
  bool contains(const Vec3& p) const {
    return p.x > 0 && p.x < dimensions.x && p.y > 0 && p.y < dimensions.y && p.z > 0 &&
           p.z < dimensions.z;
  }
  // uniform wall reflection coefficient from Sabine's formula
  double reflection_coefficient() const;
};

struct CardioidMic {
  Vec3 position;
  Vec3 orientation;  // unit norm
};

// gain = 0.5 * (1 + cos angle(orientation, incidence)), incidence points
// from the mic toward the source image
double cardioid_gain(const Vec3& orientation, const Vec3& incidence);

// Tetrahedral array of four outward-facing cardioid capsules on a
// 0.025 m diameter sphere.
struct MicArray {
  Vec3 center;
  std::array<CardioidMic, 4> capsules;
};

MicArray make_tetrahedral_array(const Vec3& center, double diameter = 0.025);

// Receiver for the image-source core: cardioid unless omni is set.
struct Receiver {
  Vec3 position;
  Vec3 orientation{1, 0, 0};
  bool omni = false;
};

// Visits every image source with delay below length taps (and reflection
// order below the room cap when set). gain excludes directivity.
void enumerate_images(const RoomSetup& room, const Vec3& source, const Vec3& receiver,
                      int length, int sample_rate,
                      const std::function<void(const Vec3& image, int order, double gain)>& fn);

std::vector<double> simulate_rir(const RoomSetup& room, const Vec3& source,
                                 const Receiver& receiver, int length,
                                 int sample_rate = kSampleRate);

inline std::vector<double> simulate_rir(const RoomSetup& room, const Vec3& source,
                                        const CardioidMic& mic, int length,
                                        int sample_rate = kSampleRate) {
  return simulate_rir(room, source, Receiver{mic.position, mic.orientation, false}, length,
                      sample_rate);
}

// ---- motion ----

enum class MotionMode { Static, ConstantRate, TimeVaryingRate, Interpolated };

// Azimuth law in degrees over a continuous frame index x; frame k spans
// samples [k*frame_len, (k+1)*frame_len) and its representative DoA is
// the law value at x = k (the frame start).
struct MotionLaw {
  MotionMode mode = MotionMode::Static;
  double initial_doa = 0;        // degrees
  double angular_velocity = 0;   // degrees per frame (ConstantRate)
  double amplitude = 0;          // degrees (TimeVaryingRate)
  double phase = 0;              // radians
  double cycles = 0;             // cycles across a K-frame context window
  int context_frames = 4;        // K
  std::vector<double> knots;     // Interpolated: DoA at integer frames

  double eval(double x) const;   // unwrapped degrees
  double eval_wrapped(double x) const { return wrap_deg(eval(x)); }
};

struct MotionTrajectory {
  MotionLaw law;
  int num_frames = 0;
  double radius = 0.4;                // meters
  std::vector<double> frame_doas;    // wrapped, one per frame
  double next_frame_doa = 0;         // law at x = num_frames, wrapped

  void validate() const;
};

MotionTrajectory make_trajectory(const MotionLaw& law, int num_frames, double radius);

// Renders a source moving on a horizontal circle around circle_center
// through per-block RIR snapshots. Blocks are triangular-windowed with
// 50% overlap, which linearly cross-fades adjacent RIRs. Output has one
// channel per receiver and length num_frames * frame_len.
MultichannelSignal render_moving_source(const std::vector<double>& noise,
                                        const MotionTrajectory& trajectory,
                                        const RoomSetup& room, const Vec3& circle_center,
                                        const std::vector<Receiver>& receivers, int block,
                                        int rir_length, int frame_len = 8000,
                                        int sample_rate = kSampleRate);

// Spec entry point: J-channel rendering onto the reference array.
MultichannelSignal timevarying_convolve(const std::vector<double>& noise,
                                        const MotionTrajectory& trajectory,
                                        const RoomSetup& room, const MicArray& array,
                                        int block, int rir_length = 1024,
                                        int frame_len = 8000);

// Adds iid white Gaussian sensor noise per channel at the requested SNR.
// snr_db = +infinity returns the input unchanged.
MultichannelSignal mix_at_snr(const MultichannelSignal& clean, double snr_db,
                              std::uint64_t rng_seed);

// ---- RIR cache file ("ANCR") ----

struct RirCache {
  std::uint32_t num_directions = 0;  // V
  std::uint32_t num_receivers = 0;   // J
  std::uint32_t length = 0;
  std::vector<std::vector<double>> rirs;  // [v * J + j]
};

void save_rir_cache(const RirCache& cache, const std::string& path);
RirCache load_rir_cache(const std::string& path);

}  // namespace anclab

#endif  // ANCLAB_ROOM_ACOUSTICS_HPP
