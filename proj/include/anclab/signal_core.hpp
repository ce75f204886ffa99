// Foundational DSP: STFT/ISTFT, FIR filtering, Welch PSD, bandlimited
// noise synthesis. All computation is double precision.
#ifndef ANCLAB_SIGNAL_CORE_HPP
#define ANCLAB_SIGNAL_CORE_HPP

#include <complex>
#include <memory>
#include <vector>

#include "anclab/common.hpp"

namespace anclab {

constexpr int kSampleRate = 16000;

// Sampled audio, one row per channel. Channels share a common length.
struct MultichannelSignal {
  std::vector<std::vector<double>> samples;  // [channel][n]
  int sample_rate = kSampleRate;

  int channels() const { return static_cast<int>(samples.size()); }
  std::size_t length() const { return samples.empty() ? 0 : samples[0].size(); }
  void validate() const;
};

enum class Window { Hann, Rect };

std::vector<double> make_window(Window w, int n);

// Complex STFT, F = nfft/2 + 1 one-sided bins by T frames.
struct Spectrogram {
  std::vector<std::complex<double>> bins;  // row-major [f * frames + t]
  int freq_bins = 0;                       // F
  int frames = 0;                          // T
  int nfft = 0;
  int hop = 0;
  Window window = Window::Hann;
  bool centered = true;
  std::size_t num_samples = 0;  // length of the analyzed signal

  std::complex<double>& at(int f, int t) { return bins[static_cast<std::size_t>(f) * frames + t]; }
  const std::complex<double>& at(int f, int t) const {
    return bins[static_cast<std::size_t>(f) * frames + t];
  }
};

// One-sided real FFT of power-of-two size, FFTW-backed. One instance per
// thread of use; construction is internally serialized.
class RealFft {
 public:
  explicit RealFft(int nfft);
  ~RealFft();
  RealFft(const RealFft&) = delete;
  RealFft& operator=(const RealFft&) = delete;

  int size() const { return nfft_; }
  // in: nfft reals; out: nfft/2+1 complex bins (unnormalized)
  void forward(const double* in, std::complex<double>* out);
  // in: nfft/2+1 bins; out: nfft reals. Includes the 1/nfft factor.
  void inverse(const std::complex<double>* in, double* out);

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  int nfft_;
};

// Frame count is a pure function of (length, nfft, hop, centered):
// centered analysis places one frame per hop start strictly inside the
// signal, ceil(length / hop); non-centered packs full windows,
// (length - nfft) / hop + 1, minimum 1 with zero padding.
int stft_num_frames(std::size_t length, int nfft, int hop, bool centered);

Spectrogram stft(const std::vector<double>& signal, int nfft, int hop,
                 Window window = Window::Hann, bool centered = true);

// Weighted overlap-add inverse; requires the analysis window/hop to cover
// every sample with nonzero accumulated window energy.
std::vector<double> istft(const Spectrogram& spec);

// Causal linear convolution truncated to the input length.
std::vector<double> fir_filter(const std::vector<double>& signal,
                               const std::vector<double>& taps);

// Full linear convolution, length signal + taps - 1 (FFT overlap-add for
// large sizes, direct otherwise).
std::vector<double> convolve_full(const std::vector<double>& signal,
                                  const std::vector<double>& taps);

// Averaged-periodogram PSD, Hann window, one-sided, density normalized.
// overlap is the fractional segment overlap in [0, 1).
std::vector<double> welch_psd(const std::vector<double>& signal, int nfft,
                              double overlap = 0.5, int sample_rate = kSampleRate);

// Zero-phase-free (causal) Butterworth low-pass, order 8, applied as a
// cascade of biquads. Used for bandlimited excitation synthesis.
std::vector<double> butterworth_lowpass(const std::vector<double>& signal,
                                        double cutoff_hz, int sample_rate = kSampleRate,
                                        int order = 8);

// White Gaussian noise low-passed at cutoff_hz, unit variance before
// filtering, deterministic in the seed.
std::vector<double> bandlimited_noise(std::size_t length, double cutoff_hz,
                                      std::uint64_t seed, int sample_rate = kSampleRate);

double mean_power(const std::vector<double>& x);
double mean_power(const MultichannelSignal& x);

}  // namespace anclab

#endif  // ANCLAB_SIGNAL_CORE_HPP
