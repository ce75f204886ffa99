#include "anclab/signal_core.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <mutex>

namespace anclab {

void MultichannelSignal::validate() const {
  require(sample_rate > 0, ErrorCode::ConfigError, "sample_rate must be positive");
  for (const auto& ch : samples)
    require(ch.size() == length(), ErrorCode::LengthMismatch, "channel lengths differ");
}

std::vector<double> make_window(Window w, int n) {
  std::vector<double> win(static_cast<std::size_t>(n), 1.0);
  if (w == Window::Hann) {
    for (int i = 0; i < n; ++i)
      win[i] = 0.5 - 0.5 * std::cos(2.0 * kPi * i / n);  // periodic Hann
  }
  return win;
}

namespace {
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}
bool is_pow2(int n) { return n > 0 && (n & (n - 1)) == 0; }
}  // namespace

struct RealFft::Impl {
  double* real = nullptr;
  fftw_complex* cplx = nullptr;
  fftw_plan fwd = nullptr;
  fftw_plan inv = nullptr;
};

RealFft::RealFft(int nfft) : impl_(new Impl), nfft_(nfft) {
  require(is_pow2(nfft), ErrorCode::ConfigError, "nfft must be a power of two");
  std::lock_guard<std::mutex> lock(planner_mutex());
  impl_->real = fftw_alloc_real(nfft);
  impl_->cplx = fftw_alloc_complex(nfft / 2 + 1);
  // FFTW_ESTIMATE keeps plan selection deterministic
  impl_->fwd = fftw_plan_dft_r2c_1d(nfft, impl_->real, impl_->cplx, FFTW_ESTIMATE);
  impl_->inv = fftw_plan_dft_c2r_1d(nfft, impl_->cplx, impl_->real, FFTW_ESTIMATE);
}

RealFft::~RealFft() {
  std::lock_guard<std::mutex> lock(planner_mutex());
  fftw_destroy_plan(impl_->fwd);
  fftw_destroy_plan(impl_->inv);
  fftw_free(impl_->real);
  fftw_free(impl_->cplx);
}

void RealFft::forward(const double* in, std::complex<double>* out) {
  std::copy(in, in + nfft_, impl_->real);
  fftw_execute(impl_->fwd);
  for (int k = 0; k <= nfft_ / 2; ++k)
    out[k] = std::complex<double>(impl_->cplx[k][0], impl_->cplx[k][1]);
}

void RealFft::inverse(const std::complex<double>* in, double* out) {
  for (int k = 0; k <= nfft_ / 2; ++k) {
    impl_->cplx[k][0] = in[k].real();
    impl_->cplx[k][1] = in[k].imag();
  }
  fftw_execute(impl_->inv);
  const double scale = 1.0 / nfft_;
  for (int i = 0; i < nfft_; ++i) out[i] = impl_->real[i] * scale;
}

int stft_num_frames(std::size_t length, int nfft, int hop, bool centered) {
  if (centered) {
    return static_cast<int>((length + static_cast<std::size_t>(hop) - 1) / hop);
  }
  if (length < static_cast<std::size_t>(nfft)) return 1;
  return static_cast<int>((length - nfft) / hop) + 1;
}

Spectrogram stft(const std::vector<double>& signal, int nfft, int hop, Window window,
                 bool centered) {
  require(!signal.empty(), ErrorCode::EmptyInput, "stft of empty signal");
  require(is_pow2(nfft), ErrorCode::ConfigError, "nfft must be a power of two");
  require(hop >= 1, ErrorCode::InvalidHop, "hop must be >= 1");
  require(hop <= nfft, ErrorCode::InvalidHop, "hop exceeds nfft");

  const std::size_t len = signal.size();
  const int frames = stft_num_frames(len, nfft, hop, centered);
  const int fbins = nfft / 2 + 1;
  const std::vector<double> win = make_window(window, nfft);

  Spectrogram spec;
  spec.freq_bins = fbins;
  spec.frames = frames;
  spec.nfft = nfft;
  spec.hop = hop;
  spec.window = window;
  spec.centered = centered;
  spec.num_samples = len;
  spec.bins.assign(static_cast<std::size_t>(fbins) * frames, {0.0, 0.0});

  // sample at padded index p maps to signal index p - pad, reflect padded
  const long pad = centered ? nfft / 2 : 0;
  auto sample_at = [&](long p) -> double {
    long i = p - pad;
    if (i < 0) i = -i;                                   // reflect left
    if (i >= static_cast<long>(len)) {
      long over = i - static_cast<long>(len) + 1;
      i = static_cast<long>(len) - 1 - over;             // reflect right
      if (i < 0) return 0.0;                             // short signal
    }
    return signal[static_cast<std::size_t>(i)];
  };

  RealFft fft(nfft);
  std::vector<double> frame(static_cast<std::size_t>(nfft));
  std::vector<std::complex<double>> out(static_cast<std::size_t>(fbins));
  for (int t = 0; t < frames; ++t) {
    const long start = static_cast<long>(t) * hop;
    for (int i = 0; i < nfft; ++i) frame[i] = sample_at(start + i) * win[i];
    fft.forward(frame.data(), out.data());
    for (int f = 0; f < fbins; ++f) spec.at(f, t) = out[f];
  }
  return spec;
}

std::vector<double> istft(const Spectrogram& spec) {
  require(spec.frames >= 1 && spec.freq_bins == spec.nfft / 2 + 1, ErrorCode::ShapeError,
          "malformed spectrogram");
  const int nfft = spec.nfft;
  const int hop = spec.hop;
  const std::size_t len = spec.num_samples;
  const std::vector<double> win = make_window(spec.window, nfft);
  const long pad = spec.centered ? nfft / 2 : 0;

  std::vector<double> acc(len, 0.0);
  std::vector<double> wsum(len, 0.0);
  RealFft fft(nfft);
  std::vector<double> frame(static_cast<std::size_t>(nfft));
  std::vector<std::complex<double>> in(static_cast<std::size_t>(spec.freq_bins));

  for (int t = 0; t < spec.frames; ++t) {
    for (int f = 0; f < spec.freq_bins; ++f) in[f] = spec.at(f, t);
    fft.inverse(in.data(), frame.data());
    const long start = static_cast<long>(t) * hop - pad;
    for (int i = 0; i < nfft; ++i) {
      long n = start + i;
      if (n < 0 || n >= static_cast<long>(len)) continue;
      acc[n] += frame[i] * win[i];
      wsum[n] += win[i] * win[i];
    }
  }
  for (std::size_t n = 0; n < len; ++n) {
    require(wsum[n] > 1e-12, ErrorCode::NonInvertibleConfig,
            "window/hop pair leaves samples uncovered");
    acc[n] /= wsum[n];
  }
  return acc;
}

namespace {

std::vector<double> convolve_direct(const std::vector<double>& x, const std::vector<double>& h) {
  std::vector<double> y(x.size() + h.size() - 1, 0.0);
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double xi = x[i];
    if (xi == 0.0) continue;
    for (std::size_t k = 0; k < h.size(); ++k) y[i + k] += xi * h[k];
  }
  return y;
}

std::vector<double> convolve_fft(const std::vector<double>& x, const std::vector<double>& h) {
  const std::size_t ny = x.size() + h.size() - 1;
  int nfft = 1;
  while (static_cast<std::size_t>(nfft) < ny) nfft <<= 1;
  RealFft fft(nfft);
  std::vector<double> buf(static_cast<std::size_t>(nfft), 0.0);
  std::vector<std::complex<double>> X(static_cast<std::size_t>(nfft / 2 + 1));
  std::vector<std::complex<double>> H(static_cast<std::size_t>(nfft / 2 + 1));
  std::copy(x.begin(), x.end(), buf.begin());
  fft.forward(buf.data(), X.data());
  std::fill(buf.begin(), buf.end(), 0.0);
  std::copy(h.begin(), h.end(), buf.begin());
  fft.forward(buf.data(), H.data());
  for (std::size_t k = 0; k < X.size(); ++k) X[k] *= H[k];
  fft.inverse(X.data(), buf.data());
  return std::vector<double>(buf.begin(), buf.begin() + ny);
}

}  // namespace

std::vector<double> convolve_full(const std::vector<double>& x, const std::vector<double>& h) {
  require(!h.empty(), ErrorCode::EmptyFilter, "empty filter taps");
  require(!x.empty(), ErrorCode::EmptyInput, "empty signal");
  // direct wins for short kernels, FFT for long ones
  if (x.size() * h.size() < (1u << 18) || h.size() < 32) return convolve_direct(x, h);
  return convolve_fft(x, h);
}

std::vector<double> fir_filter(const std::vector<double>& signal,
                               const std::vector<double>& taps) {
  std::vector<double> full = convolve_full(signal, taps);
  full.resize(signal.size());
  return full;
}

std::vector<double> welch_psd(const std::vector<double>& signal, int nfft, double overlap,
                              int sample_rate) {
  require(signal.size() >= static_cast<std::size_t>(nfft), ErrorCode::TooShort,
          "signal shorter than nfft");
  require(overlap >= 0.0 && overlap < 1.0, ErrorCode::ConfigError, "overlap must be in [0,1)");
  const int hop = std::max(1, static_cast<int>(nfft * (1.0 - overlap)));
  const std::vector<double> win = make_window(Window::Hann, nfft);
  double wpow = 0.0;
  for (double w : win) wpow += w * w;

  const int fbins = nfft / 2 + 1;
  std::vector<double> psd(static_cast<std::size_t>(fbins), 0.0);
  RealFft fft(nfft);
  std::vector<double> frame(static_cast<std::size_t>(nfft));
  std::vector<std::complex<double>> out(static_cast<std::size_t>(fbins));

  int segments = 0;
  for (std::size_t start = 0; start + nfft <= signal.size(); start += hop, ++segments) {
    for (int i = 0; i < nfft; ++i) frame[i] = signal[start + i] * win[i];
    fft.forward(frame.data(), out.data());
    for (int f = 0; f < fbins; ++f) psd[f] += std::norm(out[f]);
  }
  // one-sided density normalization
  const double scale = 1.0 / (segments * wpow * sample_rate);
  for (int f = 0; f < fbins; ++f) {
    psd[f] *= scale;
    if (f != 0 && f != fbins - 1) psd[f] *= 2.0;
  }
  return psd;
}

std::vector<double> butterworth_lowpass(const std::vector<double>& signal, double cutoff_hz,
                                        int sample_rate, int order) {
  require(order > 0 && order % 2 == 0, ErrorCode::ConfigError, "order must be positive even");
  require(cutoff_hz > 0 && cutoff_hz < sample_rate / 2.0, ErrorCode::ConfigError,
          "cutoff must be below Nyquist");
  // analog prototype poles, bilinear transform with frequency prewarp
  const double warped = std::tan(kPi * cutoff_hz / sample_rate);
  std::vector<double> y = signal;
  for (int k = 0; k < order / 2; ++k) {
    const double theta = kPi * (2.0 * k + 1.0) / (2.0 * order) + kPi / 2.0;
    const double re = std::cos(theta);  // pole real part (negative)
    // s^2 - 2*re*w*s + w^2 denominator; numerator w^2
    const double w2 = warped * warped;
    const double a0 = 1.0 - 2.0 * re * warped + w2;
    const double b0 = w2 / a0;
    const double b1 = 2.0 * w2 / a0;
    const double b2 = w2 / a0;
    const double a1 = (2.0 * w2 - 2.0) / a0;
    const double a2 = (1.0 + 2.0 * re * warped + w2) / a0;
    double x1 = 0, x2 = 0, y1 = 0, y2 = 0;
    for (double& v : y) {
      const double x0 = v;
      const double y0 = b0 * x0 + b1 * x1 + b2 * x2 - a1 * y1 - a2 * y2;
      x2 = x1;
      x1 = x0;
      y2 = y1;
      y1 = y0;
      v = y0;
    }
  }
  return y;
}

std::vector<double> bandlimited_noise(std::size_t length, double cutoff_hz, std::uint64_t seed,
                                      int sample_rate) {
  Rng rng(seed);
  std::vector<double> x(length);
  for (double& v : x) v = rng.normal();
  return butterworth_lowpass(x, cutoff_hz, sample_rate);
}

double mean_power(const std::vector<double>& x) {
  if (x.empty()) return 0.0;
  double s = 0.0;
  for (double v : x) s += v * v;
  return s / static_cast<double>(x.size());
}

double mean_power(const MultichannelSignal& x) {
  double s = 0.0;
  std::size_t n = 0;
  for (const auto& ch : x.samples) {
    for (double v : ch) s += v * v;
    n += ch.size();
  }
  return n == 0 ? 0.0 : s / static_cast<double>(n);
}

}  // namespace anclab
