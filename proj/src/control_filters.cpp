#include "anclab/control_filters.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

namespace anclab {

ControlFilter ControlFilter::zeros(int num_refs, int length, double doa_deg) {
  ControlFilter w;
  w.num_refs = num_refs;
  w.length = length;
  w.doa_deg = doa_deg;
  w.taps.assign(static_cast<std::size_t>(num_refs) * length, 0.0);
  return w;
}

void ControlFilterLibrary::validate() const {
  require(!filters.empty(), ErrorCode::CorruptLibrary, "empty library");
  require(size() * grid_resolution_deg == 360, ErrorCode::CorruptLibrary,
          "V * grid_resolution must equal 360");
  for (int v = 0; v < size(); ++v) {
    const ControlFilter& f = filters[v];
    require(f.doa_deg == v * grid_resolution_deg, ErrorCode::CorruptLibrary,
            "library DoA grid out of order");
    require(f.taps.size() == static_cast<std::size_t>(f.num_refs) * f.length,
            ErrorCode::CorruptLibrary, "filter tap count mismatch");
    for (double t : f.taps)
      require(std::isfinite(t), ErrorCode::CorruptLibrary, "non-finite filter tap");
  }
}

MultichannelSignal filter_reference(const MultichannelSignal& r,
                                    const std::vector<double>& s_hat) {
  require(!s_hat.empty(), ErrorCode::EmptyFilter, "empty secondary-path estimate");
  r.validate();
  MultichannelSignal out;
  out.sample_rate = r.sample_rate;
  out.samples.reserve(r.samples.size());
  for (const auto& ch : r.samples) out.samples.push_back(fir_filter(ch, s_hat));
  return out;
}

void fxlms_step(ControlFilter& w, const double* const* heads, double e, double mu) {
  require(std::isfinite(e), ErrorCode::NumericFault, "non-finite error sample");
  const double g = mu * e;
  if (g == 0.0) return;
  for (int j = 0; j < w.num_refs; ++j) {
    const double* rp = heads[j];
    double* wj = w.taps.data() + static_cast<std::size_t>(j) * w.length;
    for (int l = 0; l < w.length; ++l) wj[l] += g * rp[-l];
  }
}

void fxlms_step(ControlFilter& w, const std::vector<std::vector<double>>& window, double e,
                double mu) {
  require(static_cast<int>(window.size()) == w.num_refs, ErrorCode::ShapeError,
          "window channel count mismatch");
  std::vector<const double*> heads(window.size());
  for (std::size_t j = 0; j < window.size(); ++j) {
    require(static_cast<int>(window[j].size()) == w.length, ErrorCode::ShapeError,
            "window length mismatch");
    for (double v : window[j])
      require(std::isfinite(v), ErrorCode::NumericFault, "non-finite window sample");
    heads[j] = window[j].data() + w.length - 1;
  }
  fxlms_step(w, heads.data(), e, mu);
}

namespace {

double frame_nrl_db(const double* d, const double* e, std::size_t n) {
  double pd = 0, pe = 0;
  for (std::size_t i = 0; i < n; ++i) {
    pd += d[i] * d[i];
    pe += e[i] * e[i];
  }
  if (pe <= 0.0) return 120.0;
  return 10.0 * std::log10(pd / pe);
}

}  // namespace

FxlmsResult run_fxlms(const MultichannelSignal& refs, const std::vector<double>& disturbance,
                      const SecondaryPath& path, int filter_length, double mu, bool normalized,
                      double halt_below_nrl_db, int frame_len) {
  refs.validate();
  require(!path.taps.empty() && !path.estimate_taps.empty(), ErrorCode::EmptyFilter,
          "secondary path must be non-empty");
  require(refs.length() == disturbance.size(), ErrorCode::LengthMismatch,
          "reference/disturbance length mismatch");

  const int J = refs.channels();
  const int L = filter_length;
  const std::size_t N = disturbance.size();
  const int Ls = static_cast<int>(path.taps.size());

  // filtered reference through the estimate; pad L-1 leading zeros so
  // every window is full
  const MultichannelSignal rprime = filter_reference(refs, path.estimate_taps);
  std::vector<std::vector<double>> rpad(J), xpad(J);
  for (int j = 0; j < J; ++j) {
    rpad[j].assign(static_cast<std::size_t>(L - 1), 0.0);
    rpad[j].insert(rpad[j].end(), rprime.samples[j].begin(), rprime.samples[j].end());
    xpad[j].assign(static_cast<std::size_t>(L - 1), 0.0);
    xpad[j].insert(xpad[j].end(), refs.samples[j].begin(), refs.samples[j].end());
  }

  FxlmsResult res;
  res.filter = ControlFilter::zeros(J, L);
  res.residual.assign(N, 0.0);
  res.anti_noise.assign(N, 0.0);

  std::vector<double> yring(static_cast<std::size_t>(Ls), 0.0);
  std::vector<const double*> heads(static_cast<std::size_t>(J));

  double window_power = 0.0;
  bool halted = false;
  for (std::size_t n = 0; n < N; ++n) {
    if (halted) {
      res.residual[n] = disturbance[n];
      continue;
    }
    // control signal y(n) = w' r(n)
    double y = 0.0;
    for (int j = 0; j < J; ++j) {
      const double* x = xpad[j].data() + (L - 1) + n;
      const double* wj = res.filter.taps.data() + static_cast<std::size_t>(j) * L;
      double acc = 0.0;
      for (int l = 0; l < L; ++l) acc += wj[l] * x[-l];
      y += acc;
    }
    yring[n % Ls] = y;
    // anti-noise through the true secondary path
    double yf = 0.0;
    const int kmax = static_cast<int>(std::min<std::size_t>(n + 1, yring.size()));
    for (int k = 0; k < kmax; ++k) yf += path.taps[k] * yring[(n - k) % Ls];
    res.anti_noise[n] = yf;
    const double e = disturbance[n] - yf;
    res.residual[n] = e;

    double mu_eff = mu;
    if (normalized) {
      for (int j = 0; j < J; ++j) {
        const double in = rpad[j][(L - 1) + n];
        const double out = n >= static_cast<std::size_t>(L) ? rpad[j][n - 1] : 0.0;
        window_power += in * in - out * out;
      }
      if ((n & 8191u) == 0) {  // resync against fp drift
        window_power = 0.0;
        for (int j = 0; j < J; ++j) {
          const double* rp = rpad[j].data() + n;
          for (int l = 0; l < L; ++l) window_power += rp[l] * rp[l];
        }
      }
      mu_eff = mu / (1e-8 + window_power);
    }
    for (int j = 0; j < J; ++j) heads[j] = rpad[j].data() + (L - 1) + n;
    fxlms_step(res.filter, heads.data(), e, mu_eff);

    if ((n + 1) % static_cast<std::size_t>(frame_len) == 0) {
      const std::size_t f0 = n + 1 - frame_len;
      const double nrl = frame_nrl_db(disturbance.data() + f0, res.residual.data() + f0,
                                      static_cast<std::size_t>(frame_len));
      res.nrl_per_frame.push_back(nrl);
      if (nrl < halt_below_nrl_db) {
        res.diverged = true;
        halted = true;  // anti-noise off from here on
      }
    }
  }

  // convergence: final 2 s beat the first 2 s, and the NRL drifts less
  // than 0.5 dB across the last quarter of training
  const int frames = static_cast<int>(res.nrl_per_frame.size());
  const int two_s = std::max(1, 2 * kSampleRate / frame_len);
  if (!res.diverged && frames >= 2 * two_s) {
    auto mean = [&](int lo, int hi) {
      double s = 0;
      for (int i = lo; i < hi; ++i) s += res.nrl_per_frame[i];
      return s / std::max(1, hi - lo);
    };
    const double head = mean(0, two_s);
    const double tail = mean(frames - two_s, frames);
    const int q = std::max(2, frames / 4);
    const double drift =
        std::fabs(mean(frames - q, frames - q / 2) - mean(frames - q / 2, frames));
    res.converged = tail > head && drift < 0.5;
  }
  return res;
}

FxlmsResult pretrain_filter(const AncPlant& plant, const std::vector<double>& excitation,
                            double doa_deg, int filter_length, double mu) {
  require(!plant.ref_rirs.empty(), ErrorCode::EmptyFilter, "plant has no reference paths");
  if (mean_power(excitation) == 0.0) {
    FxlmsResult res;
    res.filter = ControlFilter::zeros(static_cast<int>(plant.ref_rirs.size()), filter_length,
                                      doa_deg);
    res.converged = false;
    return res;
  }
  MultichannelSignal refs;
  refs.sample_rate = kSampleRate;
  for (const auto& rir : plant.ref_rirs) refs.samples.push_back(fir_filter(excitation, rir));
  const std::vector<double> d = fir_filter(excitation, plant.primary_rir);

  FxlmsResult res =
      run_fxlms(refs, d, plant.secondary, filter_length, mu, /*normalized=*/true,
                /*halt_below_nrl_db=*/-3.0);
  res.filter.doa_deg = doa_deg;
  if (res.diverged) fail(ErrorCode::Diverged, "pretraining diverged (NRL below -3 dB)");
  return res;
}

void save_library(const ControlFilterLibrary& lib, const std::string& path) {
  lib.validate();
  std::ofstream os(path, std::ios::binary);
  require(static_cast<bool>(os), ErrorCode::IoError, "cannot write " + path);
  os.write("ANCW", 4);
  write_u32(os, 1);  // version
  write_u32(os, static_cast<std::uint32_t>(lib.size()));
  write_u32(os, static_cast<std::uint32_t>(lib.filters[0].num_refs));
  write_u32(os, static_cast<std::uint32_t>(lib.filters[0].length));
  write_u32(os, static_cast<std::uint32_t>(lib.grid_resolution_deg));
  for (const ControlFilter& f : lib.filters) write_f64_array(os, f.taps.data(), f.taps.size());
}

ControlFilterLibrary load_library(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  require(static_cast<bool>(is), ErrorCode::IoError, "cannot open " + path);
  char magic[4];
  is.read(magic, 4);
  require(is && std::string(magic, 4) == "ANCW", ErrorCode::CorruptLibrary, path + ": bad magic");
  require(read_u32(is) == 1, ErrorCode::CorruptLibrary, path + ": unsupported version");
  const std::uint32_t V = read_u32(is);
  const std::uint32_t J = read_u32(is);
  const std::uint32_t L = read_u32(is);
  const std::uint32_t grid = read_u32(is);

  ControlFilterLibrary lib;
  lib.grid_resolution_deg = static_cast<int>(grid);
  lib.filters.reserve(V);
  for (std::uint32_t v = 0; v < V; ++v) {
    ControlFilter f = ControlFilter::zeros(static_cast<int>(J), static_cast<int>(L),
                                           static_cast<double>(v * grid));
    read_f64_array(is, f.taps.data(), f.taps.size());
    lib.filters.push_back(std::move(f));
  }
  require(static_cast<bool>(is), ErrorCode::CorruptLibrary, path + ": truncated file");
  lib.validate();
  return lib;
}

}  // namespace anclab
