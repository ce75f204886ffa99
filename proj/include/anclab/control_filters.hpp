// Multi-reference FxLMS: pre-training of the direction-indexed control
// filter library, and the adaptive loop shared with the online baseline.
#ifndef ANCLAB_CONTROL_FILTERS_HPP
#define ANCLAB_CONTROL_FILTERS_HPP

#include <string>
#include <vector>

#include "anclab/signal_core.hpp"

namespace anclab {

// J parallel L-tap FIRs whose outputs sum into the control signal.
struct ControlFilter {
  int num_refs = 0;            // J
  int length = 0;              // L
  double doa_deg = 0;
  std::vector<double> taps;    // row-major [j * length + l]

  double& tap(int j, int l) { return taps[static_cast<std::size_t>(j) * length + l]; }
  double tap(int j, int l) const { return taps[static_cast<std::size_t>(j) * length + l]; }
  static ControlFilter zeros(int num_refs, int length, double doa_deg = 0);
};

struct ControlFilterLibrary {
  int grid_resolution_deg = 10;
  std::vector<ControlFilter> filters;  // filters[v].doa_deg == v * grid_resolution_deg

  int size() const { return static_cast<int>(filters.size()); }
  void validate() const;
};

struct SecondaryPath {
  std::vector<double> taps;           // s
  std::vector<double> estimate_taps;  // s_hat
};

// Per-channel causal convolution with the secondary-path estimate.
MultichannelSignal filter_reference(const MultichannelSignal& r,
                                    const std::vector<double>& s_hat);

// One Eq.-style update: w += mu * window * e. heads[j] points at the
// newest filtered-reference sample of channel j; tap l reads heads[j][-l].
void fxlms_step(ControlFilter& w, const double* const* heads, double e, double mu);

// Convenience overload, window[j] holds the L most recent samples
// newest-last.
void fxlms_step(ControlFilter& w, const std::vector<std::vector<double>>& window, double e,
                double mu);

struct FxlmsResult {
  ControlFilter filter;
  std::vector<double> residual;       // e(n)
  std::vector<double> anti_noise;     // (s * y)(n)
  std::vector<double> nrl_per_frame;  // dB, 0.5 s frames
  bool diverged = false;
  bool converged = false;
};

// Runs the sample-rate FxLMS loop: y = w.r, e = d - s*y,
// w += mu_eff * r' * e with r' = s_hat * r. When normalized is set the
// step is scaled by the inverse filtered-reference window power. The loop
// halts (flag, no throw) once a frame NRL falls below halt_below_nrl_db.
FxlmsResult run_fxlms(const MultichannelSignal& refs, const std::vector<double>& disturbance,
                      const SecondaryPath& path, int filter_length, double mu, bool normalized,
                      double halt_below_nrl_db, int frame_len = 8000);

// Acoustic plant for one source direction.
struct AncPlant {
  std::vector<std::vector<double>> ref_rirs;  // source -> each reference capsule
  std::vector<double> primary_rir;            // source -> error microphone
  SecondaryPath secondary;
};

// Pre-trains one library entry with the given excitation (bandlimited
// white noise). Throws Diverged if the running NRL falls below -3 dB;
// zero excitation yields a zero filter flagged not-converged.
FxlmsResult pretrain_filter(const AncPlant& plant, const std::vector<double>& excitation,
                            double doa_deg, int filter_length, double mu = 0.5);

// ---- library file ("ANCW") ----

void save_library(const ControlFilterLibrary& lib, const std::string& path);
ControlFilterLibrary load_library(const std::string& path);

}  // namespace anclab

#endif  // ANCLAB_CONTROL_FILTERS_HPP
