#include "phonpipe/dsp.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

#include "phonpipe/error.hpp"
#include "phonpipe/fft.hpp"

namespace phonpipe::dsp {

namespace {

std::vector<double> hann_window(size_t n) {
  std::vector<double> w(n);
  if (n == 1) {
    w[0] = 1.0;
    return w;
  }
  for (size_t i = 0; i < n; ++i) {
    w[i] = 0.5 - 0.5 * std::cos(2.0 * M_PI * static_cast<double>(i) /
                                static_cast<double>(n - 1));
  }
  return w;
}

// Gaussian analysis window in the reference tool's shape: zero-valued at
// the edges, -120 dB sidelobes.
std::vector<double> gaussian_window(size_t n) {
  std::vector<double> w(n);
  const double edge = std::exp(-12.0);
  const double mid = 0.5 * static_cast<double>(n - 1);
  for (size_t i = 0; i < n; ++i) {
    const double u = (static_cast<double>(i) - mid) / (mid + 1.0);
    w[i] = (std::exp(-12.0 * u * u) - edge) / (1.0 - edge);
  }
  return w;
}

double frame_mean(const std::vector<double>& x) {
  if (x.empty()) return 0.0;
  return std::accumulate(x.begin(), x.end(), 0.0) /
         static_cast<double>(x.size());
}

// Frame centers covering [w/2, dur - w/2] in time_step increments.
std::vector<double> frame_times(double duration, double window,
                                double time_step) {
  std::vector<double> times;
  const double t0 = window / 2.0;
  const double t_end = duration - window / 2.0;
  for (long k = 0;; ++k) {
    const double t = t0 + static_cast<double>(k) * time_step;
    if (t > t_end + 1e-12) break;
    times.push_back(t);
  }
  return times;
}

std::vector<double> cut_frame(const std::vector<double>& x, double fs,
                              double center, size_t wlen) {
  const long start = std::lround(center * fs - static_cast<double>(wlen) / 2.0);
  std::vector<double> frame(wlen, 0.0);
  for (size_t i = 0; i < wlen; ++i) {
    const long idx = start + static_cast<long>(i);
    if (idx >= 0 && idx < static_cast<long>(x.size())) {
      frame[i] = x[static_cast<size_t>(idx)];
    }
  }
  return frame;
}

// Nearest uniformly spaced frame index for time t, within half a step.
std::optional<size_t> nearest_frame(double t, double t_first, double step,
                                    size_t n_frames) {
  if (n_frames == 0) return std::nullopt;
  const double fidx = (t - t_first) / step;
  const long idx = std::lround(fidx);
  if (idx < 0 || idx >= static_cast<long>(n_frames)) return std::nullopt;
  const double frame_time = t_first + static_cast<double>(idx) * step;
  if (std::fabs(frame_time - t) > step / 2.0 + 1e-9) return std::nullopt;
  return static_cast<size_t>(idx);
}

}  // namespace

// ------------------------- pre-emphasis -------------------------

double preemphasis_alpha(double from_hz, double sample_rate) {
  return std::exp(-2.0 * M_PI * from_hz / sample_rate);
}

AudioBuffer pre_emphasize(const AudioBuffer& a, double from_hz) {
  if (from_hz >= a.sample_rate / 2.0) {
    throw DspError("pre-emphasis frequency at or above Nyquist");
  }
  const double alpha = preemphasis_alpha(from_hz, a.sample_rate);
  AudioBuffer out;
  out.sample_rate = a.sample_rate;
  out.samples.resize(a.samples.size());
  if (a.samples.empty()) return out;
  out.samples[0] = a.samples[0];
  for (size_t i = 1; i < a.samples.size(); ++i) {
    out.samples[i] = a.samples[i] - alpha * a.samples[i - 1];
  }
  return out;
}

// ------------------------- resampling -------------------------

AudioBuffer resample(const AudioBuffer& a, double target_rate) {
  if (target_rate <= 0) throw DspError("resample: target rate must be > 0");
  if (target_rate == a.sample_rate) return a;

  const double fs_in = a.sample_rate;
  const double r = std::min(1.0, target_rate / fs_in);  // cutoff / input Nyquist
  const int zero_crossings = 32;
  const double half_width = static_cast<double>(zero_crossings) / r;
  const long hw = static_cast<long>(std::ceil(half_width));

  const size_t n_out = static_cast<size_t>(
      std::llround(static_cast<double>(a.samples.size()) * target_rate / fs_in));
  AudioBuffer out;
  out.sample_rate = target_rate;
  out.samples.resize(n_out, 0.0);

  const long n_in = static_cast<long>(a.samples.size());
  for (size_t m = 0; m < n_out; ++m) {
    const double center = static_cast<double>(m) * fs_in / target_rate;
    const long lo = std::max<long>(0, static_cast<long>(std::floor(center)) - hw);
    const long hi =
        std::min<long>(n_in - 1, static_cast<long>(std::floor(center)) + hw + 1);
    double acc = 0.0;
    for (long n = lo; n <= hi; ++n) {
      const double u = center - static_cast<double>(n);
      if (std::fabs(u) > half_width) continue;
      double sinc;
      if (std::fabs(u) < 1e-12) {
        sinc = 1.0;
      } else {
        sinc = std::sin(M_PI * r * u) / (M_PI * r * u);
      }
      const double v = u / half_width;  // in [-1, 1]
      const double win =
          0.42 + 0.5 * std::cos(M_PI * v) + 0.08 * std::cos(2.0 * M_PI * v);
      acc += a.samples[static_cast<size_t>(n)] * r * sinc * win;
    }
    out.samples[m] = acc;
  }
  return out;
}

// ------------------------- pitch -------------------------

std::optional<double> PitchTrack::value_at(double t) const {
  if (frames.empty()) return std::nullopt;
  const auto idx =
      nearest_frame(t, frames.front().time, params.time_step, frames.size());
  if (!idx || !frames[*idx].voiced) return std::nullopt;
  return frames[*idx].f0;
}

PitchTrack extract_pitch(const AudioBuffer& a, const PitchParams& p) {
  if (!(p.floor_hz < p.ceiling_hz && p.ceiling_hz < a.sample_rate / 2.0)) {
    throw DspError("extract_pitch: need floor < ceiling < Nyquist");
  }
  const double fs = a.sample_rate;
  const double window_s = 3.0 / p.floor_hz;
  const size_t wlen = static_cast<size_t>(std::lround(window_s * fs));
  if (a.samples.size() < wlen) {
    throw DspError("audio shorter than one pitch analysis window");
  }

  PitchTrack track;
  track.params = p;

  const size_t lag_max =
      std::min(wlen - 1, static_cast<size_t>(std::lround(fs / p.floor_hz)) + 2);
  const std::vector<double> win = hann_window(wlen);
  std::vector<double> win_acf = autocorrelation(win, lag_max);

  double global_peak = 0.0;
  {
    const double mean = frame_mean(a.samples);
    for (double s : a.samples) {
      global_peak = std::max(global_peak, std::fabs(s - mean));
    }
  }

  for (double t : frame_times(a.duration(), window_s, p.time_step)) {
    PitchFrame pf;
    pf.time = t;
    std::vector<double> frame = cut_frame(a.samples, fs, t, wlen);
    const double mean = frame_mean(frame);
    double local_peak = 0.0;
    for (double& s : frame) {
      s -= mean;
      local_peak = std::max(local_peak, std::fabs(s));
    }
    if (global_peak <= 0.0 ||
        local_peak < p.silence_threshold * global_peak) {
      track.frames.push_back(pf);
      continue;
    }
    for (size_t i = 0; i < wlen; ++i) frame[i] *= win[i];
    const std::vector<double> acf = autocorrelation(frame, lag_max);
    if (acf[0] <= 0.0) {
      track.frames.push_back(pf);
      continue;
    }
    // Boersma's normalization: divide the frame's normalized ACF by the
    // window's, which undoes the taper the window puts on long lags.
    std::vector<double> rn(acf.size());
    for (size_t k = 0; k < acf.size(); ++k) {
      const double w = win_acf[k] / win_acf[0];
      rn[k] = (w > 1e-12) ? (acf[k] / acf[0]) / w : 0.0;
    }
    // Best local maximum over the whole searchable range; candidates above
    // the ceiling still win here so that the frame can be rejected rather
    // than mislabeled with a subharmonic.
    double best_score = -1e30;
    double best_val = 0.0;
    double best_lag = 0.0;
    for (size_t k = 2; k + 1 < rn.size(); ++k) {
      if (rn[k] > rn[k - 1] && rn[k] >= rn[k + 1]) {
        const double denom = rn[k - 1] - 2.0 * rn[k] + rn[k + 1];
        double delta = 0.0;
        if (std::fabs(denom) > 1e-15) {
          delta = 0.5 * (rn[k - 1] - rn[k + 1]) / denom;
        }
        const double lag = static_cast<double>(k) + delta;
        const double val = rn[k] - 0.25 * (rn[k - 1] - rn[k + 1]) * delta;
        const double score =
            val - p.octave_cost * std::log2(p.floor_hz * lag / fs);
        if (score > best_score) {
          best_score = score;
          best_val = val;
          best_lag = lag;
        }
      }
    }
    if (best_lag > 0.0 && best_val >= p.voicing_threshold) {
      const double f0 = fs / best_lag;
      if (f0 >= p.floor_hz && f0 <= p.ceiling_hz) {
        pf.voiced = true;
        pf.f0 = f0;
        pf.strength = std::min(best_val, 1.0);
      }
    }
    track.frames.push_back(pf);
  }
  return track;
}

// ------------------------- Burg LPC -------------------------

std::vector<double> burg_lpc(const std::vector<double>& frame, int order,
                             std::vector<double>* reflection_out) {
  const size_t n = frame.size();
  if (order < 1) throw DspError("burg_lpc: order must be >= 1");
  if (n <= static_cast<size_t>(order)) {
    throw DspError("burg_lpc: frame length must exceed the order");
  }
  double energy = 0.0;
  for (double s : frame) energy += s * s;
  if (energy <= 0.0) throw DspError("burg_lpc: degenerate all-zero frame");

  // Error-filter coefficients for A(z) = 1 + sum c[k] z^-k.
  std::vector<double> c(static_cast<size_t>(order) + 1, 0.0);
  c[0] = 1.0;
  std::vector<double> f = frame;
  std::vector<double> b = frame;
  if (reflection_out) reflection_out->clear();

  double denom = 2.0 * energy - frame[0] * frame[0] - frame[n - 1] * frame[n - 1];
  for (int m = 0; m < order; ++m) {
    double num = 0.0;
    for (size_t i = static_cast<size_t>(m) + 1; i < n; ++i) {
      num += f[i] * b[i - static_cast<size_t>(m) - 1];
    }
    if (denom <= 0.0) break;  // numerically exhausted; higher terms stay zero
    const double mu = -2.0 * num / denom;
    if (reflection_out) reflection_out->push_back(mu);
    const int half = (m + 1) / 2;
    for (int i = 0; i <= half; ++i) {
      const double t1 = c[static_cast<size_t>(i)] +
                        mu * c[static_cast<size_t>(m + 1 - i)];
      const double t2 = c[static_cast<size_t>(m + 1 - i)] +
                        mu * c[static_cast<size_t>(i)];
      c[static_cast<size_t>(i)] = t1;
      c[static_cast<size_t>(m + 1 - i)] = t2;
    }
    for (size_t i = n - 1; i >= static_cast<size_t>(m) + 1; --i) {
      const double t1 = f[i] + mu * b[i - static_cast<size_t>(m) - 1];
      const double t2 = b[i - static_cast<size_t>(m) - 1] + mu * f[i];
      f[i] = t1;
      b[i - static_cast<size_t>(m) - 1] = t2;
    }
    denom = (1.0 - mu * mu) * denom -
            f[static_cast<size_t>(m) + 1] * f[static_cast<size_t>(m) + 1] -
            b[n - 2 - static_cast<size_t>(m)] * b[n - 2 - static_cast<size_t>(m)];
  }

  // Return predictor coefficients a[k] = -c[k] (x[n] ~ sum a[k] x[n-k]).
  std::vector<double> a(static_cast<size_t>(order));
  for (int k = 1; k <= order; ++k) {
    a[static_cast<size_t>(k - 1)] = -c[static_cast<size_t>(k)];
  }
  return a;
}

std::vector<double> burg_lpc(const std::vector<double>& frame, int order) {
  return burg_lpc(frame, order, nullptr);
}

// ------------------------- roots and formants -------------------------

namespace {

// Durand-Kerner simultaneous root iteration on a monic complex polynomial.
std::vector<std::complex<double>> polynomial_roots(
    const std::vector<double>& monic) {
  const size_t deg = monic.size() - 1;
  if (deg == 0) return {};
  std::vector<std::complex<double>> z(deg);
  const std::complex<double> seed(0.4, 0.9);
  std::complex<double> acc(1.0, 0.0);
  for (size_t i = 0; i < deg; ++i) {
    acc *= seed;
    z[i] = acc;
  }
  auto eval = [&](std::complex<double> x) {
    std::complex<double> v(monic[0], 0.0);
    for (size_t i = 1; i < monic.size(); ++i) {
      v = v * x + monic[i];
    }
    return v;
  };
  const int max_iter = 400;
  for (int it = 0; it < max_iter; ++it) {
    double max_step = 0.0;
    for (size_t i = 0; i < deg; ++i) {
      std::complex<double> d(1.0, 0.0);
      for (size_t j = 0; j < deg; ++j) {
        if (j != i) d *= (z[i] - z[j]);
      }
      if (std::abs(d) < 1e-300) {
        d = std::complex<double>(1e-300, 0.0);
      }
      const std::complex<double> step = eval(z[i]) / d;
      z[i] -= step;
      max_step = std::max(max_step, std::abs(step));
    }
    if (max_step < 1e-12) return z;
  }
  throw DspError("polynomial root finding did not converge");
}

}  // namespace

std::vector<FormantPeak> lpc_to_formants(const std::vector<double>& coeffs,
                                         double fs) {
  // Poles are roots of z^p - a1 z^(p-1) - ... - ap.
  std::vector<double> monic(coeffs.size() + 1);
  monic[0] = 1.0;
  for (size_t k = 0; k < coeffs.size(); ++k) monic[k + 1] = -coeffs[k];
  const std::vector<std::complex<double>> roots = polynomial_roots(monic);

  std::vector<FormantPeak> peaks;
  for (const auto& root : roots) {
    if (root.imag() <= 1e-9) continue;
    const double mag = std::abs(root);
    if (mag >= 1.0 || mag <= 0.0) continue;
    const double freq = std::atan2(root.imag(), root.real()) * fs / (2.0 * M_PI);
    if (freq <= 50.0 || freq >= fs / 2.0 - 50.0) continue;
    FormantPeak fp;
    fp.frequency = freq;
    fp.bandwidth = -std::log(mag) * fs / M_PI;
    peaks.push_back(fp);
  }
  std::sort(peaks.begin(), peaks.end(),
            [](const FormantPeak& x, const FormantPeak& y) {
              return x.frequency < y.frequency;
            });
  return peaks;
}

std::optional<double> FormantTrack::value_at(double t, int number) const {
  if (frames.empty() || number < 1) return std::nullopt;
  const auto idx =
      nearest_frame(t, frames.front().time, params.time_step, frames.size());
  if (!idx) return std::nullopt;
  const FormantFrame& fr = frames[*idx];
  if (!fr.valid || fr.formants.size() < static_cast<size_t>(number)) {
    return std::nullopt;
  }
  return fr.formants[static_cast<size_t>(number - 1)].frequency;
}

FormantTrack extract_formants(const AudioBuffer& a, const FormantParams& p) {
  if (p.time_step <= 0 || p.window <= 0 || p.max_formants < 1 ||
      p.ceiling_hz <= 0 || p.preemphasis_from < 0) {
    throw DspError("extract_formants: parameters must be positive");
  }
  AudioBuffer work = resample(a, 2.0 * p.ceiling_hz);
  work = pre_emphasize(work, p.preemphasis_from);
  const double fs = work.sample_rate;
  const size_t wlen = static_cast<size_t>(std::lround(p.window * fs));
  if (work.samples.size() < wlen) {
    throw DspError("audio shorter than one formant analysis window");
  }
  const std::vector<double> win = gaussian_window(wlen);
  const int order = 2 * p.max_formants;

  FormantTrack track;
  track.params = p;
  for (double t : frame_times(work.duration(), p.window, p.time_step)) {
    FormantFrame ff;
    ff.time = t;
    std::vector<double> frame = cut_frame(work.samples, fs, t, wlen);
    const double mean = frame_mean(frame);
    for (size_t i = 0; i < wlen; ++i) frame[i] = (frame[i] - mean) * win[i];
    double energy = 0.0;
    for (double s : frame) energy += s * s;
    if (energy <= 0.0) {
      track.frames.push_back(ff);  // silence: no formants, still a valid frame
      continue;
    }
    try {
      const std::vector<double> coeffs = burg_lpc(frame, order);
      std::vector<FormantPeak> peaks = lpc_to_formants(coeffs, fs);
      peaks.erase(std::remove_if(peaks.begin(), peaks.end(),
                                 [&](const FormantPeak& fp) {
                                   return fp.bandwidth > p.max_bandwidth;
                                 }),
                  peaks.end());
      if (peaks.size() > static_cast<size_t>(p.max_formants)) {
        peaks.resize(static_cast<size_t>(p.max_formants));
      }
      ff.formants = std::move(peaks);
    } catch (const DspError&) {
      ff.valid = false;
    }
    track.frames.push_back(ff);
  }
  return track;
}

double optimize_ceiling(const AudioBuffer& a,
                        const std::vector<VowelInterval>& vowels,
                        const std::vector<double>& candidates, double init_hz,
                        const FormantParams& base) {
  if (vowels.empty()) {
    throw DspError("optimize_ceiling: need at least one vowel interval");
  }
  if (candidates.empty()) {
    throw DspError("optimize_ceiling: empty candidate grid");
  }
  double best_ceiling = 0.0;
  double best_obj = 0.0;
  bool have_best = false;
  bool any_measured = false;

  for (double cand : candidates) {
    FormantParams p = base;
    p.ceiling_hz = cand;
    const FormantTrack track = extract_formants(a, p);

    // Group midpoint F1/F2 by vowel category.
    std::map<std::string, std::vector<std::pair<double, double>>> by_label;
    for (const VowelInterval& v : vowels) {
      const double mid = 0.5 * (v.t0 + v.t1);
      const auto f1 = track.value_at(mid, 1);
      const auto f2 = track.value_at(mid, 2);
      if (f1 && f2) {
        by_label[v.label].push_back({*f1, *f2});
        any_measured = true;
      }
    }
    double obj = 0.0;
    for (const auto& [label, pts] : by_label) {
      if (pts.size() < 2) continue;
      double m1 = 0, m2 = 0;
      for (const auto& [x, y] : pts) {
        m1 += x;
        m2 += y;
      }
      m1 /= static_cast<double>(pts.size());
      m2 /= static_cast<double>(pts.size());
      double v1 = 0, v2 = 0;
      for (const auto& [x, y] : pts) {
        v1 += (x - m1) * (x - m1);
        v2 += (y - m2) * (y - m2);
      }
      obj += (v1 + v2) / static_cast<double>(pts.size() - 1);
    }
    const bool better =
        !have_best || obj < best_obj ||
        (obj == best_obj &&
         std::fabs(cand - init_hz) < std::fabs(best_ceiling - init_hz));
    if (better) {
      best_obj = obj;
      best_ceiling = cand;
      have_best = true;
    }
  }
  if (!any_measured) {
    throw DspError("optimize_ceiling: no measurable frames in any interval");
  }
  return best_ceiling;
}

// ------------------------- contours -------------------------

bool ContourSample::all_missing() const {
  for (const auto& v : values) {
    if (v.has_value()) return false;
  }
  return true;
}

namespace {

template <typename LookupFn>
ContourSample sample_nine(double t0, double t1, double time_step,
                          LookupFn&& lookup) {
  if (!(t0 < t1)) throw DspError("sample_contour_nine: need t0 < t1");
  ContourSample s;
  for (int k = 1; k <= 9; ++k) {
    s.times[static_cast<size_t>(k - 1)] =
        t0 + static_cast<double>(k) * (t1 - t0) / 10.0;
  }
  if (t1 - t0 < time_step) return s;  // too short to measure: all missing
  for (int k = 0; k < 9; ++k) {
    s.values[static_cast<size_t>(k)] = lookup(s.times[static_cast<size_t>(k)]);
  }
  return s;
}

}  // namespace

ContourSample sample_contour_nine(const PitchTrack& track, double t0,
                                  double t1) {
  return sample_nine(t0, t1, track.params.time_step,
                     [&](double t) { return track.value_at(t); });
}

ContourSample sample_contour_nine(const FormantTrack& track,
                                  int formant_number, double t0, double t1) {
  return sample_nine(t0, t1, track.params.time_step, [&](double t) {
    return track.value_at(t, formant_number);
  });
}

// ------------------------- normalization -------------------------

std::vector<double> zscore(const std::vector<double>& values) {
  if (values.size() < 2) {
    throw DspError("zscore: need at least two values per speaker");
  }
  const double n = static_cast<double>(values.size());
  const double mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  const double sd = std::sqrt(ss / (n - 1.0));
  if (sd <= 0.0) throw DspError("zscore: zero variance");
  std::vector<double> out(values.size());
  for (size_t i = 0; i < values.size(); ++i) out[i] = (values[i] - mean) / sd;
  return out;
}

std::vector<std::vector<double>> lobanov_normalize(
    const std::vector<std::vector<double>>& values_per_formant) {
  std::vector<std::vector<double>> out;
  out.reserve(values_per_formant.size());
  for (const auto& group : values_per_formant) out.push_back(zscore(group));
  return out;
}

// ------------------------- spectral measures -------------------------

double spectral_tilt(const std::vector<double>& frame) {
  if (frame.size() < 2) {
    throw DspError("spectral_tilt: frame length must be >= 2");
  }
  double r0 = 0.0, r1 = 0.0;
  for (size_t i = 0; i < frame.size(); ++i) {
    r0 += frame[i] * frame[i];
    if (i + 1 < frame.size()) r1 += frame[i] * frame[i + 1];
  }
  if (r0 <= 0.0) throw DspError("spectral_tilt: zero-energy frame");
  return r1 / r0;
}

double spectral_centroid(const std::vector<double>& frame, double fs,
                         CentroidMode mode) {
  if (frame.empty()) throw DspError("spectral_centroid: empty frame");
  const size_t n = frame.size();
  const std::vector<double> win = hann_window(n);
  const size_t m = next_pow2(n);
  std::vector<std::complex<double>> buf(m, {0.0, 0.0});
  double energy = 0.0;
  for (size_t i = 0; i < n; ++i) {
    const double v = frame[i] * win[i];
    buf[i] = {v, 0.0};
    energy += v * v;
  }
  if (energy <= 0.0) throw DspError("spectral_centroid: zero-energy frame");
  fft(buf);
  double num = 0.0, den = 0.0;
  for (size_t k = 0; k <= m / 2; ++k) {
    const double f = static_cast<double>(k) * fs / static_cast<double>(m);
    const double mag = std::abs(buf[k]);
    num += f * mag;
    den += (mode == CentroidMode::kMagnitudeWeighted) ? mag : f;
  }
  if (den <= 0.0) throw DspError("spectral_centroid: degenerate spectrum");
  return num / den;
}

// ------------------------- track file I/O -------------------------

namespace {

std::string fmt_g(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

}  // namespace

void write_pitch_track(const PitchTrack& t, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write pitch track: " + path);
  out << "# pitch time_step=" << fmt_g(t.params.time_step)
      << " floor=" << fmt_g(t.params.floor_hz)
      << " ceiling=" << fmt_g(t.params.ceiling_hz) << "\n";
  out << "# time f0 voiced strength\n";
  for (const PitchFrame& f : t.frames) {
    out << fmt_g(f.time) << ' ' << fmt_g(f.voiced ? f.f0 : 0.0) << ' '
        << (f.voiced ? 1 : 0) << ' ' << fmt_g(f.strength) << "\n";
  }
}

PitchTrack read_pitch_track(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open pitch track: " + path);
  PitchTrack t;
  std::string line;
  long lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    if (line[0] == '#') {
      std::istringstream hs(line);
      std::string word;
      while (hs >> word) {
        auto grab = [&](const char* key, double& dst) {
          const std::string k(key);
          if (word.rfind(k, 0) == 0) dst = std::strtod(word.c_str() + k.size(), nullptr);
        };
        grab("time_step=", t.params.time_step);
        grab("floor=", t.params.floor_hz);
        grab("ceiling=", t.params.ceiling_hz);
      }
      continue;
    }
    std::istringstream ls(line);
    PitchFrame f;
    int voiced = 0;
    if (!(ls >> f.time >> f.f0 >> voiced >> f.strength)) {
      throw ParseError("malformed pitch track line", lineno);
    }
    f.voiced = voiced != 0;
    t.frames.push_back(f);
  }
  return t;
}

void write_formant_track(const FormantTrack& t, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write formant track: " + path);
  out << "# formants time_step=" << fmt_g(t.params.time_step)
      << " window=" << fmt_g(t.params.window)
      << " max_formants=" << t.params.max_formants
      << " ceiling=" << fmt_g(t.params.ceiling_hz)
      << " preemphasis=" << fmt_g(t.params.preemphasis_from) << "\n";
  out << "# time valid n [freq bandwidth]...\n";
  for (const FormantFrame& f : t.frames) {
    out << fmt_g(f.time) << ' ' << (f.valid ? 1 : 0) << ' '
        << f.formants.size();
    for (const FormantPeak& fp : f.formants) {
      out << ' ' << fmt_g(fp.frequency) << ' ' << fmt_g(fp.bandwidth);
    }
    out << "\n";
  }
}

FormantTrack read_formant_track(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open formant track: " + path);
  FormantTrack t;
  std::string line;
  long lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    if (line[0] == '#') {
      std::istringstream hs(line);
      std::string word;
      while (hs >> word) {
        auto grabd = [&](const char* key, double& dst) {
          const std::string k(key);
          if (word.rfind(k, 0) == 0) dst = std::strtod(word.c_str() + k.size(), nullptr);
        };
        grabd("time_step=", t.params.time_step);
        grabd("window=", t.params.window);
        grabd("ceiling=", t.params.ceiling_hz);
        grabd("preemphasis=", t.params.preemphasis_from);
        const std::string mk = "max_formants=";
        if (word.rfind(mk, 0) == 0) {
          t.params.max_formants = std::atoi(word.c_str() + mk.size());
        }
      }
      continue;
    }
    std::istringstream ls(line);
    FormantFrame f;
    int valid = 0;
    size_t count = 0;
    if (!(ls >> f.time >> valid >> count)) {
      throw ParseError("malformed formant track line", lineno);
    }
    f.valid = valid != 0;
    for (size_t i = 0; i < count; ++i) {
      FormantPeak fp;
      if (!(ls >> fp.frequency >> fp.bandwidth)) {
        throw ParseError("malformed formant track line", lineno);
      }
      f.formants.push_back(fp);
    }
    t.frames.push_back(f);
  }
  return t;
}

}  // namespace phonpipe::dsp
