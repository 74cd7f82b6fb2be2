#ifndef PHONPIPE_DSP_HPP
#define PHONPIPE_DSP_HPP

#include <array>
#include <complex>
#include <optional>
#include <string>
#include <vector>

#include "phonpipe/wav.hpp"

namespace phonpipe::dsp {

// ------------------------- tracks -------------------------

struct PitchParams {
  double time_step = 0.01;
  double floor_hz = 75.0;
  double ceiling_hz = 300.0;
  // Pinned analysis knobs (documented reference-tool defaults).
  double voicing_threshold = 0.45;
  double silence_threshold = 0.03;
  double octave_cost = 0.01;
};

struct PitchFrame {
  double time = 0.0;
  double f0 = 0.0;  // meaningful only when voiced
  bool voiced = false;
  double strength = 0.0;  // best normalized autocorrelation peak
};

struct PitchTrack {
  std::vector<PitchFrame> frames;
  PitchParams params;

  // Voiced f0 at time t (nearest frame within time_step/2), if any.
  std::optional<double> value_at(double t) const;
};

struct FormantParams {
  double time_step = 0.01;
  double window = 0.025;
  int max_formants = 5;
  double ceiling_hz = 5000.0;
  double preemphasis_from = 50.0;
  double max_bandwidth = 700.0;  // broader candidates are dropped
};

struct FormantPeak {
  double frequency = 0.0;
  double bandwidth = 0.0;
};

struct FormantFrame {
  double time = 0.0;
  std::vector<FormantPeak> formants;  // ascending frequency
  bool valid = true;                  // false when root finding failed
};

struct FormantTrack {
  std::vector<FormantFrame> frames;
  FormantParams params;

  // Frequency of formant `number` (1-based) at time t.
  std::optional<double> value_at(double t, int number) const;
};

// Nine observation points at relative positions 0.1..0.9 of a segment.
// Slots without a measurable frame are left empty rather than interpolated.
struct ContourSample {
  std::array<std::optional<double>, 9> values;
  std::array<double, 9> times{};
  bool all_missing() const;
};

// ------------------------- operations -------------------------

// y[n] = x[n] - alpha * x[n-1], alpha = exp(-2*pi*from_hz / sample_rate);
// y[0] = x[0]. Throws DspError when from_hz >= Nyquist.
AudioBuffer pre_emphasize(const AudioBuffer& a, double from_hz);

double preemphasis_alpha(double from_hz, double sample_rate);

// Band-limited windowed-sinc resampling. Identity when rates match.
AudioBuffer resample(const AudioBuffer& a, double target_rate);

// Normalized-autocorrelation pitch extraction over 3/floor-second frames.
// The best candidate across the full lag range decides the frame: below the
// voicing threshold, silent, or outside [floor, ceiling] means unvoiced.
PitchTrack extract_pitch(const AudioBuffer& a, const PitchParams& p = {});

// Burg all-pole fit; returns a[1..order] with x[n] ~ sum a[k] x[n-k].
// Throws DspError on degenerate all-zero frames.
std::vector<double> burg_lpc(const std::vector<double>& frame, int order);

// Same fit, also reporting the reflection coefficients (all in (-1, 1)).
std::vector<double> burg_lpc(const std::vector<double>& frame, int order,
                             std::vector<double>* reflection_out);

// Roots of 1 - sum a[k] z^-k with positive imaginary part, mapped to
// frequency F = angle*fs/(2*pi) and bandwidth B = -ln|root|*fs/pi, sorted
// ascending. Roots outside (50 Hz, fs/2 - 50 Hz) are discarded.
std::vector<FormantPeak> lpc_to_formants(const std::vector<double>& coeffs,
                                         double fs);

// resample to 2*ceiling -> pre-emphasize -> per frame: Gaussian window,
// Burg of order 2*max_formants, root solve, keep at most max_formants.
FormantTrack extract_formants(const AudioBuffer& a, const FormantParams& p = {});

struct VowelInterval {
  double t0 = 0.0;
  double t1 = 0.0;
  std::string label;
};

// Picks the candidate ceiling minimizing the summed per-category variance
// of F1 and F2 at vowel midpoints; ties go to the candidate nearest init_hz.
double optimize_ceiling(const AudioBuffer& a,
                        const std::vector<VowelInterval>& vowels,
                        const std::vector<double>& candidates, double init_hz,
                        const FormantParams& base = {});

// Nine evenly distributed observation points at t0 + k*(t1-t0)/10, k=1..9;
// the segment edges are never sampled.
ContourSample sample_contour_nine(const PitchTrack& track, double t0,
                                  double t1);
ContourSample sample_contour_nine(const FormantTrack& track, int formant_number,
                                  double t0, double t1);

// Per-speaker z-score (n-1 standard deviation). Throws DspError for fewer
// than two values or zero variance.
std::vector<double> zscore(const std::vector<double>& values);

// zscore applied within each formant-number group of one speaker's data.
// values[g] holds all measurements of formant g+1.
std::vector<std::vector<double>> lobanov_normalize(
    const std::vector<std::vector<double>>& values_per_formant);

// First-order all-pole predictor coefficient a1 = r(1)/r(0) from the biased
// autocorrelation. Near +1 means a steeply low-pass (tilted) spectrum.
double spectral_tilt(const std::vector<double>& frame);

enum class CentroidMode {
  kMagnitudeWeighted,  // sum f|X| / sum |X|
  kFrequencyWeighted,  // sum f|X| / sum f  (literal reading; off by default)
};

// Magnitude-weighted mean frequency of the Hann-windowed frame's spectrum.
double spectral_centroid(const std::vector<double>& frame, double fs,
                         CentroidMode mode = CentroidMode::kMagnitudeWeighted);

// ------------------------- track file I/O -------------------------

void write_pitch_track(const PitchTrack& t, const std::string& path);
PitchTrack read_pitch_track(const std::string& path);
void write_formant_track(const FormantTrack& t, const std::string& path);
FormantTrack read_formant_track(const std::string& path);

}  // namespace phonpipe::dsp

#endif  // PHONPIPE_DSP_HPP
