// raso/signal.hpp

// Copyright 2026  RASO Authors

// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#ifndef RASO_SIGNAL_HPP_
#define RASO_SIGNAL_HPP_

#include <array>
#include <complex>
#include <functional>
#include <string>
#include <vector>

#include "raso/common.hpp"

namespace raso {

// Mono PCM audio at the project-wide fixed rate.
struct AudioClip {
  std::vector<real> samples;  // in [-1, 1]
  int sample_rate_hz = kSampleRateHz;
};

// Log-magnitude mel spectrogram, row-major [n_mels x n_frames].  Band 0 is
// the lowest frequency; the "lower bands" used for formant processing are
// rows [0, 40).
struct MelSpectrogram {
  int64_t n_mels = kNumMelBands;
  int64_t n_frames = 0;
  real frame_hop_s = kFrameHopSeconds;
  real frame_window_s = kFrameWindowSeconds;
  std::vector<real> values;

  MelSpectrogram() = default;
  MelSpectrogram(int64_t mels, int64_t frames)
      : n_mels(mels), n_frames(frames),
        values(static_cast<size_t>(mels * frames), 0.0) {}

  real &at(int64_t band, int64_t frame) {
    return values[static_cast<size_t>(band * n_frames + frame)];
  }
  real at(int64_t band, int64_t frame) const {
    return values[static_cast<size_t>(band * n_frames + frame)];
  }
  bool all_finite() const {
    for (real v : values)
      if (!std::isfinite(v)) return false;
    return true;
  }
};

// Per-frame F0 contour aligned one-to-one with mel frames.
struct PitchTrack {
  std::vector<real> f0_hz;       // 0 exactly when unvoiced
  std::vector<uint8_t> voiced;

  size_t size() const { return f0_hz.size(); }
  int num_voiced() const {
    int n = 0;
    for (uint8_t v : voiced) n += v ? 1 : 0;
    return n;
  }
  // Arithmetic mean of f0 over voiced frames; error if none are voiced.
  real MeanVoicedF0() const;
};

// First three formants for each analyzed (non-silent) frame.  Frames where
// LPC analysis found fewer than three qualifying resonances keep zeros and a
// cleared confidence flag.
struct FormantTrack {
  std::vector<std::array<real, 3>> formant_hz;
  std::vector<uint8_t> confident;

  size_t size() const { return formant_hz.size(); }
  int num_confident() const {
    int n = 0;
    for (uint8_t c : confident) n += c ? 1 : 0;
    return n;
  }
};

// Pooled per-formant first and second moments (population std).
struct FormantStats {
  std::array<real, 3> mean{0, 0, 0};
  std::array<real, 3> stddev{0, 0, 0};
};

struct SynthCorpusConfig {
  int n_clips = 200;                       // must be even; split evenly by class
  real clip_seconds = 1.0;
  std::array<real, 2> class_f0_mean_hz = {120.0, 210.0};
  std::array<real, 2> class_f0_std_hz = {15.0, 25.0};
  // Additive per-class offsets applied to the base vowel formants.
  std::array<std::array<real, 3>, 2> class_formant_offsets_hz = {
      {{0.0, 0.0, 0.0}, {100.0, 150.0, 180.0}}};
  uint64_t seed = 1;
};

struct SynthClip {
  AudioClip clip;
  int sex = 0;                 // 0 = male-like class, 1 = female-like class
  std::string transcript;      // space-separated vowel tokens, WER ground truth
};

// ---------------------------------------------------------------------------
// audio file and mel container I/O
// ---------------------------------------------------------------------------

AudioClip ReadWav(const std::string &path);
void WriteWav(const std::string &path, const AudioClip &clip);

// Binary mel container: {n_mels: u32, n_frames: u32, hop_s: f64} then
// row-major 32-bit floats.
void SaveMel(const std::string &path, const MelSpectrogram &mel);
MelSpectrogram LoadMel(const std::string &path);

// ---------------------------------------------------------------------------
// analysis / synthesis
// ---------------------------------------------------------------------------

// Radix-2 in-place FFT; size must be a power of two.  Exposed for tests.
void Fft(std::vector<std::complex<real>> *a, bool inverse);

// HTK-style mel scale; the filterbank grid places band centers at
// mel(8000) * (b + 1) / 81 for b in [0, 80).
real HzToMel(real hz);
real MelToHz(real mel);
real MelBandCenterHz(int band);

// 80-band log-magnitude mel spectrogram; Hann window 25 ms, hop 10 ms,
// centered frames, T = 1 + floor(n_samples / hop).  Values are floored at
// log(1e-5).  Throws "clip too short" below one window.
MelSpectrogram ComputeMel(const AudioClip &clip);

// Iterative phase reconstruction through the mel pseudo-inverse; output
// length (T - 1) * hop samples, clipped to [-1, 1].
AudioClip InvertMel(const MelSpectrogram &mel, int iterations = 60);

// Normalized-autocorrelation pitch tracker with 5-frame median smoothing;
// one estimate per mel frame, voiced range [50, 500] Hz.
PitchTrack EstimateF0(const AudioClip &clip);

// Per-band median log-mel pattern of a steady synthetic harmonic source
// (1/k-amplitude partials up to 7600 Hz) at the given fundamental.  This is
// what the front-end actually measures for a tone at f0, window smearing
// included, so spectrogram edits built from it stay consistent with the
// analysis window.  f0 is rounded to the nearest Hz and results are cached;
// the returned reference stays valid for the process lifetime.
const std::vector<real> &HarmonicSourcePattern(real f0_hz);

// Pluggable estimator hook: anything that maps a clip to an aligned track
// (e.g. a learned model) can stand in for the default.
using PitchEstimator = std::function<PitchTrack(const AudioClip &)>;

// LPC analysis per non-silent frame: roots inside the unit circle with
// bandwidth < 400 Hz, sorted ascending; frames with fewer than three
// qualifying roots are flagged non-confident.  lpc_order must be >= 8.
FormantTrack ExtractFormants(const AudioClip &clip, int lpc_order = 18);

// Pooled mean/std over confident frames of all tracks; throws
// "no formant data" when nothing qualifies.
FormantStats FormantStatistics(const std::vector<FormantTrack> &tracks);

// Deterministic two-class harmonic vowel corpus (desk-scale stand-in for a
// real sex-balanced speech corpus).
std::vector<SynthClip> SynthCorpus(const SynthCorpusConfig &cfg);

// Names of the vowel templates used by SynthCorpus, in token order.  The
// template matcher in the evaluation harness shares this inventory.
const std::vector<std::string> &VowelInventory();

// Male-reference formant frequencies for a vowel token (F1..F3).
std::array<real, 3> VowelFormants(const std::string &token);

}  // namespace raso

#endif  // RASO_SIGNAL_HPP_
