// raso/signal.cpp

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

#include "raso/signal.hpp"

#include <algorithm>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <map>
#include <mutex>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

namespace raso {

namespace {
constexpr real kPi = 3.14159265358979323846;
constexpr int kNumFftBins = kFftSize / 2 + 1;  // one-sided, 257
constexpr real kFmaxHz = 8000.0;
}  // namespace

real PitchTrack::MeanVoicedF0() const {
  real sum = 0;
  int n = 0;
  for (size_t i = 0; i < f0_hz.size(); i++) {
    if (voiced[i]) {
      sum += f0_hz[i];
      n++;
    }
  }
  RASO_CHECK(n > 0, "pitch track has no voiced frames");
  return sum / n;
}

// ---------------------------------------------------------------------------
// WAV I/O (PCM16 mono @16k only)
// ---------------------------------------------------------------------------

AudioClip ReadWav(const std::string &path) {
  std::ifstream f(path, std::ios::binary);
  RASO_CHECK(f.good(), "cannot open wav file: " + path);
  char riff[4], wave[4];
  uint32_t riff_size = 0;
  f.read(riff, 4);
  f.read(reinterpret_cast<char *>(&riff_size), 4);
  f.read(wave, 4);
  RASO_CHECK(f.good() && std::memcmp(riff, "RIFF", 4) == 0 &&
                 std::memcmp(wave, "WAVE", 4) == 0,
             "not a RIFF/WAVE file: " + path);
  bool have_fmt = false;
  AudioClip clip;
  while (f.good()) {
    char id[4];
    uint32_t size = 0;
    f.read(id, 4);
    f.read(reinterpret_cast<char *>(&size), 4);
    if (!f.good()) break;
    if (std::memcmp(id, "fmt ", 4) == 0) {
      uint16_t fmt = 0, channels = 0, bits = 0;
      uint32_t rate = 0, byte_rate = 0;
      uint16_t block_align = 0;
      f.read(reinterpret_cast<char *>(&fmt), 2);
      f.read(reinterpret_cast<char *>(&channels), 2);
      f.read(reinterpret_cast<char *>(&rate), 4);
      f.read(reinterpret_cast<char *>(&byte_rate), 4);
      f.read(reinterpret_cast<char *>(&block_align), 2);
      f.read(reinterpret_cast<char *>(&bits), 2);
      if (size > 16) f.seekg(size - 16, std::ios::cur);
      RASO_CHECK(fmt == 1 && channels == 1 && bits == 16,
                 "unsupported wav encoding (need PCM16 mono): " + path);
      RASO_CHECK(rate == static_cast<uint32_t>(kSampleRateHz),
                 "unsupported sample rate (need 16 kHz): " + path);
      have_fmt = true;
    } else if (std::memcmp(id, "data", 4) == 0) {
      RASO_CHECK(have_fmt, "wav data chunk before fmt chunk: " + path);
      const size_t n = size / 2;
      std::vector<int16_t> raw(n);
      f.read(reinterpret_cast<char *>(raw.data()),
             static_cast<std::streamsize>(size));
      RASO_CHECK(f.good(), "truncated wav data: " + path);
      clip.samples.resize(n);
      for (size_t i = 0; i < n; i++)
        clip.samples[i] = static_cast<real>(raw[i]) / 32768.0;
      return clip;
    } else {
      f.seekg(size + (size & 1), std::ios::cur);  // chunks are word-aligned
    }
  }
  throw Error("wav file has no data chunk: " + path);
}

void WriteWav(const std::string &path, const AudioClip &clip) {
  RASO_CHECK(clip.sample_rate_hz == kSampleRateHz, "unexpected sample rate");
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  RASO_CHECK(f.good(), "cannot write wav file: " + path);
  const uint32_t n_bytes = static_cast<uint32_t>(clip.samples.size() * 2);
  const uint32_t riff_size = 36 + n_bytes;
  const uint32_t rate = kSampleRateHz, byte_rate = kSampleRateHz * 2;
  const uint16_t fmt = 1, channels = 1, block_align = 2, bits = 16;
  const uint32_t fmt_size = 16;
  f.write("RIFF", 4);
  f.write(reinterpret_cast<const char *>(&riff_size), 4);
  f.write("WAVE", 4);
  f.write("fmt ", 4);
  f.write(reinterpret_cast<const char *>(&fmt_size), 4);
  f.write(reinterpret_cast<const char *>(&fmt), 2);
  f.write(reinterpret_cast<const char *>(&channels), 2);
  f.write(reinterpret_cast<const char *>(&rate), 4);
  f.write(reinterpret_cast<const char *>(&byte_rate), 4);
  f.write(reinterpret_cast<const char *>(&block_align), 2);
  f.write(reinterpret_cast<const char *>(&bits), 2);
  f.write("data", 4);
  f.write(reinterpret_cast<const char *>(&n_bytes), 4);
  for (real v : clip.samples) {
    const real c = std::max<real>(-1.0, std::min<real>(1.0, v));
    const int16_t s = static_cast<int16_t>(std::lrint(c * 32767.0));
    f.write(reinterpret_cast<const char *>(&s), 2);
  }
  RASO_CHECK(f.good(), "failed writing wav file: " + path);
}

void SaveMel(const std::string &path, const MelSpectrogram &mel) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  RASO_CHECK(f.good(), "cannot write mel file: " + path);
  const uint32_t n_mels = static_cast<uint32_t>(mel.n_mels);
  const uint32_t n_frames = static_cast<uint32_t>(mel.n_frames);
  const double hop = mel.frame_hop_s;
  f.write(reinterpret_cast<const char *>(&n_mels), 4);
  f.write(reinterpret_cast<const char *>(&n_frames), 4);
  f.write(reinterpret_cast<const char *>(&hop), 8);
  for (real v : mel.values) {
    const float x = static_cast<float>(v);
    f.write(reinterpret_cast<const char *>(&x), 4);
  }
  RASO_CHECK(f.good(), "failed writing mel file: " + path);
}

MelSpectrogram LoadMel(const std::string &path) {
  std::ifstream f(path, std::ios::binary);
  RASO_CHECK(f.good(), "cannot open mel file: " + path);
  uint32_t n_mels = 0, n_frames = 0;
  double hop = 0;
  f.read(reinterpret_cast<char *>(&n_mels), 4);
  f.read(reinterpret_cast<char *>(&n_frames), 4);
  f.read(reinterpret_cast<char *>(&hop), 8);
  RASO_CHECK(f.good() && n_mels == kNumMelBands && n_frames >= 1,
             "corrupt mel file header: " + path);
  MelSpectrogram mel(n_mels, n_frames);
  mel.frame_hop_s = hop;
  for (auto &v : mel.values) {
    float x = 0;
    f.read(reinterpret_cast<char *>(&x), 4);
    v = x;
  }
  RASO_CHECK(f.good(), "truncated mel file: " + path);
  return mel;
}

// ---------------------------------------------------------------------------
// FFT and STFT plumbing
// ---------------------------------------------------------------------------

void Fft(std::vector<std::complex<real>> *a, bool inverse) {
  const size_t n = a->size();
  RASO_CHECK(n >= 2 && (n & (n - 1)) == 0, "FFT size must be a power of two");
  auto &x = *a;
  for (size_t i = 1, j = 0; i < n; i++) {
    size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(x[i], x[j]);
  }
  for (size_t len = 2; len <= n; len <<= 1) {
    const real ang = 2 * kPi / static_cast<real>(len) * (inverse ? 1 : -1);
    const std::complex<real> wlen(std::cos(ang), std::sin(ang));
    for (size_t i = 0; i < n; i += len) {
      std::complex<real> w(1);
      for (size_t k = 0; k < len / 2; k++) {
        const std::complex<real> u = x[i + k];
        const std::complex<real> v = x[i + k + len / 2] * w;
        x[i + k] = u + v;
        x[i + k + len / 2] = u - v;
        w *= wlen;
      }
    }
  }
  if (inverse)
    for (auto &v : x) v /= static_cast<real>(n);
}

real HzToMel(real hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
real MelToHz(real mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }
real MelBandCenterHz(int band) {
  return MelToHz(HzToMel(kFmaxHz) * static_cast<real>(band + 1) /
                 (kNumMelBands + 1));
}

namespace {

std::vector<real> HannWindow(int n) {
  std::vector<real> w(static_cast<size_t>(n));
  for (int i = 0; i < n; i++)
    w[static_cast<size_t>(i)] = 0.5 - 0.5 * std::cos(2 * kPi * i / n);
  return w;
}

// Reflect-padded read so frames centered near the edges stay well-defined.
inline real SampleAt(const std::vector<real> &x, int64_t i) {
  const int64_t n = static_cast<int64_t>(x.size());
  if (i < 0) i = -i;
  if (i >= n) i = 2 * n - 2 - i;
  if (i < 0 || i >= n) return 0.0;  // degenerate very-short inputs
  return x[static_cast<size_t>(i)];
}

int64_t NumFrames(size_t n_samples) {
  return 1 + static_cast<int64_t>(n_samples) / kHopSamples;
}

// Magnitude STFT: frames centered at t * hop, Hann window, one-sided bins.
std::vector<std::vector<std::complex<real>>> Stft(const std::vector<real> &x) {
  const int64_t T = NumFrames(x.size());
  static const std::vector<real> win = HannWindow(kWindowSamples);
  std::vector<std::vector<std::complex<real>>> frames(
      static_cast<size_t>(T));
  std::vector<std::complex<real>> buf(kFftSize);
  for (int64_t t = 0; t < T; t++) {
    const int64_t center = t * kHopSamples;
    std::fill(buf.begin(), buf.end(), std::complex<real>(0));
    for (int i = 0; i < kWindowSamples; i++) {
      const int64_t idx = center - kWindowSamples / 2 + i;
      buf[static_cast<size_t>(i)] = SampleAt(x, idx) * win[static_cast<size_t>(i)];
    }
    Fft(&buf, false);
    frames[static_cast<size_t>(t)].assign(buf.begin(), buf.begin() + kNumFftBins);
  }
  return frames;
}

// Weighted overlap-add inverse of Stft; returns (T - 1) * hop samples.
std::vector<real> Istft(
    const std::vector<std::vector<std::complex<real>>> &frames) {
  static const std::vector<real> win = HannWindow(kWindowSamples);
  const int64_t T = static_cast<int64_t>(frames.size());
  const int64_t pad = kWindowSamples / 2;
  const int64_t total = (T - 1) * kHopSamples + kWindowSamples;
  std::vector<real> acc(static_cast<size_t>(total), 0.0);
  std::vector<real> norm(static_cast<size_t>(total), 0.0);
  std::vector<std::complex<real>> buf(kFftSize);
  for (int64_t t = 0; t < T; t++) {
    std::fill(buf.begin(), buf.end(), std::complex<real>(0));
    for (int k = 0; k < kNumFftBins; k++) {
      buf[static_cast<size_t>(k)] = frames[static_cast<size_t>(t)][static_cast<size_t>(k)];
      if (k > 0 && k < kFftSize / 2)
        buf[static_cast<size_t>(kFftSize - k)] =
            std::conj(frames[static_cast<size_t>(t)][static_cast<size_t>(k)]);
    }
    Fft(&buf, true);
    const int64_t start = t * kHopSamples;
    for (int i = 0; i < kWindowSamples; i++) {
      const real w = win[static_cast<size_t>(i)];
      acc[static_cast<size_t>(start + i)] += buf[static_cast<size_t>(i)].real() * w;
      norm[static_cast<size_t>(start + i)] += w * w;
    }
  }
  const int64_t out_len = (T - 1) * kHopSamples;
  std::vector<real> y(static_cast<size_t>(std::max<int64_t>(out_len, 0)), 0.0);
  for (int64_t i = 0; i < out_len; i++) {
    const int64_t j = i + pad;
    if (j < total && norm[static_cast<size_t>(j)] > 1e-8)
      y[static_cast<size_t>(i)] = acc[static_cast<size_t>(j)] / norm[static_cast<size_t>(j)];
  }
  return y;
}

// Triangular filterbank rows [n_mels x n_bins] on magnitude bins.
const std::vector<std::vector<real>> &MelFilterbank() {
  static const std::vector<std::vector<real>> fb = [] {
    std::vector<std::vector<real>> rows(
        kNumMelBands, std::vector<real>(kNumFftBins, 0.0));
    const real mel_hi = HzToMel(kFmaxHz);
    std::vector<real> hz(kNumMelBands + 2);
    for (int i = 0; i < kNumMelBands + 2; i++)
      hz[static_cast<size_t>(i)] =
          MelToHz(mel_hi * static_cast<real>(i) / (kNumMelBands + 1));
    for (int b = 0; b < kNumMelBands; b++) {
      const real fl = hz[static_cast<size_t>(b)];
      const real fc = hz[static_cast<size_t>(b + 1)];
      const real fr = hz[static_cast<size_t>(b + 2)];
      for (int k = 0; k < kNumFftBins; k++) {
        const real f = static_cast<real>(k) * kSampleRateHz / kFftSize;
        real w = 0;
        if (f > fl && f < fc) w = (f - fl) / (fc - fl);
        else if (f >= fc && f < fr) w = (fr - f) / (fr - fc);
        rows[static_cast<size_t>(b)][static_cast<size_t>(k)] = w;
      }
    }
    return rows;
  }();
  return fb;
}

// Ridge-regularized pseudo-inverse of the filterbank, [n_bins x n_mels].
const Eigen::MatrixXd &MelPseudoInverse() {
  static const Eigen::MatrixXd pinv = [] {
    const auto &fb = MelFilterbank();
    Eigen::MatrixXd M(kNumMelBands, kNumFftBins);
    for (int b = 0; b < kNumMelBands; b++)
      for (int k = 0; k < kNumFftBins; k++) M(b, k) = fb[static_cast<size_t>(b)][static_cast<size_t>(k)];
    Eigen::MatrixXd G = M * M.transpose();
    G.diagonal().array() += 1e-8;
    const Eigen::MatrixXd Y = G.ldlt().solve(M);  // [n_mels x n_bins]
    return Eigen::MatrixXd(Y.transpose());
  }();
  return pinv;
}

}  // namespace

MelSpectrogram ComputeMel(const AudioClip &clip) {
  RASO_CHECK(clip.sample_rate_hz == kSampleRateHz, "unexpected sample rate");
  RASO_CHECK(static_cast<int>(clip.samples.size()) >= kWindowSamples,
             "clip too short");
  for (real v : clip.samples) RASO_CHECK(std::isfinite(v), "non-finite sample");
  const auto frames = Stft(clip.samples);
  const auto &fb = MelFilterbank();
  MelSpectrogram mel(kNumMelBands, static_cast<int64_t>(frames.size()));
  for (int64_t t = 0; t < mel.n_frames; t++) {
    for (int b = 0; b < kNumMelBands; b++) {
      real s = 0;
      const auto &row = fb[static_cast<size_t>(b)];
      const auto &fr = frames[static_cast<size_t>(t)];
      for (int k = 0; k < kNumFftBins; k++)
        s += row[static_cast<size_t>(k)] * std::abs(fr[static_cast<size_t>(k)]);
      mel.at(b, t) = std::log(std::max<real>(s, kMelFloor));
    }
  }
  return mel;
}

AudioClip InvertMel(const MelSpectrogram &mel, int iterations) {
  RASO_CHECK(iterations >= 1, "iterations must be >= 1");
  RASO_CHECK(mel.n_mels == kNumMelBands && mel.n_frames >= 1 && mel.all_finite(),
             "invalid mel spectrogram");
  const Eigen::MatrixXd &pinv = MelPseudoInverse();
  const int64_t T = mel.n_frames;
  // Target magnitudes per frame through the pseudo-inverse, clamped >= 0.
  std::vector<std::vector<real>> mag(static_cast<size_t>(T),
                                     std::vector<real>(kNumFftBins, 0.0));
  Eigen::VectorXd m(kNumMelBands);
  for (int64_t t = 0; t < T; t++) {
    for (int b = 0; b < kNumMelBands; b++) m(b) = std::exp(mel.at(b, t));
    Eigen::VectorXd lin = pinv * m;
    for (int k = 0; k < kNumFftBins; k++)
      mag[static_cast<size_t>(t)][static_cast<size_t>(k)] = std::max(lin(k), 0.0);
  }
  // Iterative phase reconstruction starting from zero phase.
  std::vector<std::vector<std::complex<real>>> spec(
      static_cast<size_t>(T),
      std::vector<std::complex<real>>(kNumFftBins, {0, 0}));
  for (int64_t t = 0; t < T; t++)
    for (int k = 0; k < kNumFftBins; k++)
      spec[static_cast<size_t>(t)][static_cast<size_t>(k)] =
          std::complex<real>(mag[static_cast<size_t>(t)][static_cast<size_t>(k)], 0);
  std::vector<real> x = Istft(spec);
  for (int it = 0; it < iterations; it++) {
    const auto est = Stft(x);
    const int64_t Te = std::min<int64_t>(T, static_cast<int64_t>(est.size()));
    for (int64_t t = 0; t < Te; t++) {
      for (int k = 0; k < kNumFftBins; k++) {
        const std::complex<real> c = est[static_cast<size_t>(t)][static_cast<size_t>(k)];
        const real a = std::abs(c);
        const std::complex<real> phase = a > 1e-12 ? c / a : std::complex<real>(1, 0);
        spec[static_cast<size_t>(t)][static_cast<size_t>(k)] =
            phase * mag[static_cast<size_t>(t)][static_cast<size_t>(k)];
      }
    }
    x = Istft(spec);
  }
  AudioClip out;
  out.samples.resize(x.size());
  for (size_t i = 0; i < x.size(); i++)
    out.samples[i] = std::max<real>(-1.0, std::min<real>(1.0, x[i]));
  return out;
}

// ---------------------------------------------------------------------------
// pitch
// ---------------------------------------------------------------------------

namespace {

constexpr int kPitchWindow = 640;                 // 40 ms, fits a 50 Hz period twice
constexpr int kLagMin = kSampleRateHz / 500;      // 32
constexpr int kLagMax = kSampleRateHz / 50;       // 320
constexpr real kVoicingThreshold = 0.45;

struct FramePitch {
  real f0 = 0;
  bool voiced = false;
};

FramePitch AnalyzePitchFrame(const std::vector<real> &x, int64_t center,
                             real energy_gate) {
  std::vector<real> frame(kPitchWindow);
  real energy = 0;
  for (int i = 0; i < kPitchWindow; i++) {
    const real v = SampleAt(x, center - kPitchWindow / 2 + i);
    frame[static_cast<size_t>(i)] = v;
    energy += v * v;
  }
  FramePitch out;
  const real rms = std::sqrt(energy / kPitchWindow);
  if (rms < energy_gate) return out;

  // FFT autocorrelation (1024 >= window + max lag), unbiased normalization.
  std::vector<std::complex<real>> buf(1024, {0, 0});
  for (int i = 0; i < kPitchWindow; i++) buf[static_cast<size_t>(i)] = frame[static_cast<size_t>(i)];
  Fft(&buf, false);
  for (auto &c : buf) c = std::complex<real>(std::norm(c), 0);
  Fft(&buf, true);
  std::vector<real> rho(kLagMax + 2, 0.0);
  const real r0 = buf[0].real() / kPitchWindow;
  if (r0 < 1e-12) return out;
  for (int k = 1; k <= kLagMax + 1; k++)
    rho[static_cast<size_t>(k)] =
        (buf[static_cast<size_t>(k)].real() / (kPitchWindow - k)) / r0;

  int best = 0;
  real best_val = -1;
  for (int k = kLagMin; k <= kLagMax; k++) {
    if (rho[static_cast<size_t>(k)] > best_val) {
      best_val = rho[static_cast<size_t>(k)];
      best = k;
    }
  }
  if (best_val < kVoicingThreshold) return out;
  // Octave-error guard: the smallest lag whose local peak is within 10% of
  // the global one wins (a true period's half-lag peak never qualifies).
  int pick = best;
  for (int k = kLagMin + 1; k < best; k++) {
    if (rho[static_cast<size_t>(k)] >= 0.9 * best_val &&
        rho[static_cast<size_t>(k)] >= rho[static_cast<size_t>(k - 1)] &&
        rho[static_cast<size_t>(k)] >= rho[static_cast<size_t>(k + 1)]) {
      pick = k;
      break;
    }
  }
  real lag = static_cast<real>(pick);
  if (pick > kLagMin && pick < kLagMax) {
    const real y0 = rho[static_cast<size_t>(pick - 1)];
    const real y1 = rho[static_cast<size_t>(pick)];
    const real y2 = rho[static_cast<size_t>(pick + 1)];
    const real denom = y0 - 2 * y1 + y2;
    if (std::fabs(denom) > 1e-12) {
      real delta = 0.5 * (y0 - y2) / denom;
      delta = std::max<real>(-0.5, std::min<real>(0.5, delta));
      lag += delta;
    }
  }
  out.f0 = std::max<real>(50.0, std::min<real>(500.0, kSampleRateHz / lag));
  out.voiced = true;
  return out;
}

}  // namespace

PitchTrack EstimateF0(const AudioClip &clip) {
  RASO_CHECK(static_cast<int>(clip.samples.size()) >= kWindowSamples,
             "clip too short");
  const int64_t T = NumFrames(clip.samples.size());
  real clip_energy = 0;
  for (real v : clip.samples) clip_energy += v * v;
  const real clip_rms = std::sqrt(clip_energy / static_cast<real>(clip.samples.size()));
  const real gate = std::max<real>(1e-5, 0.02 * clip_rms);

  PitchTrack track;
  track.f0_hz.assign(static_cast<size_t>(T), 0.0);
  track.voiced.assign(static_cast<size_t>(T), 0);
  for (int64_t t = 0; t < T; t++) {
    const FramePitch fp = AnalyzePitchFrame(clip.samples, t * kHopSamples, gate);
    track.f0_hz[static_cast<size_t>(t)] = fp.voiced ? fp.f0 : 0.0;
    track.voiced[static_cast<size_t>(t)] = fp.voiced ? 1 : 0;
  }
  // 5-frame median smoothing over voiced runs knocks out isolated octave slips.
  std::vector<real> smoothed = track.f0_hz;
  for (int64_t t = 0; t < T; t++) {
    if (!track.voiced[static_cast<size_t>(t)]) continue;
    std::vector<real> window;
    for (int64_t k = std::max<int64_t>(0, t - 2);
         k <= std::min<int64_t>(T - 1, t + 2); k++)
      if (track.voiced[static_cast<size_t>(k)])
        window.push_back(track.f0_hz[static_cast<size_t>(k)]);
    std::sort(window.begin(), window.end());
    smoothed[static_cast<size_t>(t)] = window[window.size() / 2];
  }
  track.f0_hz = std::move(smoothed);
  return track;
}

const std::vector<real> &HarmonicSourcePattern(real f0_hz) {
  RASO_CHECK(std::isfinite(f0_hz) && f0_hz > 0.0,
             "harmonic pattern needs a positive fundamental");
  static std::mutex mu;
  static std::map<int, std::vector<real>> cache;  // node-based: stable refs
  const int key = std::max(1, static_cast<int>(std::lround(f0_hz)));
  std::lock_guard<std::mutex> lock(mu);
  auto it = cache.find(key);
  if (it != cache.end()) return it->second;

  // A quarter second of steady tone leaves ~19 interior frames to median over.
  AudioClip tone;
  tone.samples.assign(4000, 0.0);
  const int n_harm = std::max(1, static_cast<int>(std::floor(7600.0 / key)));
  for (int k = 1; k <= n_harm; k++) {
    const real amp = 0.25 / k;
    const real w = 2.0 * kPi * k * key / kSampleRateHz;
    for (size_t i = 0; i < tone.samples.size(); i++)
      tone.samples[i] += amp * std::sin(w * static_cast<real>(i));
  }
  const MelSpectrogram mel = ComputeMel(tone);
  std::vector<real> pattern(static_cast<size_t>(mel.n_mels));
  for (int64_t b = 0; b < mel.n_mels; b++) {
    // Interior frames only; the centered edge frames are window-starved.
    std::vector<real> column;
    for (int64_t t = 3; t < mel.n_frames - 3; t++) column.push_back(mel.at(b, t));
    auto mid = column.begin() + static_cast<int64_t>(column.size() / 2);
    std::nth_element(column.begin(), mid, column.end());
    pattern[static_cast<size_t>(b)] = *mid;
  }
  return cache.emplace(key, std::move(pattern)).first->second;
}

// ---------------------------------------------------------------------------
// formants
// ---------------------------------------------------------------------------

namespace {

// Levinson-Durbin; returns prediction coefficients a[1..p] (A(z) = 1 + sum
// a_k z^-k) and the final prediction error.
bool LevinsonDurbin(const std::vector<real> &r, int p, std::vector<real> *a,
                    real *err) {
  a->assign(static_cast<size_t>(p + 1), 0.0);
  (*a)[0] = 1.0;
  real e = r[0];
  if (e <= 0) return false;
  for (int i = 1; i <= p; i++) {
    real acc = r[static_cast<size_t>(i)];
    for (int j = 1; j < i; j++) acc += (*a)[static_cast<size_t>(j)] * r[static_cast<size_t>(i - j)];
    const real k = -acc / e;
    std::vector<real> prev(a->begin(), a->begin() + i);
    for (int j = 1; j < i; j++)
      (*a)[static_cast<size_t>(j)] = prev[static_cast<size_t>(j)] + k * prev[static_cast<size_t>(i - j)];
    (*a)[static_cast<size_t>(i)] = k;
    e *= (1.0 - k * k);
    if (e <= 0) return false;
  }
  *err = e;
  return true;
}

// Roots of A(z) via the companion matrix of z^p + a1 z^{p-1} + ... + ap.
std::vector<std::complex<real>> PolyRoots(const std::vector<real> &a, int p) {
  Eigen::MatrixXd comp = Eigen::MatrixXd::Zero(p, p);
  for (int i = 0; i < p; i++) comp(0, i) = -a[static_cast<size_t>(i + 1)];
  for (int i = 1; i < p; i++) comp(i, i - 1) = 1.0;
  Eigen::EigenSolver<Eigen::MatrixXd> solver(comp, /*computeEigenvectors=*/false);
  std::vector<std::complex<real>> roots;
  roots.reserve(static_cast<size_t>(p));
  for (int i = 0; i < p; i++)
    roots.emplace_back(solver.eigenvalues()(i).real(), solver.eigenvalues()(i).imag());
  return roots;
}

constexpr real kFormantBandwidthMaxHz = 400.0;
constexpr real kFormantFloorHz = 90.0;
constexpr real kMinPredictionGain = 1.5;

}  // namespace

FormantTrack ExtractFormants(const AudioClip &clip, int lpc_order) {
  RASO_CHECK(lpc_order >= 8, "order too small for 3 formants");
  RASO_CHECK(static_cast<int>(clip.samples.size()) >= kWindowSamples,
             "clip too short");
  const int64_t T = NumFrames(clip.samples.size());
  real clip_energy = 0;
  for (real v : clip.samples) clip_energy += v * v;
  const real clip_rms = std::sqrt(clip_energy / static_cast<real>(clip.samples.size()));
  const real gate = std::max<real>(1e-5, 0.02 * clip_rms);

  std::vector<real> hamming(kWindowSamples);
  for (int i = 0; i < kWindowSamples; i++)
    hamming[static_cast<size_t>(i)] =
        0.54 - 0.46 * std::cos(2 * kPi * i / (kWindowSamples - 1));

  FormantTrack track;
  std::vector<real> frame(kWindowSamples);
  for (int64_t t = 0; t < T; t++) {
    const int64_t center = t * kHopSamples;
    real energy = 0;
    for (int i = 0; i < kWindowSamples; i++) {
      const real v = SampleAt(clip.samples, center - kWindowSamples / 2 + i);
      frame[static_cast<size_t>(i)] = v;
      energy += v * v;
    }
    if (std::sqrt(energy / kWindowSamples) < gate) continue;  // silence: skip

    for (int i = 0; i < kWindowSamples; i++) frame[static_cast<size_t>(i)] *= hamming[static_cast<size_t>(i)];
    std::vector<real> r(static_cast<size_t>(lpc_order + 1), 0.0);
    for (int k = 0; k <= lpc_order; k++) {
      real s = 0;
      for (int i = 0; i + k < kWindowSamples; i++)
        s += frame[static_cast<size_t>(i)] * frame[static_cast<size_t>(i + k)];
      r[static_cast<size_t>(k)] = s;
    }
    r[0] *= 1.0 + 1e-9;  // ridge against singular autocorrelation

    std::array<real, 3> formants{0, 0, 0};
    bool confident = false;
    std::vector<real> a;
    real err = 0;
    if (LevinsonDurbin(r, lpc_order, &a, &err) && err > 0) {
      const real prediction_gain = r[0] / err;
      std::vector<real> candidates;
      for (const auto &z : PolyRoots(a, lpc_order)) {
        const real mag = std::abs(z);
        if (mag >= 1.0 || mag < 1e-6 || z.imag() <= 0) continue;
        const real freq = std::atan2(z.imag(), z.real()) * kSampleRateHz / (2 * kPi);
        const real bw = -std::log(mag) * kSampleRateHz / kPi;
        if (freq > kFormantFloorHz && freq < kSampleRateHz / 2.0 - 100.0 &&
            bw < kFormantBandwidthMaxHz)
          candidates.push_back(freq);
      }
      std::sort(candidates.begin(), candidates.end());
      if (candidates.size() >= 3 && prediction_gain >= kMinPredictionGain) {
        formants = {candidates[0], candidates[1], candidates[2]};
        confident = true;
      }
    }
    track.formant_hz.push_back(formants);
    track.confident.push_back(confident ? 1 : 0);
  }
  return track;
}

FormantStats FormantStatistics(const std::vector<FormantTrack> &tracks) {
  FormantStats stats;
  int64_t n = 0;
  for (const auto &tr : tracks)
    for (size_t i = 0; i < tr.size(); i++)
      if (tr.confident[i]) {
        for (int k = 0; k < 3; k++) stats.mean[static_cast<size_t>(k)] += tr.formant_hz[i][static_cast<size_t>(k)];
        n++;
      }
  RASO_CHECK(n > 0, "no formant data");
  for (int k = 0; k < 3; k++) stats.mean[static_cast<size_t>(k)] /= static_cast<real>(n);
  for (const auto &tr : tracks)
    for (size_t i = 0; i < tr.size(); i++)
      if (tr.confident[i])
        for (int k = 0; k < 3; k++) {
          const real d = tr.formant_hz[i][static_cast<size_t>(k)] - stats.mean[static_cast<size_t>(k)];
          stats.stddev[static_cast<size_t>(k)] += d * d;
        }
  for (int k = 0; k < 3; k++)
    stats.stddev[static_cast<size_t>(k)] = std::sqrt(stats.stddev[static_cast<size_t>(k)] / static_cast<real>(n));
  return stats;
}

// ---------------------------------------------------------------------------
// synthetic corpus
// ---------------------------------------------------------------------------

namespace {

struct Vowel {
  const char *token;
  std::array<real, 3> formants;  // male reference F1..F3
};

const std::array<Vowel, 5> kVowels = {{{"a", {730, 1090, 2440}},
                                       {"e", {530, 1840, 2480}},
                                       {"i", {390, 1990, 2550}},
                                       {"o", {570, 840, 2410}},
                                       {"u", {440, 1020, 2240}}}};

// |H(e^{jw})| of the cascade of three two-pole resonators.
real ResonatorEnvelope(const std::array<real, 3> &formants,
                       const std::array<real, 3> &bandwidths, real freq_hz) {
  real mag = 1.0;
  for (int k = 0; k < 3; k++) {
    const real r = std::exp(-kPi * bandwidths[static_cast<size_t>(k)] / kSampleRateHz);
    const real theta = 2 * kPi * formants[static_cast<size_t>(k)] / kSampleRateHz;
    const real w = 2 * kPi * freq_hz / kSampleRateHz;
    // 1 / |(1 - p e^{-jw})(1 - p* e^{-jw})| with p = r e^{j theta}
    const std::complex<real> ejw(std::cos(-w), std::sin(-w));
    const std::complex<real> p(r * std::cos(theta), r * std::sin(theta));
    const std::complex<real> d = (std::complex<real>(1, 0) - p * ejw) *
                                 (std::complex<real>(1, 0) - std::conj(p) * ejw);
    mag /= std::max<real>(std::abs(d), 1e-9);
  }
  return mag;
}

}  // namespace

const std::vector<std::string> &VowelInventory() {
  static const std::vector<std::string> inv = [] {
    std::vector<std::string> v;
    for (const auto &vw : kVowels) v.emplace_back(vw.token);
    return v;
  }();
  return inv;
}

std::array<real, 3> VowelFormants(const std::string &token) {
  for (const auto &vw : kVowels)
    if (token == vw.token) return vw.formants;
  throw Error("unknown vowel token: " + token);
}

std::vector<SynthClip> SynthCorpus(const SynthCorpusConfig &cfg) {
  RASO_CHECK(cfg.n_clips > 0 && cfg.n_clips % 2 == 0, "n_clips must be even");
  RASO_CHECK(cfg.class_f0_mean_hz[0] > 0 && cfg.class_f0_mean_hz[1] > 0,
             "class F0 means must be positive");
  RASO_CHECK(cfg.clip_seconds >= 0.3, "clips must be at least 0.3 s");

  constexpr int kSegments = 3;
  constexpr real kGapSeconds = 0.03;
  constexpr real kFadeSeconds = 0.01;
  const std::array<real, 3> bandwidths = {80.0, 90.0, 120.0};

  Rng rng(cfg.seed);
  std::vector<SynthClip> corpus;
  corpus.reserve(static_cast<size_t>(cfg.n_clips));

  const int64_t n_total = static_cast<int64_t>(cfg.clip_seconds * kSampleRateHz);
  const int64_t n_gap = static_cast<int64_t>(kGapSeconds * kSampleRateHz);
  const int64_t n_seg = (n_total - (kSegments - 1) * n_gap) / kSegments;
  RASO_CHECK(n_seg > 4 * static_cast<int64_t>(kFadeSeconds * kSampleRateHz),
             "clip too short for the segment layout");

  for (int idx = 0; idx < cfg.n_clips; idx++) {
    const int sex = idx % 2;
    SynthClip item;
    item.sex = sex;
    item.clip.samples.assign(static_cast<size_t>(n_total), 0.0);

    real f0_base = GaussianReal(rng, cfg.class_f0_mean_hz[static_cast<size_t>(sex)],
                                cfg.class_f0_std_hz[static_cast<size_t>(sex)]);
    f0_base = std::max<real>(70.0, std::min<real>(400.0, f0_base));

    int64_t cursor = 0;
    for (int seg = 0; seg < kSegments; seg++) {
      const int vowel_idx =
          static_cast<int>(UniformReal(rng, 0.0, 1.0) * kVowels.size()) % 5;
      const Vowel &vw = kVowels[static_cast<size_t>(vowel_idx)];
      if (seg > 0) item.transcript += " ";
      item.transcript += vw.token;

      std::array<real, 3> formants = vw.formants;
      for (int k = 0; k < 3; k++)
        formants[static_cast<size_t>(k)] +=
            cfg.class_formant_offsets_hz[static_cast<size_t>(sex)][static_cast<size_t>(k)];

      // Harmonic amplitudes from the resonator envelope with 1/k tilt.
      const int n_harm =
          std::max(1, static_cast<int>(std::floor(7600.0 / f0_base)));
      std::vector<real> amp(static_cast<size_t>(n_harm + 1), 0.0);
      for (int k = 1; k <= n_harm; k++)
        amp[static_cast<size_t>(k)] =
            ResonatorEnvelope(formants, bandwidths, k * f0_base) / k;

      real phase = UniformReal(rng, 0.0, 2 * kPi);
      const int64_t n_fade = static_cast<int64_t>(kFadeSeconds * kSampleRateHz);
      for (int64_t i = 0; i < n_seg; i++) {
        const real tsec = static_cast<real>(i) / kSampleRateHz;
        const real f0 = f0_base * (1.0 + 0.015 * std::sin(2 * kPi * 5.0 * tsec));
        phase += 2 * kPi * f0 / kSampleRateHz;
        // sum_k amp_k sin(k*phase) via complex rotation, one sincos per sample
        const std::complex<real> z(std::cos(phase), std::sin(phase));
        std::complex<real> w = z;
        real s = 0;
        for (int k = 1; k <= n_harm; k++) {
          s += amp[static_cast<size_t>(k)] * w.imag();
          w *= z;
        }
        real fade = 1.0;
        if (i < n_fade) fade = 0.5 - 0.5 * std::cos(kPi * i / n_fade);
        else if (i >= n_seg - n_fade)
          fade = 0.5 - 0.5 * std::cos(kPi * (n_seg - 1 - i) / n_fade);
        item.clip.samples[static_cast<size_t>(cursor + i)] = s * fade;
      }
      cursor += n_seg + n_gap;
    }

    real peak = 0;
    for (real v : item.clip.samples) peak = std::max(peak, std::fabs(v));
    const real scale = peak > 1e-12 ? 0.3 / peak : 1.0;
    for (auto &v : item.clip.samples) {
      v = v * scale + GaussianReal(rng, 0.0, 5e-5);
      v = std::max<real>(-1.0, std::min<real>(1.0, v));
    }
    corpus.push_back(std::move(item));
  }
  return corpus;
}

}  // namespace raso
