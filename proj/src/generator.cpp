// src/generator.cpp

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

#include "raso/generator.hpp"

#include <cmath>
#include <cstdint>
#include <vector>

namespace raso {

namespace {

int64_t PaddedFrames(int64_t t) { return 8 * ((t + 7) / 8); }

// The fundamental's spectral lump lives in the bottom mel bands: both sexes'
// fundamentals land under band 8 (centered near 226 Hz), and the rebuild
// weight fades to zero by band 11 (~317 Hz), well below the first formant.
// The rebuilt lump sits half a log unit under the column's own low-band
// peak: plainly visible to spectrogram classifiers, but quiet enough that
// the reconstructed waveform keeps the clip's natural periodicity evidence,
// so corpus pitch statistics stay where the neutral-mean tracker expects.
constexpr int kLumpTopBand = 8;
constexpr int kLumpFadeBand = 11;
constexpr real kLumpLevel = -0.5;

// Maps [B, 40] modulation gains onto [B, 80] band gains: the first 40 bands
// take the learned gain, the rest stay at exactly 1.  Realized as an affine
// trick (g80 = (g40 - 1) * P + 1 with P the 40x80 left-identity) so the
// upper-band rows are bit-exact ones rather than accumulated sums.
Var SpreadGains(Graph &g, Var g40) {
  Tensor proj({kModulatedBands, kNumMelBands});
  for (int64_t i = 0; i < kModulatedBands; i++) proj.at2(i, i) = 1.0;
  Var p = g.Leaf(std::move(proj));
  return g.AddScalar(g.MatMul(g.AddScalar(g40, -1.0), p), 1.0);
}

Var DownBlock(Graph &g, const nn::Conv2d &main, const nn::Conv2d &skip, Var x) {
  Var h = g.LeakyRelu(g.InstanceNorm(main.Forward(g, x)), 0.1);
  return g.Add(h, skip.Forward(g, x));
}

Var UpBlock(Graph &g, const nn::Conv2d &main, const nn::Conv2d &skip,
            const nn::AdaIN &ada, Var x, Var style) {
  Var u = g.Upsample2(x);
  Var h = g.LeakyRelu(ada.Forward(g, main.Forward(g, u), style), 0.1);
  return g.Add(h, skip.Forward(g, u));
}

// Content branch on a padded [B, 1, 80, 8k] input -> [B, 256, 10, k].
Var BuildEncoder(Graph &g, const GeneratorNet &net, Var xp) {
  Var h = g.LeakyRelu(net.enc_c0.Forward(g, xp), 0.1);
  h = DownBlock(g, net.enc_d1_main, net.enc_d1_skip, h);
  h = DownBlock(g, net.enc_d2_main, net.enc_d2_skip, h);
  h = DownBlock(g, net.enc_d3_main, net.enc_d3_skip, h);
  return net.enc_lat.Forward(g, h);
}

// Average shifted log-F0 over each group of 8 frames (edge-replicated to the
// padded length), one value per latent frame.  Unvoiced frames contribute 0.
Tensor PooledLogF0(const std::vector<PitchTrack> &tracks, int64_t t,
                   int64_t wc) {
  const int64_t b = static_cast<int64_t>(tracks.size());
  Tensor out({b, 1, 1, wc});
  for (int64_t i = 0; i < b; i++) {
    for (int64_t lw = 0; lw < wc; lw++) {
      real acc = 0.0;
      for (int64_t k = 0; k < 8; k++) {
        const int64_t frame = std::min<int64_t>(8 * lw + k, t - 1);
        const size_t f = static_cast<size_t>(frame);
        if (tracks[i].voiced[f]) acc += std::log(tracks[i].f0_hz[f]);
      }
      out.at4(i, 0, 0, lw) = acc / 8.0;
    }
  }
  return out;
}

}  // namespace

GeneratorNet GeneratorNet::Make(uint64_t seed) {
  GeneratorNet net;
  nn::ParamSet &ps = net.params;
  Rng rng(seed);

  // Sex descriptor.  The neutral style starts at the mean of the two
  // embeddings; the formant projection starts at zero so modulation is the
  // identity until trained.
  Tensor table = Tensor::Randn({2, kSexEmbeddingDim}, rng, 0.5);
  Tensor neutral({1, kSexEmbeddingDim});
  for (int64_t j = 0; j < kSexEmbeddingDim; j++)
    neutral.at2(0, j) = 0.5 * (table.at2(0, j) + table.at2(1, j));
  net.embed_table = &ps.Add("embed.table", std::move(table));
  net.s_neutral = &ps.Add("s.neutral", std::move(neutral));
  net.mod_w = &ps.Add("mod.w", Tensor({kModulatedBands, kSexEmbeddingDim}));

  net.enc_c0 = nn::Conv2d::Make(ps, "enc.c0", 1, 8, 3, 3, 1, 1, rng);
  net.enc_d1_main = nn::Conv2d::Make(ps, "enc.d1.main", 8, 12, 4, 4, 2, 1, rng);
  net.enc_d1_skip = nn::Conv2d::Make(ps, "enc.d1.skip", 8, 12, 1, 1, 2, 0, rng);
  net.enc_d2_main = nn::Conv2d::Make(ps, "enc.d2.main", 12, 16, 4, 4, 2, 1, rng);
  net.enc_d2_skip = nn::Conv2d::Make(ps, "enc.d2.skip", 12, 16, 1, 1, 2, 0, rng);
  net.enc_d3_main = nn::Conv2d::Make(ps, "enc.d3.main", 16, 24, 4, 4, 2, 1, rng);
  net.enc_d3_skip = nn::Conv2d::Make(ps, "enc.d3.skip", 16, 24, 1, 1, 2, 0, rng);
  net.enc_lat =
      nn::Conv2d::Make(ps, "enc.lat", 24, kContentChannels, 1, 1, 1, 0, rng);

  net.f0_proj = nn::Conv2d::Make(ps, "f0.proj", 1, 8, 1, 1, 1, 0, rng);

  net.att_c0 = nn::Conv2d::Make(ps, "att.c0", 1, 4, 4, 4, 4, 0, rng);
  net.att_style = nn::Linear::Make(ps, "att.style", kSexEmbeddingDim, 4, rng);
  net.att_c1 = nn::Conv2d::Make(ps, "att.c1", 4, 32, 1, 1, 1, 0, rng);

  net.dec_in =
      nn::Conv2d::Make(ps, "dec.in", kContentChannels + 8, 32, 1, 1, 1, 0, rng);
  net.dec_in_ada = nn::AdaIN::Make(ps, "dec.in.ada", kSexEmbeddingDim, 32);
  net.dec_u1_main = nn::Conv2d::Make(ps, "dec.u1.main", 32, 24, 3, 3, 1, 1, rng);
  net.dec_u1_skip = nn::Conv2d::Make(ps, "dec.u1.skip", 32, 24, 1, 1, 1, 0, rng);
  net.dec_u1_ada = nn::AdaIN::Make(ps, "dec.u1.ada", kSexEmbeddingDim, 24);
  net.dec_u2_main = nn::Conv2d::Make(ps, "dec.u2.main", 24, 16, 3, 3, 1, 1, rng);
  net.dec_u2_skip = nn::Conv2d::Make(ps, "dec.u2.skip", 24, 16, 1, 1, 1, 0, rng);
  net.dec_u2_ada = nn::AdaIN::Make(ps, "dec.u2.ada", kSexEmbeddingDim, 16);
  net.dec_u3_main = nn::Conv2d::Make(ps, "dec.u3.main", 16, 8, 3, 3, 1, 1, rng);
  net.dec_u3_skip = nn::Conv2d::Make(ps, "dec.u3.skip", 16, 8, 1, 1, 1, 0, rng);
  net.dec_u3_ada = nn::AdaIN::Make(ps, "dec.u3.ada", kSexEmbeddingDim, 8);
  net.dec_out = nn::Conv2d::Make(ps, "dec.out", 8, 1, 3, 3, 1, 1, rng);

  // Zero the residual head: a fresh network reproduces its structural edit
  // (lump rebuild + gains) exactly, which keeps early training stable.
  std::fill(net.dec_out.w->value.data.begin(), net.dec_out.w->value.data.end(),
            0.0);
  return net;
}

std::vector<real> SexEmbeddingOf(const GeneratorNet &net, int label) {
  RASO_CHECK(label == 0 || label == 1, "sex label must be 0 or 1");
  const Tensor &table = net.embed_table->value;
  std::vector<real> emb(kSexEmbeddingDim);
  for (int64_t j = 0; j < kSexEmbeddingDim; j++)
    emb[static_cast<size_t>(j)] = table.at2(label, j);
  return emb;
}

MelSpectrogram ModulateFormants(const MelSpectrogram &mel,
                                const std::vector<real> &emb,
                                const Tensor &w) {
  RASO_CHECK(mel.n_mels == kNumMelBands, "modulation expects an 80-band mel");
  RASO_CHECK(static_cast<int>(emb.size()) == kSexEmbeddingDim,
             "embedding must have 64 dimensions");
  for (real v : emb)
    RASO_CHECK(std::isfinite(v), "embedding must be finite");
  RASO_CHECK(w.rank() == 2 && w.dim(0) == kModulatedBands &&
                 w.dim(1) == kSexEmbeddingDim,
             "projection matrix must be 40 x 64");

  MelSpectrogram out = mel;
  for (int64_t b = 0; b < kModulatedBands; b++) {
    real dot = 0.0;
    for (int64_t j = 0; j < kSexEmbeddingDim; j++)
      dot += w.at2(b, j) * emb[static_cast<size_t>(j)];
    const real gain = std::clamp(1.0 + dot, 0.1, 4.0);
    for (int64_t t = 0; t < mel.n_frames; t++) out.at(b, t) = mel.at(b, t) * gain;
  }
  return out;
}

PitchTrack NeutralizeF0(const PitchTrack &pitch, real mu_neutral) {
  RASO_CHECK(mu_neutral > 0.0, "neutral F0 target must be positive");
  PitchTrack out = pitch;
  if (pitch.num_voiced() == 0) return out;
  const real ratio = mu_neutral / pitch.MeanVoicedF0();
  for (size_t i = 0; i < out.size(); i++)
    if (out.voiced[i]) out.f0_hz[i] *= ratio;
  return out;
}

Tensor EncodeContent(const GeneratorNet &net, const MelSpectrogram &mel) {
  RASO_CHECK(mel.n_frames > 0, "cannot encode an empty spectrogram");
  RASO_CHECK(mel.n_mels == kNumMelBands, "encoder expects an 80-band mel");
  const MelSpectrogram *one = &mel;
  Graph g;
  Var x = g.Leaf(MelBatchTensor({one}));
  Var lat = BuildEncoder(g, net, g.PadWEdge(x, PaddedFrames(mel.n_frames)));
  Tensor out = g.val(lat);
  out.shape = {kContentChannels, kContentHeight, out.dim(3)};
  return out;
}

GeneratorBuild BuildGenerate(Graph &g, const GeneratorNet &net, Var x,
                             const std::vector<int> &labels,
                             const std::vector<PitchTrack> &pitches,
                             const std::vector<real> &mu_target,
                             StyleChoice style) {
  const Tensor &xv = g.val(x);
  RASO_CHECK(xv.rank() == 4 && xv.dim(1) == 1 && xv.dim(2) == kNumMelBands,
             "generator input must be [B, 1, 80, T]");
  const int64_t batch = xv.dim(0);
  const int64_t t = xv.dim(3);
  RASO_CHECK(t > 0, "generator input has no frames");
  RASO_CHECK(static_cast<int64_t>(labels.size()) == batch &&
                 static_cast<int64_t>(pitches.size()) == batch &&
                 static_cast<int64_t>(mu_target.size()) == batch,
             "labels, pitches and targets must match the batch size");
  for (int label : labels)
    RASO_CHECK(label == 0 || label == 1, "sex label must be 0 or 1");
  for (const PitchTrack &p : pitches)
    RASO_CHECK(static_cast<int64_t>(p.size()) == t,
               "pitch track must be frame-aligned with the spectrogram");

  const int64_t t8 = PaddedFrames(t);
  const int64_t wc = t8 / 8;
  Var xp = g.PadWEdge(x, t8);

  // Sex-conditioned formant modulation on the lower bands.
  Var table = g.ParamLeaf(*net.embed_table);
  Var emb = g.GatherRows(table, labels);
  Var modw = g.ParamLeaf(*net.mod_w);
  Var g40 = g.Clamp(g.AddScalar(g.MatMul(emb, g.Transpose2d(modw)), 1.0), 0.1,
                    4.0);
  Var gains = SpreadGains(g, g40);
  Var xmod = g.MulBands(xp, gains);

  // F0 retargeting: shift each track's voiced mean onto its target, then
  // rebuild the fundamental's low-band lump as the measured pattern of a
  // harmonic source at the shifted per-frame f0.  PeakBlend level-matches
  // each replacement to the column's own low-band peak and cross-fades it
  // back into the modulated input by band kLumpFadeBand; unvoiced columns
  // and all higher bands (the formant region) pass through untouched.
  GeneratorBuild made;
  made.shifted.reserve(static_cast<size_t>(batch));
  Tensor blendw({batch, 1, kNumMelBands, t8});
  Tensor blendp({batch, 1, kNumMelBands, t8});
  for (int64_t i = 0; i < batch; i++) {
    const size_t s = static_cast<size_t>(i);
    made.shifted.push_back(NeutralizeF0(pitches[s], mu_target[s]));
    const PitchTrack &sp = made.shifted.back();
    for (int64_t j = 0; j < t8; j++) {
      const size_t f = static_cast<size_t>(std::min(j, t - 1));
      if (!sp.voiced[f]) continue;
      const std::vector<real> &pat = HarmonicSourcePattern(sp.f0_hz[f]);
      real peak = pat[0];
      for (int b = 1; b <= kLumpTopBand; b++)
        peak = std::max(peak, pat[static_cast<size_t>(b)]);
      for (int b = 0; b < kLumpFadeBand; b++) {
        const real w = b <= kLumpTopBand
                           ? 1.0
                           : static_cast<real>(kLumpFadeBand - b) /
                                 static_cast<real>(kLumpFadeBand - kLumpTopBand);
        blendw.at4(i, 0, b, j) = w;
        blendp.at4(i, 0, b, j) = pat[static_cast<size_t>(b)] - peak + kLumpLevel;
      }
    }
  }
  Var base = g.PeakBlend(xmod, blendw, blendp, kLumpTopBand + 1);

  // Content branch reads the unmodulated input.
  Var lat = BuildEncoder(g, net, xp);

  // Shifted-F0 conditioning channel, tiled across the latent height.
  Var f0t = g.Leaf(PooledLogF0(made.shifted, t, wc));
  Var f0f = g.TileH(net.f0_proj.Forward(g, f0t), kContentHeight);
  Var z = g.ConcatCh(lat, f0f);

  // Decoder style: the learned neutral vector or the source embedding.
  Var sty;
  if (style == StyleChoice::kNeutral) {
    Var neutral = g.ParamLeaf(*net.s_neutral);
    sty = g.GatherRows(neutral, std::vector<int>(static_cast<size_t>(batch), 0));
  } else {
    sty = g.GatherRows(table, labels);
  }

  // Fusion head with formant-guided attention: a sigmoid map computed from
  // the modulated lower bands and the style gates the fused latent.
  Var h = g.LeakyRelu(net.dec_in_ada.Forward(g, net.dec_in.Forward(g, z), sty),
                      0.1);
  Var a = g.AvgPoolW(net.att_c0.Forward(g, g.SliceH(xmod, 0, kModulatedBands)),
                     2);
  a = g.LeakyRelu(g.AddCh(a, net.att_style.Forward(g, sty)), 0.1);
  Var m = g.Sigmoid(net.att_c1.Forward(g, a));
  h = g.Mul(h, m);

  h = UpBlock(g, net.dec_u1_main, net.dec_u1_skip, net.dec_u1_ada, h, sty);
  h = UpBlock(g, net.dec_u2_main, net.dec_u2_skip, net.dec_u2_ada, h, sty);
  h = UpBlock(g, net.dec_u3_main, net.dec_u3_skip, net.dec_u3_ada, h, sty);
  Var res = net.dec_out.Forward(g, h);

  made.out = g.CropW(g.Add(base, res), t);
  made.base = g.CropW(base, t);
  made.gains = gains;
  return made;
}

MelSpectrogram Generate(const GeneratorNet &net, const MelSpectrogram &mel,
                        int label, const PitchTrack &pitch, real mu_neutral,
                        StyleChoice style) {
  RASO_CHECK(static_cast<int64_t>(pitch.size()) == mel.n_frames,
             "pitch track must be frame-aligned with the spectrogram");
  const MelSpectrogram *one = &mel;
  Graph g;
  Var x = g.Leaf(MelBatchTensor({one}));
  GeneratorBuild made =
      BuildGenerate(g, net, x, {label}, {pitch}, {mu_neutral}, style);
  return TensorToMel(g.val(made.out), 0);
}

Tensor MelBatchTensor(const std::vector<const MelSpectrogram *> &mels) {
  RASO_CHECK(!mels.empty(), "cannot batch zero spectrograms");
  const int64_t bands = mels[0]->n_mels;
  const int64_t frames = mels[0]->n_frames;
  Tensor out({static_cast<int64_t>(mels.size()), 1, bands, frames});
  for (size_t i = 0; i < mels.size(); i++) {
    RASO_CHECK(mels[i]->n_mels == bands && mels[i]->n_frames == frames,
               "all spectrograms in a batch must share one shape");
    for (int64_t b = 0; b < bands; b++)
      for (int64_t t = 0; t < frames; t++)
        out.at4(static_cast<int64_t>(i), 0, b, t) = mels[i]->at(b, t);
  }
  return out;
}

MelSpectrogram TensorToMel(const Tensor &t, int64_t b) {
  RASO_CHECK(t.rank() == 4 && t.dim(1) == 1, "expected a [B, 1, bands, T] tensor");
  RASO_CHECK(b >= 0 && b < t.dim(0), "batch index out of range");
  MelSpectrogram mel(t.dim(2), t.dim(3));
  for (int64_t band = 0; band < mel.n_mels; band++)
    for (int64_t frame = 0; frame < mel.n_frames; frame++)
      mel.at(band, frame) = t.at4(b, 0, band, frame);
  return mel;
}

}  // namespace raso
