// raso/generator.hpp

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

#ifndef RASO_GENERATOR_HPP_
#define RASO_GENERATOR_HPP_

#include <vector>

#include "raso/nn.hpp"
#include "raso/signal.hpp"
#include "raso/tensor.hpp"

namespace raso {

// Dual-branch sex-feature-suppression network operating on log-mel
// spectrograms.  One branch encodes linguistic content into a latent grid;
// the other edits sex-typical structure explicitly: per-band formant gains
// derived from a learned sex embedding, and a rebuild of the fundamental's
// low-band lump from the measured pattern of a harmonic source at the
// retargeted f0 (the formant region above is left alone).  A decoder
// conditioned on a target style (a sex embedding or the learned neutral
// vector) adds a residual correction on top of the structural edit, so an
// untrained network already performs a clean pitch-retargeted copy.
constexpr int kSexEmbeddingDim = 64;
constexpr int kContentChannels = 256;
constexpr int kContentHeight = 10;
constexpr int kModulatedBands = 40;  // rows [0, 40) carry the formant edit

// Which style vector conditions the decoder (AdaIN + attention).
enum class StyleChoice {
  kNeutral,  // learned sex-neutral vector; the forward obfuscation pass
  kSource,   // the input label's own embedding; the cycle reconstruction pass
};

struct GeneratorNet {
  nn::ParamSet params;

  // sex descriptor: the table rows are the two sex embeddings; s_neutral
  // starts at their mean and is trained; mod_w starts at zero so modulation
  // is the identity until trained.
  nn::Param *embed_table = nullptr;  // [2, 64]
  nn::Param *s_neutral = nullptr;    // [1, 64]
  nn::Param *mod_w = nullptr;        // [40, 64]

  // content encoder: stem + three downsampling residual blocks + latent head
  nn::Conv2d enc_c0;
  nn::Conv2d enc_d1_main, enc_d1_skip;
  nn::Conv2d enc_d2_main, enc_d2_skip;
  nn::Conv2d enc_d3_main, enc_d3_skip;
  nn::Conv2d enc_lat;

  // shifted-F0 conditioning channel (per latent frame)
  nn::Conv2d f0_proj;

  // formant-guided attention over the fused latent
  nn::Conv2d att_c0;
  nn::Linear att_style;
  nn::Conv2d att_c1;

  // decoder: fusion head + three upsampling residual blocks with AdaIN +
  // zero-initialized residual output head
  nn::Conv2d dec_in;
  nn::AdaIN dec_in_ada;
  nn::Conv2d dec_u1_main, dec_u1_skip;
  nn::AdaIN dec_u1_ada;
  nn::Conv2d dec_u2_main, dec_u2_skip;
  nn::AdaIN dec_u2_ada;
  nn::Conv2d dec_u3_main, dec_u3_skip;
  nn::AdaIN dec_u3_ada;
  nn::Conv2d dec_out;

  static GeneratorNet Make(uint64_t seed);
};

// Row `label` of the embedding table.  Errors on labels outside {0, 1}.
std::vector<real> SexEmbeddingOf(const GeneratorNet &net, int label);

// X_mod = X elementwise-scaled per band by (1 + W * emb) on rows [0, 40),
// with the gain clamped to [0.1, 4.0]; rows [40, 80) are copied untouched.
// Pure arithmetic on a [40 x 64] projection; no network state involved.
MelSpectrogram ModulateFormants(const MelSpectrogram &mel,
                                const std::vector<real> &emb, const Tensor &w);

// Log-domain shift moving the voiced mean onto mu_neutral:
// f0' = f0 * mu_neutral / mean(voiced f0).  Unvoiced frames stay unvoiced;
// a track with no voiced frames is returned unchanged.  mu_neutral must be
// positive.
PitchTrack NeutralizeF0(const PitchTrack &pitch, real mu_neutral);

// Content branch alone: [256 x 10 x ceil(T/8)] latent for a T-frame mel.
// Deterministic given params; errors on an empty spectrogram.
Tensor EncodeContent(const GeneratorNet &net, const MelSpectrogram &mel);

// Full forward pass for one clip; preserves the [80 x T] shape.  `pitch`
// must be frame-aligned with `mel`.
MelSpectrogram Generate(const GeneratorNet &net, const MelSpectrogram &mel,
                        int label, const PitchTrack &pitch, real mu_neutral,
                        StyleChoice style);

// ---------------------------------------------------------------------------
// graph-building interface used by the training loop
// ---------------------------------------------------------------------------

struct GeneratorBuild {
  Var out = -1;     // [B, 1, 80, T]
  // Pitch-retargeted spectrogram before the learned residual, cropped like
  // `out`.  Its low bands already carry the target fundamental's pattern,
  // which makes a detached copy the natural anchor for the F0 alignment term.
  Var base = -1;
  Var gains = -1;   // [B, 80] modulation gains (rows >= 40 are exactly 1)
  std::vector<PitchTrack> shifted;  // neutralized pitch per sample
};

// Assembles the full generator forward pass on an existing graph so that the
// output stays differentiable (the cycle pass feeds one build's output into
// another).  `x` is [B, 1, 80, T]; `mu_target` holds one target mean per
// sample: the EMA neutral mean on the obfuscation pass, the clip's own
// source mean on the reconstruction pass.
GeneratorBuild BuildGenerate(Graph &g, const GeneratorNet &net, Var x,
                             const std::vector<int> &labels,
                             const std::vector<PitchTrack> &pitches,
                             const std::vector<real> &mu_target,
                             StyleChoice style);

// Batch packing helpers; every clip must share the same frame count.
Tensor MelBatchTensor(const std::vector<const MelSpectrogram *> &mels);
MelSpectrogram TensorToMel(const Tensor &t, int64_t b);

}  // namespace raso

#endif  // RASO_GENERATOR_HPP_
