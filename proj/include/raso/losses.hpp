// raso/losses.hpp

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

#ifndef RASO_LOSSES_HPP_
#define RASO_LOSSES_HPP_

#include <string>
#include <vector>

#include "raso/signal.hpp"
#include "raso/tensor.hpp"

namespace raso {

// Every objective exists in two forms: a plain scalar function with the
// documented arithmetic (used by evaluation, logging and as the oracle in
// tests) and a graph form used inside training steps.  The two must agree to
// rounding error on any input.

struct LossWeights {
  real alpha1 = 1.0;   // adversarial
  real alpha2 = 5.0;   // sex ambiguity
  real alpha3 = 10.0;  // content preservation
  real alpha4 = 2.0;   // F0 alignment
  real alpha5 = 1.0;   // formant moment alignment
  real alpha6 = 10.0;  // cycle reconstruction
  real lambda_rel = 0.8;
  real beta = 0.3;
  real soft_real = 0.95;
  real soft_fake = 0.05;

  void Validate() const;
};

struct LossReport {
  real adv = 0.0;
  real sex = 0.0;
  real content = 0.0;
  real f0 = 0.0;
  real formant = 0.0;
  real cycle = 0.0;
  real total = 0.0;

  bool all_finite() const;
};

// One labeled record per optimization step, parseable back for reporting.
std::string LossLogLine(int64_t step, const LossReport &report);
bool ParseLossLogLine(const std::string &line, int64_t *step,
                      LossReport *report);

// ---------------------------------------------------------------------------
// plain forms
// ---------------------------------------------------------------------------

// Least-squares critic objective with soft labels:
// 1/2 mean((s_real - 0.95)^2) + 1/2 mean((s_fake - 0.05)^2).
real AdvLossD(const std::vector<real> &scores_real,
              const std::vector<real> &scores_fake,
              const LossWeights &w = LossWeights());

// Generator side regresses fake scores onto the real target:
// 1/2 mean((s_fake - 0.95)^2).
real AdvLossG(const std::vector<real> &scores_fake,
              const LossWeights &w = LossWeights());

// mean(p log p + (1 - p) log(1 - p)), probabilities clamped to
// [1e-6, 1 - 1e-6].  Minimized (= -ln 2) exactly at p = 0.5, so driving it
// down pushes the classifier toward chance.
real SexAmbiguityLoss(const std::vector<real> &p_male);

// Mean absolute difference between two feature maps of identical shape.
real ContentLoss(const Tensor &feat_orig, const Tensor &feat_gen);

// Mean absolute difference between a spectrogram and its two-pass
// reconstruction.
real CycleLoss(const MelSpectrogram &x, const MelSpectrogram &x_cycled);

// |mean(f0_gen) - mu_neu| + lambda_rel * mean|dlog f0_gen - dlog f0_org|,
// where dlog f0 = log f0 - log mean(f0); means and the contour comparison
// run over frames voiced in both tracks.  Errors when no frame is voiced in
// both.
real F0Loss(const PitchTrack &f0_gen, const PitchTrack &f0_org, real mu_neu,
            real lambda_rel = 0.8);

// Sum over the three formants of |mu_gen - mu_neutral| plus beta times the
// same for standard deviations.  A zero or non-finite mean marks a formant
// as missing and is an error.
real FormantLoss(const FormantStats &gen_stats,
                 const FormantStats &neutral_stats, real beta = 0.3);

// alpha-weighted sum of the six terms; errors name any non-finite term.
// Does not read report.total.
real TotalGeneratorLoss(const LossReport &terms, const LossWeights &weights);

// ---------------------------------------------------------------------------
// graph forms
// ---------------------------------------------------------------------------

Var BuildAdvLossD(Graph &g, Var scores_real, Var scores_fake,
                  const LossWeights &w);
Var BuildAdvLossG(Graph &g, Var scores_fake, const LossWeights &w);
Var BuildSexAmbiguityLoss(Graph &g, Var p_male);
// Shared by the content and cycle terms.
Var BuildL1Loss(Graph &g, Var a, Var b);

// Differentiable per-frame F0 surrogate in Hz for a [B, 1, 80, T] log-mel:
// a sharpened spectral centroid of the excitation (input minus its band-axis
// smoothing) over the low bands, mapped back to Hz through the mel grid.
// Exact pitch extraction is not differentiable, so training aligns this
// statistic instead; evaluation always uses the true estimator.
Var BuildF0Surrogate(Graph &g, Var x);

// F0 alignment on surrogate statistics: |mean surrogate of `gen` minus mean
// surrogate of `anchor`| plus lambda_rel times the masked mean absolute
// difference of their mean-relative log contours.  `anchor` is the
// structurally pitch-retargeted spectrogram (detached by the caller), whose
// surrogate reading stands in for mu_neutral; comparing two readings of the
// same statistic cancels the surrogate's band-quantization bias.  `voicing`
// supplies the frames that count, normalized per utterance then averaged
// over the batch.
Var BuildF0SurrogateLoss(Graph &g, Var gen, Var anchor,
                         const std::vector<PitchTrack> &voicing,
                         real lambda_rel);

// mu_gen and sigma_gen are length-3 vars; the neutral side is constant.
Var BuildFormantLoss(Graph &g, Var mu_gen, Var sigma_gen,
                     const FormantStats &neutral_stats, real beta);

Var BuildWeightedTotal(Graph &g, Var adv, Var sex, Var content, Var f0,
                       Var formant, Var cycle, const LossWeights &w);

}  // namespace raso

#endif  // RASO_LOSSES_HPP_
