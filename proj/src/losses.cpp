// src/losses.cpp

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

#include "raso/losses.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>
#include <vector>

namespace raso {

namespace {

constexpr real kProbFloor = 1e-6;
// Surrogate band window [kF0BandLo, kF0BandHi) spans roughly 40-480 Hz on
// the 80-band grid, covering the admissible pitch range.
constexpr int kF0BandLo = 1;
constexpr int kF0BandHi = 16;
constexpr real kF0Sharpen = 2.0;     // peakiness of the centroid weights
constexpr int kF0SmoothRadius = 4;   // same envelope radius as the generator
constexpr real kLn10 = 2.302585092994046;

real MeanSq(const std::vector<real> &xs, real target) {
  real acc = 0.0;
  for (real x : xs) acc += (x - target) * (x - target);
  return acc / static_cast<real>(xs.size());
}

}  // namespace

void LossWeights::Validate() const {
  for (real v : {alpha1, alpha2, alpha3, alpha4, alpha5, alpha6, lambda_rel,
                 beta, soft_real, soft_fake})
    RASO_CHECK(std::isfinite(v) && v > 0.0, "loss weights must be positive");
  RASO_CHECK(soft_fake < soft_real, "fake label must be below the real label");
}

bool LossReport::all_finite() const {
  for (real v : {adv, sex, content, f0, formant, cycle, total})
    if (!std::isfinite(v)) return false;
  return true;
}

std::string LossLogLine(int64_t step, const LossReport &r) {
  char buf[256];
  std::snprintf(buf, sizeof(buf),
                "step=%lld adv=%.9g sex=%.9g content=%.9g f0=%.9g "
                "formant=%.9g cycle=%.9g total=%.9g",
                static_cast<long long>(step), r.adv, r.sex, r.content, r.f0,
                r.formant, r.cycle, r.total);
  return buf;
}

bool ParseLossLogLine(const std::string &line, int64_t *step,
                      LossReport *report) {
  long long s = 0;
  LossReport r;
  const int got = std::sscanf(
      line.c_str(),
      "step=%lld adv=%lf sex=%lf content=%lf f0=%lf formant=%lf cycle=%lf "
      "total=%lf",
      &s, &r.adv, &r.sex, &r.content, &r.f0, &r.formant, &r.cycle, &r.total);
  if (got != 8) return false;
  *step = s;
  *report = r;
  return true;
}

// ---------------------------------------------------------------------------
// plain forms
// ---------------------------------------------------------------------------

real AdvLossD(const std::vector<real> &scores_real,
              const std::vector<real> &scores_fake, const LossWeights &w) {
  RASO_CHECK(!scores_real.empty() && !scores_fake.empty(),
             "adversarial loss needs nonempty score lists");
  return 0.5 * MeanSq(scores_real, w.soft_real) +
         0.5 * MeanSq(scores_fake, w.soft_fake);
}

real AdvLossG(const std::vector<real> &scores_fake, const LossWeights &w) {
  RASO_CHECK(!scores_fake.empty(),
             "adversarial loss needs a nonempty score list");
  return 0.5 * MeanSq(scores_fake, w.soft_real);
}

real SexAmbiguityLoss(const std::vector<real> &p_male) {
  RASO_CHECK(!p_male.empty(), "ambiguity loss needs at least one probability");
  real acc = 0.0;
  for (real p : p_male) {
    const real q = std::clamp(p, kProbFloor, 1.0 - kProbFloor);
    acc += q * std::log(q) + (1.0 - q) * std::log(1.0 - q);
  }
  return acc / static_cast<real>(p_male.size());
}

real ContentLoss(const Tensor &feat_orig, const Tensor &feat_gen) {
  RASO_CHECK(feat_orig.shape == feat_gen.shape,
             "content features must share one shape");
  RASO_CHECK(feat_orig.numel() > 0, "content features are empty");
  real acc = 0.0;
  for (size_t i = 0; i < feat_orig.data.size(); i++)
    acc += std::abs(feat_orig.data[i] - feat_gen.data[i]);
  return acc / static_cast<real>(feat_orig.numel());
}

real CycleLoss(const MelSpectrogram &x, const MelSpectrogram &x_cycled) {
  RASO_CHECK(x.n_mels == x_cycled.n_mels && x.n_frames == x_cycled.n_frames,
             "cycle operands must share one shape");
  RASO_CHECK(!x.values.empty(), "cycle operands are empty");
  real acc = 0.0;
  for (size_t i = 0; i < x.values.size(); i++)
    acc += std::abs(x.values[i] - x_cycled.values[i]);
  return acc / static_cast<real>(x.values.size());
}

real F0Loss(const PitchTrack &f0_gen, const PitchTrack &f0_org, real mu_neu,
            real lambda_rel) {
  RASO_CHECK(f0_gen.size() == f0_org.size(),
             "pitch tracks must be frame-aligned");
  RASO_CHECK(mu_neu > 0.0, "neutral F0 target must be positive");
  std::vector<size_t> common;
  for (size_t i = 0; i < f0_gen.size(); i++)
    if (f0_gen.voiced[i] && f0_org.voiced[i]) common.push_back(i);
  RASO_CHECK(!common.empty(), "tracks share no voiced frames");

  real mean_gen = 0.0, mean_org = 0.0;
  for (size_t i : common) {
    mean_gen += f0_gen.f0_hz[i];
    mean_org += f0_org.f0_hz[i];
  }
  mean_gen /= static_cast<real>(common.size());
  mean_org /= static_cast<real>(common.size());

  real contour = 0.0;
  for (size_t i : common) {
    const real dg = std::log(f0_gen.f0_hz[i]) - std::log(mean_gen);
    const real dn = std::log(f0_org.f0_hz[i]) - std::log(mean_org);
    contour += std::abs(dg - dn);
  }
  contour /= static_cast<real>(common.size());
  return std::abs(mean_gen - mu_neu) + lambda_rel * contour;
}

real FormantLoss(const FormantStats &gen_stats,
                 const FormantStats &neutral_stats, real beta) {
  real acc = 0.0;
  for (size_t k = 0; k < 3; k++) {
    // A zero mean is the extractor's "no confident frames" marker.
    RASO_CHECK(std::isfinite(gen_stats.mean[k]) && gen_stats.mean[k] > 0.0,
               "generated statistics miss a formant");
    RASO_CHECK(std::isfinite(neutral_stats.mean[k]) &&
                   neutral_stats.mean[k] > 0.0,
               "neutral statistics miss a formant");
    acc += std::abs(gen_stats.mean[k] - neutral_stats.mean[k]) +
           beta * std::abs(gen_stats.stddev[k] - neutral_stats.stddev[k]);
  }
  return acc;
}

real TotalGeneratorLoss(const LossReport &terms, const LossWeights &weights) {
  struct Named {
    const char *name;
    real value;
    real weight;
  };
  const Named named[] = {{"adv", terms.adv, weights.alpha1},
                         {"sex", terms.sex, weights.alpha2},
                         {"content", terms.content, weights.alpha3},
                         {"f0", terms.f0, weights.alpha4},
                         {"formant", terms.formant, weights.alpha5},
                         {"cycle", terms.cycle, weights.alpha6}};
  real total = 0.0;
  for (const Named &n : named) {
    RASO_CHECK(std::isfinite(n.value),
               std::string("non-finite loss term: ") + n.name);
    total += n.weight * n.value;
  }
  return total;
}

// ---------------------------------------------------------------------------
// graph forms
// ---------------------------------------------------------------------------

Var BuildAdvLossD(Graph &g, Var scores_real, Var scores_fake,
                  const LossWeights &w) {
  Var lr = g.MeanAll(g.Square(g.AddScalar(scores_real, -w.soft_real)));
  Var lf = g.MeanAll(g.Square(g.AddScalar(scores_fake, -w.soft_fake)));
  return g.MulScalar(g.Add(lr, lf), 0.5);
}

Var BuildAdvLossG(Graph &g, Var scores_fake, const LossWeights &w) {
  return g.MulScalar(
      g.MeanAll(g.Square(g.AddScalar(scores_fake, -w.soft_real))), 0.5);
}

Var BuildSexAmbiguityLoss(Graph &g, Var p_male) {
  Var p = g.Clamp(p_male, kProbFloor, 1.0 - kProbFloor);
  Var q = g.AddScalar(g.MulScalar(p, -1.0), 1.0);
  return g.MeanAll(g.Add(g.Mul(p, g.Log(p)), g.Mul(q, g.Log(q))));
}

Var BuildL1Loss(Graph &g, Var a, Var b) {
  return g.MeanAll(g.Abs(g.Sub(a, b)));
}

Var BuildF0Surrogate(Graph &g, Var x) {
  const Tensor &xv = g.val(x);
  RASO_CHECK(xv.rank() == 4 && xv.dim(1) == 1 && xv.dim(2) == kNumMelBands,
             "surrogate input must be [B, 1, 80, T]");
  const int64_t batch = xv.dim(0);

  Var exc = g.Sub(x, g.BandSmooth(x, kF0SmoothRadius));
  Var w = g.Exp(g.MulScalar(g.SliceH(exc, kF0BandLo, kF0BandHi), kF0Sharpen));

  Tensor idx({batch, kF0BandHi - kF0BandLo});
  for (int64_t b = 0; b < batch; b++)
    for (int64_t r = 0; r < kF0BandHi - kF0BandLo; r++)
      idx.at2(b, r) = static_cast<real>(kF0BandLo + r);
  Var centroid = g.Div(g.SumH(g.MulBands(w, g.Leaf(std::move(idx)))),
                       g.SumH(w));  // [B,1,1,T] fractional band index

  // Fractional band index -> Hz through the mel grid: the inverse of the
  // band-center map, mel = mel(8000) * (index + 1) / 81.
  const real mel_per_band = HzToMel(0.5 * kSampleRateHz) / 81.0;
  Var mel = g.MulScalar(g.AddScalar(centroid, 1.0), mel_per_band);
  return g.MulScalar(
      g.AddScalar(g.Exp(g.MulScalar(mel, kLn10 / 2595.0)), -1.0), 700.0);
}

Var BuildF0SurrogateLoss(Graph &g, Var gen, Var anchor,
                         const std::vector<PitchTrack> &voicing,
                         real lambda_rel) {
  const Tensor &xv = g.val(gen);
  const int64_t batch = xv.dim(0);
  const int64_t frames = xv.dim(3);
  RASO_CHECK(g.val(anchor).shape == xv.shape,
             "surrogate operands must share one shape");
  RASO_CHECK(static_cast<int64_t>(voicing.size()) == batch,
             "one voicing track per clip");

  // Per-frame weights summing to one per utterance (zero everywhere for a
  // fully unvoiced clip, which then contributes nothing to either term).
  Tensor mask({batch, 1, 1, frames});
  for (int64_t b = 0; b < batch; b++) {
    const PitchTrack &p = voicing[static_cast<size_t>(b)];
    RASO_CHECK(static_cast<int64_t>(p.size()) == frames,
               "voicing must be frame-aligned");
    const int count = p.num_voiced();
    if (count == 0) continue;
    for (int64_t t = 0; t < frames; t++)
      if (p.voiced[static_cast<size_t>(t)])
        mask.at4(b, 0, 0, t) = 1.0 / static_cast<real>(count);
  }
  Var m = g.Leaf(std::move(mask));

  Var hz_gen = BuildF0Surrogate(g, gen);
  Var hz_anchor = BuildF0Surrogate(g, anchor);
  Var mean_gen = g.SumW(g.Mul(hz_gen, m));        // [B,1,1,1]
  Var mean_anchor = g.SumW(g.Mul(hz_anchor, m));
  Var align = g.MeanAll(g.Abs(g.Sub(mean_gen, mean_anchor)));

  // Mean-relative log contours; the small offset keeps the log finite for a
  // fully unvoiced clip whose masked mean is zero.
  auto contour = [&](Var hz, Var mean) {
    Var neg_log_mean = g.Reshape(
        g.MulScalar(g.Log(g.AddScalar(mean, 1e-3)), -1.0), {batch, 1});
    return g.AddCh(g.Log(hz), neg_log_mean);
  };
  Var rel = g.Sub(contour(hz_gen, mean_gen), contour(hz_anchor, mean_anchor));
  Var shape_term = g.MeanAll(g.SumW(g.Mul(g.Abs(rel), m)));
  return g.Add(align, g.MulScalar(shape_term, lambda_rel));
}

Var BuildFormantLoss(Graph &g, Var mu_gen, Var sigma_gen,
                     const FormantStats &neutral_stats, real beta) {
  RASO_CHECK(g.val(mu_gen).numel() == 3 && g.val(sigma_gen).numel() == 3,
             "formant moments must have three entries");
  Tensor mu_n({3}), sd_n({3});
  for (size_t k = 0; k < 3; k++) {
    RASO_CHECK(std::isfinite(neutral_stats.mean[k]) &&
                   neutral_stats.mean[k] > 0.0,
               "neutral statistics miss a formant");
    mu_n.data[k] = neutral_stats.mean[k];
    sd_n.data[k] = neutral_stats.stddev[k];
  }
  Var mu_term = g.SumAll(g.Abs(g.Sub(mu_gen, g.Leaf(std::move(mu_n)))));
  Var sd_term = g.SumAll(g.Abs(g.Sub(sigma_gen, g.Leaf(std::move(sd_n)))));
  return g.Add(mu_term, g.MulScalar(sd_term, beta));
}

Var BuildWeightedTotal(Graph &g, Var adv, Var sex, Var content, Var f0,
                       Var formant, Var cycle, const LossWeights &w) {
  Var total = g.MulScalar(adv, w.alpha1);
  total = g.Add(total, g.MulScalar(sex, w.alpha2));
  total = g.Add(total, g.MulScalar(content, w.alpha3));
  total = g.Add(total, g.MulScalar(f0, w.alpha4));
  total = g.Add(total, g.MulScalar(formant, w.alpha5));
  return g.Add(total, g.MulScalar(cycle, w.alpha6));
}

}  // namespace raso
