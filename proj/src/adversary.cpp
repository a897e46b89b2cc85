// src/adversary.cpp

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

#include "raso/adversary.hpp"

#include <cmath>
#include <cstdio>
#include <map>
#include <vector>

#include "raso/generator.hpp"  // MelBatchTensor

namespace raso {

namespace {

constexpr real kPi = 3.14159265358979323846;
constexpr int kNumCepstra = 13;

// One critic scale: three strided spectrally-normalized convs, a 1x1 head,
// and a spatial mean.
Var ScaleScore(Graph &g, const nn::Conv2d &c0, const nn::Conv2d &c1,
               const nn::Conv2d &c2, const nn::Conv2d &head, Var x) {
  Var h = g.LeakyRelu(c0.Forward(g, x), 0.2);
  h = g.LeakyRelu(c1.Forward(g, h), 0.2);
  h = g.LeakyRelu(c2.Forward(g, h), 0.2);
  Var map = head.Forward(g, h);
  const real count =
      static_cast<real>(g.val(map).dim(2) * g.val(map).dim(3));
  return g.MulScalar(g.SumHW(map), 1.0 / count);
}

}  // namespace

DiscriminatorNet DiscriminatorNet::Make(uint64_t seed) {
  DiscriminatorNet net;
  nn::ParamSet &ps = net.params;
  Rng rng(seed);
  const bool sn = true;
  net.s0_c0 = nn::Conv2d::Make(ps, "d.s0.c0", 1, 8, 4, 4, 2, 1, rng, sn);
  net.s0_c1 = nn::Conv2d::Make(ps, "d.s0.c1", 8, 16, 4, 4, 2, 1, rng, sn);
  net.s0_c2 = nn::Conv2d::Make(ps, "d.s0.c2", 16, 16, 3, 3, 2, 1, rng, sn);
  net.s0_head = nn::Conv2d::Make(ps, "d.s0.head", 16, 1, 1, 1, 1, 0, rng, sn);
  net.s1_c0 = nn::Conv2d::Make(ps, "d.s1.c0", 1, 8, 4, 4, 2, 1, rng, sn);
  net.s1_c1 = nn::Conv2d::Make(ps, "d.s1.c1", 8, 16, 4, 4, 2, 1, rng, sn);
  net.s1_c2 = nn::Conv2d::Make(ps, "d.s1.c2", 16, 16, 3, 3, 2, 1, rng, sn);
  net.s1_head = nn::Conv2d::Make(ps, "d.s1.head", 16, 1, 1, 1, 1, 0, rng, sn);
  return net;
}

void DiscriminatorNet::RefreshSpectralNorms(int iters) {
  for (nn::Conv2d *c : {&s0_c0, &s0_c1, &s0_c2, &s0_head, &s1_c0, &s1_c1,
                        &s1_c2, &s1_head})
    c->RefreshSpectralNorm(iters);
}

Var BuildDiscriminate(Graph &g, const DiscriminatorNet &net, Var x) {
  const Tensor &xv = g.val(x);
  RASO_CHECK(xv.rank() == 4 && xv.dim(1) == 1 && xv.dim(2) == kNumMelBands,
             "discriminator input must be [B, 1, 80, T]");
  Var full = ScaleScore(g, net.s0_c0, net.s0_c1, net.s0_c2, net.s0_head, x);
  Var half = ScaleScore(g, net.s1_c0, net.s1_c1, net.s1_c2, net.s1_head,
                        g.AvgPoolW(x, 2));
  return g.MulScalar(g.Add(full, half), 0.5);
}

real Discriminate(const DiscriminatorNet &net, const MelSpectrogram &mel) {
  const MelSpectrogram *one = &mel;
  Graph g;
  Var score = BuildDiscriminate(g, net, g.Leaf(MelBatchTensor({one})));
  return g.val(score).data[0];
}

// ---------------------------------------------------------------------------
// sex classifier
// ---------------------------------------------------------------------------

real SexClassifier::Classify(const MelSpectrogram &mel) const {
  const MelSpectrogram *one = &mel;
  Graph g;
  Var p = BuildClassify(g, g.Leaf(MelBatchTensor({one})));
  return g.val(p).data[0];
}

ProxyConvClassifier ProxyConvClassifier::Make(uint64_t seed) {
  ProxyConvClassifier net;
  nn::ParamSet &ps = net.param_set;
  Rng rng(seed);
  net.c0 = nn::Conv2d::Make(ps, "cls.c0", 1, 8, 4, 4, 2, 1, rng);
  net.c1 = nn::Conv2d::Make(ps, "cls.c1", 8, 12, 4, 4, 2, 1, rng);
  net.c2 = nn::Conv2d::Make(ps, "cls.c2", 12, 16, 4, 4, 2, 1, rng);
  net.c3 = nn::Conv2d::Make(ps, "cls.c3", 16, 1, 3, 3, 1, 1, rng);
  return net;
}

Var ProxyConvClassifier::BuildClassify(Graph &g, Var x) const {
  const Tensor &xv = g.val(x);
  RASO_CHECK(xv.rank() == 4 && xv.dim(1) == 1 && xv.dim(2) == kNumMelBands,
             "classifier input must be [B, 1, 80, T]");
  Var h = g.LeakyRelu(c0.Forward(g, x), 0.1);
  h = g.LeakyRelu(c1.Forward(g, h), 0.1);
  h = g.LeakyRelu(c2.Forward(g, h), 0.1);
  Var map = c3.Forward(g, h);
  const real count =
      static_cast<real>(g.val(map).dim(2) * g.val(map).dim(3));
  return g.Sigmoid(g.MulScalar(g.SumHW(map), 1.0 / count));
}

std::string ProxyConvClassifier::description() const {
  return "four-layer convolutional proxy";
}

ProxyConvClassifier TrainProxyClassifier(
    const std::vector<const MelSpectrogram *> &mels,
    const std::vector<int> &labels, int epochs, uint64_t seed) {
  ProxyConvClassifier net = ProxyConvClassifier::Make(seed);
  FineTuneProxyClassifier(net, mels, labels, epochs, seed);
  return net;
}

void FineTuneProxyClassifier(ProxyConvClassifier &net,
                             const std::vector<const MelSpectrogram *> &mels,
                             const std::vector<int> &labels, int epochs,
                             uint64_t seed) {
  RASO_CHECK(mels.size() == labels.size(), "one label per spectrogram");
  RASO_CHECK(!mels.empty(), "cannot train on an empty corpus");
  int present[2] = {0, 0};
  for (int y : labels) {
    RASO_CHECK(y == 0 || y == 1, "sex label must be 0 or 1");
    present[y]++;
  }
  RASO_CHECK(present[0] > 0 && present[1] > 0,
             "classifier training needs both classes present");

  net.trainable = true;
  nn::AdamW opt;
  opt.lr = 1e-3;
  Rng rng(seed ^ 0x9e3779b97f4a7c15ull);
  const int batch_size = 16;

  // Batches must share a frame count, so shuffle within length groups.
  std::map<int64_t, std::vector<size_t>> by_len;
  for (size_t i = 0; i < mels.size(); i++)
    by_len[mels[i]->n_frames].push_back(i);

  for (int epoch = 0; epoch < epochs; epoch++) {
    for (auto &group : by_len) {
      std::vector<size_t> order = group.second;
      Shuffle(order, rng);
      for (size_t start = 0; start < order.size(); start += batch_size) {
        const size_t stop = std::min(order.size(), start + batch_size);
        std::vector<const MelSpectrogram *> batch;
        Tensor target({static_cast<int64_t>(stop - start), 1});
        for (size_t i = start; i < stop; i++) {
          batch.push_back(mels[order[i]]);
          // p_male targets: label 0 is male.
          target.data[i - start] = labels[order[i]] == 0 ? 1.0 : 0.0;
        }
        Graph g;
        Var p = net.BuildClassify(g, g.Leaf(MelBatchTensor(batch)));
        p = g.Clamp(p, 1e-6, 1.0 - 1e-6);
        Var t = g.Leaf(std::move(target));
        Var omt = g.AddScalar(g.MulScalar(t, -1.0), 1.0);
        Var omp = g.AddScalar(g.MulScalar(p, -1.0), 1.0);
        Var bce = g.MulScalar(
            g.MeanAll(g.Add(g.Mul(t, g.Log(p)), g.Mul(omt, g.Log(omp)))),
            -1.0);
        net.param_set.ZeroGrad();
        g.Backward(bce);
        opt.Step(net.param_set);
      }
    }
  }
  net.trainable = false;
}

Var ConstClassifier::BuildClassify(Graph &g, Var x) const {
  return g.Leaf(Tensor::Full({g.val(x).dim(0), 1}, p_));
}

std::string ConstClassifier::description() const {
  char buf[64];
  std::snprintf(buf, sizeof buf, "constant stub (p=%g)", p_);
  return buf;
}

// ---------------------------------------------------------------------------
// content features
// ---------------------------------------------------------------------------

MfccFeatureExtractor::MfccFeatureExtractor() {
  // Orthonormal DCT-II over the band axis, coefficients 0..12.
  dct_ = Tensor({kNumCepstra, 1, kNumMelBands, 1});
  const real n = static_cast<real>(kNumMelBands);
  for (int64_t k = 0; k < kNumCepstra; k++) {
    const real scale = std::sqrt((k == 0 ? 1.0 : 2.0) / n);
    for (int64_t b = 0; b < kNumMelBands; b++)
      dct_.at4(k, 0, b, 0) =
          scale * std::cos(kPi * static_cast<real>(k) *
                           (static_cast<real>(b) + 0.5) / n);
  }

  // Central time difference as a conv kernel on a [B, 13, 1, T] map.  The
  // height-1 input is zero-padded to 3 rows, and only the middle kernel row
  // is nonzero, so the extra rows contribute nothing.
  delta_ = Tensor({kNumCepstra, kNumCepstra, 3, 3});
  for (int64_t c = 0; c < kNumCepstra; c++) {
    delta_.at4(c, c, 1, 0) = -0.5;
    delta_.at4(c, c, 1, 2) = 0.5;
  }

  zero_bias_ = Tensor({kNumCepstra});
}

Var MfccFeatureExtractor::BuildExtract(Graph &g, Var x) const {
  const Tensor &xv = g.val(x);
  RASO_CHECK(xv.rank() == 4 && xv.dim(1) == 1 && xv.dim(2) == kNumMelBands,
             "feature extractor input must be [B, 1, 80, T]");
  Var bias = g.Leaf(zero_bias_);
  Var c = g.Conv2d(x, g.Leaf(dct_), bias, 1, 0);       // [B, 13, 1, T]
  Var d1 = g.Conv2d(c, g.Leaf(delta_), bias, 1, 1);    // velocity
  Var d2 = g.Conv2d(d1, g.Leaf(delta_), bias, 1, 1);   // acceleration
  return g.ConcatCh(g.ConcatCh(c, d1), d2);            // [B, 39, 1, T]
}

Tensor ContentFeatureExtractor::Extract(const MelSpectrogram &mel) const {
  const MelSpectrogram *one = &mel;
  Graph g;
  Var f = BuildExtract(g, g.Leaf(MelBatchTensor({one})));
  Tensor out = g.val(f);
  out.shape = {out.dim(1), out.dim(3)};
  return out;
}

}  // namespace raso
