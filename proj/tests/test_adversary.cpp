// tests/test_adversary.cpp

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
#include <vector>

#include "doctest.h"
#include "raso/generator.hpp"

using namespace raso;

namespace {

MelSpectrogram RandomMel(int64_t frames, Rng &rng) {
  MelSpectrogram mel(kNumMelBands, frames);
  for (real &v : mel.values) v = GaussianReal(rng, -4.0, 2.0);
  return mel;
}

// Upper bound on the equal error rate: the best achievable max(FAR, FRR)
// over every threshold between adjacent scores.  Deliberately independent
// of the evaluation module's interpolating implementation.
real EerUpperBound(const std::vector<real> &pos, const std::vector<real> &neg) {
  std::vector<real> thresholds;
  for (real s : pos) thresholds.push_back(s);
  for (real s : neg) thresholds.push_back(s);
  thresholds.push_back(-1e30);
  thresholds.push_back(1e30);
  real best = 1.0;
  for (real thr : thresholds) {
    int fa = 0, fr = 0;
    for (real s : neg)
      if (s >= thr) fa++;
    for (real s : pos)
      if (s < thr) fr++;
    const real far = static_cast<real>(fa) / static_cast<real>(neg.size());
    const real frr = static_cast<real>(fr) / static_cast<real>(pos.size());
    best = std::min(best, std::max(far, frr));
  }
  return best;
}

real FeatureL1(const Tensor &a, const Tensor &b) {
  real acc = 0.0;
  for (size_t i = 0; i < a.data.size(); i++)
    acc += std::abs(a.data[i] - b.data[i]);
  return acc / static_cast<real>(a.data.size());
}

}  // namespace

TEST_CASE("discriminator scores one scalar per clip") {
  DiscriminatorNet net = DiscriminatorNet::Make(5);
  Rng rng(6);
  const MelSpectrogram m0 = RandomMel(33, rng);
  const MelSpectrogram m1 = RandomMel(33, rng);
  const MelSpectrogram m2 = RandomMel(33, rng);

  Graph g;
  Var scores = BuildDiscriminate(g, net, g.Leaf(MelBatchTensor({&m0, &m1, &m2})));
  REQUIRE(g.val(scores).rank() == 2);
  CHECK(g.val(scores).dim(0) == 3);
  CHECK(g.val(scores).dim(1) == 1);
  CHECK(g.val(scores).all_finite());

  // The single-clip convenience call agrees with the batched scores, and is
  // deterministic.
  CHECK(Discriminate(net, m0) == doctest::Approx(g.val(scores).data[0]).epsilon(1e-12));
  CHECK(Discriminate(net, m1) == Discriminate(net, m1));
}

TEST_CASE("discriminator training separates toy data under spectral norm") {
  DiscriminatorNet net = DiscriminatorNet::Make(17);
  Rng rng(18);

  // Separable toy task: real maps sit around +1, fake maps around -1.
  Tensor real_x = Tensor::Randn({8, 1, kNumMelBands, 24}, rng, 0.3);
  Tensor fake_x = Tensor::Randn({8, 1, kNumMelBands, 24}, rng, 0.3);
  for (real &v : real_x.data) v += 1.0;
  for (real &v : fake_x.data) v -= 1.0;

  nn::AdamW opt;
  opt.lr = 1e-3;
  for (int step = 0; step < 200; step++) {
    Graph g;
    Var dr = BuildDiscriminate(g, net, g.Leaf(real_x));
    Var df = BuildDiscriminate(g, net, g.Leaf(fake_x));
    Var loss = g.Add(g.MeanAll(g.Square(g.AddScalar(dr, -0.95))),
                     g.MeanAll(g.Square(g.AddScalar(df, -0.05))));
    net.params.ZeroGrad();
    g.Backward(loss);
    opt.Step(net.params);
    net.RefreshSpectralNorms(3);
  }

  Graph g;
  Var vr = BuildDiscriminate(g, net, g.Leaf(real_x));
  Var vf = BuildDiscriminate(g, net, g.Leaf(fake_x));
  const Tensor &dr = g.val(vr);
  const Tensor &df = g.val(vf);
  real mean_real = 0.0, mean_fake = 0.0;
  for (int64_t i = 0; i < 8; i++) {
    mean_real += dr.data[static_cast<size_t>(i)] / 8.0;
    mean_fake += df.data[static_cast<size_t>(i)] / 8.0;
  }
  INFO("mean real ", mean_real, " mean fake ", mean_fake);
  CHECK(mean_real - mean_fake > 0.3);

  // Invariant: every normalized kernel keeps its top singular value at or
  // below 1 (verified with a long, independently-seeded power iteration).
  for (const nn::Conv2d *c : {&net.s0_c0, &net.s0_c1, &net.s0_c2, &net.s0_head,
                              &net.s1_c0, &net.s1_c1, &net.s1_c2, &net.s1_head}) {
    Tensor scaled = c->w->value;
    for (real &v : scaled.data) v /= c->sigma;
    std::vector<real> fresh_u;
    const real sigma = nn::PowerIterSigma(scaled, &fresh_u, 50);
    INFO("layer ", c->w->name, " normalized sigma ", sigma);
    CHECK(sigma <= 1.0 + 1e-3);
  }
}

TEST_CASE("proxy classifier separates the synthetic classes") {
  SynthCorpusConfig cfg;
  cfg.n_clips = 220;
  cfg.seed = 41;
  const std::vector<SynthClip> corpus = SynthCorpus(cfg);

  std::vector<MelSpectrogram> mels;
  mels.reserve(corpus.size());
  for (const SynthClip &c : corpus) mels.push_back(ComputeMel(c.clip));

  // 160 train / 60 held-out; classes alternate, so any prefix is balanced.
  std::vector<const MelSpectrogram *> train;
  std::vector<int> train_labels;
  for (size_t i = 0; i < 160; i++) {
    train.push_back(&mels[i]);
    train_labels.push_back(corpus[i].sex);
  }
  const ProxyConvClassifier cls = TrainProxyClassifier(train, train_labels, 8, 9);
  CHECK_FALSE(cls.trainable);

  std::vector<real> male_scores, female_scores;
  for (size_t i = 160; i < corpus.size(); i++) {
    const real p = cls.Classify(mels[i]);
    CHECK(p >= 0.0);
    CHECK(p <= 1.0);
    (corpus[i].sex == 0 ? male_scores : female_scores).push_back(p);
  }
  const real eer = EerUpperBound(male_scores, female_scores);
  INFO("held-out EER bound ", eer);
  CHECK(eer <= 0.10);

  SUBCASE("inference leaves parameters bit-identical") {
    const uint64_t before = cls.params()->Checksum();
    Graph g;
    Var x = g.Leaf(MelBatchTensor({&mels[0], &mels[1]}), /*needs_grad=*/true);
    Var p = cls.BuildClassify(g, x);
    g.Backward(g.MeanAll(g.Square(p)));
    CHECK(cls.params()->Checksum() == before);
  }

  SUBCASE("a single-class corpus is rejected") {
    std::vector<const MelSpectrogram *> one_class(train.begin(), train.begin() + 8);
    CHECK_THROWS_AS(TrainProxyClassifier(one_class, std::vector<int>(8, 0), 1, 9),
                    Error);
  }
}

TEST_CASE("content features are deterministic and content-dominated") {
  const MfccFeatureExtractor fx;
  Rng rng(71);

  SUBCASE("shape contract: D = 39, T' = T") {
    const MelSpectrogram mel = RandomMel(23, rng);
    const Tensor f = fx.Extract(mel);
    REQUIRE(f.rank() == 2);
    CHECK(f.dim(0) == 39);
    CHECK(f.dim(1) == 23);
    CHECK(f.all_finite());
    CHECK(fx.dim() == 39);
  }

  SUBCASE("identical inputs give identical features") {
    const MelSpectrogram mel = RandomMel(19, rng);
    CHECK(fx.Extract(mel).data == fx.Extract(mel).data);
  }

  SUBCASE("same vowel sequence across classes is closer than different sequences") {
    SynthCorpusConfig cfg;
    cfg.n_clips = 80;
    cfg.seed = 43;
    const std::vector<SynthClip> corpus = SynthCorpus(cfg);
    std::vector<Tensor> feats;
    feats.reserve(corpus.size());
    for (const SynthClip &c : corpus) feats.push_back(fx.Extract(ComputeMel(c.clip)));

    real same_sum = 0.0, diff_sum = 0.0;
    int same_n = 0, diff_n = 0;
    for (size_t i = 0; i < corpus.size(); i++) {
      for (size_t j = i + 1; j < corpus.size(); j++) {
        const real d = FeatureL1(feats[i], feats[j]);
        if (corpus[i].transcript == corpus[j].transcript &&
            corpus[i].sex != corpus[j].sex) {
          same_sum += d;
          same_n++;
        } else if (corpus[i].transcript != corpus[j].transcript) {
          diff_sum += d;
          diff_n++;
        }
      }
    }
    REQUIRE(same_n > 0);
    REQUIRE(diff_n > 0);
    const real mean_same = same_sum / same_n;
    const real mean_diff = diff_sum / diff_n;
    INFO("cross-class same-transcript ", mean_same, " vs different ", mean_diff,
         " over ", same_n, "/", diff_n, " pairs");
    CHECK(mean_same < mean_diff);
  }
}

TEST_CASE("a constant stub classifier satisfies the interface") {
  const ConstClassifier stub(0.7);
  Rng rng(81);
  const MelSpectrogram mel = RandomMel(12, rng);
  CHECK(stub.Classify(mel) == doctest::Approx(0.7).epsilon(1e-15));

  Graph g;
  Var x = g.Leaf(MelBatchTensor({&mel, &mel}), /*needs_grad=*/true);
  Var p = stub.BuildClassify(g, x);
  CHECK(g.val(p).dim(0) == 2);
  CHECK(g.val(p).data[0] == 0.7);
  CHECK(g.val(p).data[1] == 0.7);
}
