// raso/adversary.hpp

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

#ifndef RASO_ADVERSARY_HPP_
#define RASO_ADVERSARY_HPP_

#include <string>
#include <vector>

#include "raso/nn.hpp"
#include "raso/signal.hpp"
#include "raso/tensor.hpp"

namespace raso {

// Real/fake critic: two convolutional scales (the full mel and a 2x
// time-downsampled copy), every layer spectrally normalized so the score is
// Lipschitz in its input.  Scores are unconstrained reals; the adversarial
// losses regress them onto soft targets rather than classifying.
struct DiscriminatorNet {
  nn::ParamSet params;
  nn::Conv2d s0_c0, s0_c1, s0_c2, s0_head;
  nn::Conv2d s1_c0, s1_c1, s1_c2, s1_head;

  static DiscriminatorNet Make(uint64_t seed);
  // Re-estimates every layer's top singular value; call after each optimizer
  // step so the next forward divides by an up-to-date sigma.
  void RefreshSpectralNorms(int iters = 3);
};

// Mean critic score over both scales; x is [B, 1, 80, T] -> [B, 1].
Var BuildDiscriminate(Graph &g, const DiscriminatorNet &net, Var x);
real Discriminate(const DiscriminatorNet &net, const MelSpectrogram &mel);

// ---------------------------------------------------------------------------
// attribute oracles
// ---------------------------------------------------------------------------

// Sex-probability oracle.  All downstream losses see only this interface, so
// the convolutional proxy below can be swapped for any other scorer (e.g. a
// constant stub in tests, or an external model's exported head).
class SexClassifier {
 public:
  virtual ~SexClassifier() = default;

  // Probability that each clip is male, in [0, 1]; x is [B, 1, 80, T] and
  // the result is [B, 1].  Must stay differentiable with respect to x so the
  // ambiguity loss can push gradients into the generator.
  virtual Var BuildClassify(Graph &g, Var x) const = 0;

  real Classify(const MelSpectrogram &mel) const;

  // One-line identification quoted in attack reports.
  virtual std::string description() const { return "sex classifier"; }

  virtual nn::ParamSet *params() { return nullptr; }
  virtual const nn::ParamSet *params() const { return nullptr; }

  // Cleared once training finishes; a frozen classifier must come through
  // any number of generator steps bit-identical.
  bool trainable = false;
};

// Four conv layers, global average pooling, sigmoid.
class ProxyConvClassifier : public SexClassifier {
 public:
  static ProxyConvClassifier Make(uint64_t seed);

  Var BuildClassify(Graph &g, Var x) const override;
  std::string description() const override;
  nn::ParamSet *params() override { return &param_set; }
  const nn::ParamSet *params() const override { return &param_set; }

  nn::ParamSet param_set;
  nn::Conv2d c0, c1, c2, c3;
};

// Fits a fresh proxy on labeled mels (label 0 = male, 1 = female) and
// returns it frozen.  Errors if only one class is present.
ProxyConvClassifier TrainProxyClassifier(
    const std::vector<const MelSpectrogram *> &mels,
    const std::vector<int> &labels, int epochs, uint64_t seed);

// Runs further supervised epochs on an existing proxy, in place; this is how
// the semi-informed attacker adapts a raw-trained classifier to obfuscated
// speech.  The proxy is left frozen on return.  Same label convention and
// both-classes requirement as TrainProxyClassifier.
void FineTuneProxyClassifier(ProxyConvClassifier &net,
                             const std::vector<const MelSpectrogram *> &mels,
                             const std::vector<int> &labels, int epochs,
                             uint64_t seed);

// Fixed-output stand-in used to prove that the losses depend only on the
// interface, never on proxy internals.
class ConstClassifier : public SexClassifier {
 public:
  explicit ConstClassifier(real p) : p_(p) {}
  Var BuildClassify(Graph &g, Var x) const override;
  std::string description() const override;

 private:
  real p_;
};

// Contextual content features; the content-preservation loss compares these
// between input and output, so they too must be graph-differentiable.
class ContentFeatureExtractor {
 public:
  virtual ~ContentFeatureExtractor() = default;

  virtual int dim() const = 0;
  // x is [B, 1, 80, T] -> [B, D, 1, T'].
  virtual Var BuildExtract(Graph &g, Var x) const = 0;

  Tensor Extract(const MelSpectrogram &mel) const;  // [D, T']
};

// Default handcrafted instance: 13 cepstral coefficients per frame (DCT-II
// of the log-mel bands) plus first and second time differences, D = 39 and
// T' = T.  Deterministic, no training dependency.
class MfccFeatureExtractor : public ContentFeatureExtractor {
 public:
  MfccFeatureExtractor();
  int dim() const override { return 39; }
  Var BuildExtract(Graph &g, Var x) const override;

 private:
  Tensor dct_;    // [13, 1, 80, 1]
  Tensor delta_;  // [13, 13, 3, 3]; only the middle kernel row is nonzero
  Tensor zero_bias_;
};

}  // namespace raso

#endif  // RASO_ADVERSARY_HPP_
