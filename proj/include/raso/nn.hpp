// raso/nn.hpp

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

#ifndef RASO_NN_HPP_
#define RASO_NN_HPP_

#include <iosfwd>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "raso/tensor.hpp"

namespace raso {
namespace nn {

// A persistent trainable tensor.  Gradients accumulate across Graph::Backward
// calls until ZeroGrad; optimizer moments live here so that a checkpoint can
// capture the full training state.
struct Param {
  std::string name;
  Tensor value;
  Tensor grad;
  Tensor m;  // AdamW first moment (allocated on first optimizer step)
  Tensor v;  // AdamW second moment
  bool trainable = true;
};

// Ordered, named registry of parameters.  Creation order is the canonical
// order for optimizer steps, serialization and checksums, which keeps every
// run of the same build bit-reproducible.
class ParamSet {
 public:
  Param &Add(const std::string &name, Tensor init);
  Param &Get(const std::string &name);
  const Param &Get(const std::string &name) const;
  bool Has(const std::string &name) const { return index_.count(name) != 0; }
  const std::vector<std::unique_ptr<Param>> &params() const { return params_; }
  std::vector<std::unique_ptr<Param>> &params() { return params_; }
  size_t size() const { return params_.size(); }
  int64_t NumValues() const;

  void ZeroGrad();
  // FNV-1a over parameter values in creation order (names included), used by
  // tests to prove that an update touched only the intended sub-network.
  uint64_t Checksum() const;

  // Binary serialization of values (and optionally optimizer moments).
  void Save(std::ostream &os, bool with_opt_state) const;
  void Load(std::istream &is);
  // Copies values by name from another set; shapes must match exactly.
  void CopyValuesFrom(const ParamSet &other);
  // dst = gamma * dst + (1 - gamma) * src, element-wise over values.
  void EmaBlendFrom(const ParamSet &src, real gamma);

 private:
  std::vector<std::unique_ptr<Param>> params_;
  std::map<std::string, Param *> index_;
};

// Decoupled weight decay Adam.  Step order follows ParamSet creation order.
struct AdamW {
  real lr = 1e-4;
  real beta1 = 0.9;
  real beta2 = 0.999;
  real eps = 1e-8;
  real weight_decay = 0.01;
  int64_t t = 0;

  void Step(ParamSet &params);
};

// Power-iteration estimate of the top singular value of w flattened to
// [rows0, numel/rows0].  u is the persistent left-vector estimate; pass an
// empty vector to start from a deterministic all-ones direction.
real PowerIterSigma(const Tensor &w, std::vector<real> *u, int iters);

// ---------------------------------------------------------------------------
// layers
// ---------------------------------------------------------------------------

// Convolution layer.  With spectral normalization enabled the forward pass
// scales the kernel by 1/sigma where sigma is a buffered power-iteration
// estimate; the buffer is only refreshed by RefreshSpectralNorm (after an
// optimizer step), so within one graph the scale is an exact constant.
struct Conv2d {
  Param *w = nullptr;
  Param *b = nullptr;
  int stride = 1;
  int pad = 0;
  bool spectral = false;
  std::vector<real> u;
  real sigma = 1.0;

  static Conv2d Make(ParamSet &ps, const std::string &name, int in_ch, int out_ch,
                     int kh, int kw, int stride, int pad, Rng &rng,
                     bool spectral = false);
  Var Forward(Graph &g, Var x) const;
  void RefreshSpectralNorm(int iters = 1);
};

struct Linear {
  Param *w = nullptr;
  Param *b = nullptr;
  bool spectral = false;
  std::vector<real> u;
  real sigma = 1.0;

  static Linear Make(ParamSet &ps, const std::string &name, int in_dim, int out_dim,
                     Rng &rng, bool spectral = false);
  Var Forward(Graph &g, Var x) const;
  void RefreshSpectralNorm(int iters = 1);
};

// Adaptive instance normalization: IN(x) * (1 + gamma(s)) + beta(s), where
// gamma and beta are linear projections of the per-sample style vector.
// Projections start at zero so the block is plain instance norm at init.
struct AdaIN {
  Linear to_gamma;
  Linear to_beta;

  static AdaIN Make(ParamSet &ps, const std::string &name, int style_dim,
                    int channels);
  Var Forward(Graph &g, Var x, Var style) const;
};

}  // namespace nn
}  // namespace raso

#endif  // RASO_NN_HPP_
