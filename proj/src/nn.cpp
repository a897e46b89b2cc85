// raso/nn.cpp

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

#include "raso/nn.hpp"

#include <cstring>
#include <istream>
#include <ostream>

namespace raso {
namespace nn {

Param &ParamSet::Add(const std::string &name, Tensor init) {
  RASO_CHECK(index_.count(name) == 0, "duplicate parameter name: " + name);
  auto p = std::make_unique<Param>();
  p->name = name;
  p->grad = Tensor(init.shape);
  p->value = std::move(init);
  Param &ref = *p;
  index_[name] = p.get();
  params_.push_back(std::move(p));
  return ref;
}

Param &ParamSet::Get(const std::string &name) {
  auto it = index_.find(name);
  RASO_CHECK(it != index_.end(), "unknown parameter: " + name);
  return *it->second;
}

const Param &ParamSet::Get(const std::string &name) const {
  auto it = index_.find(name);
  RASO_CHECK(it != index_.end(), "unknown parameter: " + name);
  return *it->second;
}

int64_t ParamSet::NumValues() const {
  int64_t n = 0;
  for (const auto &p : params_) n += p->value.numel();
  return n;
}

void ParamSet::ZeroGrad() {
  for (auto &p : params_) std::fill(p->grad.data.begin(), p->grad.data.end(), 0.0);
}

uint64_t ParamSet::Checksum() const {
  uint64_t h = 1469598103934665603ull;
  for (const auto &p : params_) {
    h = Fnv1a(p->name.data(), p->name.size(), h);
    h = Fnv1a(p->value.data.data(), p->value.data.size() * sizeof(real), h);
  }
  return h;
}

namespace {

constexpr char kMagic[8] = {'R', 'A', 'S', 'O', 'P', 'R', 'M', '1'};

template <typename T>
void WritePod(std::ostream &os, const T &v) {
  os.write(reinterpret_cast<const char *>(&v), sizeof(T));
}

template <typename T>
void ReadPod(std::istream &is, T *v) {
  is.read(reinterpret_cast<char *>(v), sizeof(T));
  RASO_CHECK(is.good(), "truncated parameter stream");
}

void WriteTensor(std::ostream &os, const Tensor &t) {
  WritePod<uint32_t>(os, static_cast<uint32_t>(t.rank()));
  for (int64_t d : t.shape) WritePod<int64_t>(os, d);
  os.write(reinterpret_cast<const char *>(t.data.data()),
           static_cast<std::streamsize>(t.data.size() * sizeof(real)));
}

Tensor ReadTensor(std::istream &is) {
  uint32_t rank = 0;
  ReadPod(is, &rank);
  RASO_CHECK(rank <= 4, "corrupt parameter stream: bad rank");
  std::vector<int64_t> shape(rank);
  for (auto &d : shape) ReadPod(is, &d);
  Tensor t(shape);
  is.read(reinterpret_cast<char *>(t.data.data()),
          static_cast<std::streamsize>(t.data.size() * sizeof(real)));
  RASO_CHECK(is.good(), "truncated parameter stream");
  return t;
}

}  // namespace

void ParamSet::Save(std::ostream &os, bool with_opt_state) const {
  os.write(kMagic, sizeof(kMagic));
  WritePod<uint8_t>(os, with_opt_state ? 1 : 0);
  WritePod<uint64_t>(os, static_cast<uint64_t>(params_.size()));
  for (const auto &p : params_) {
    WritePod<uint32_t>(os, static_cast<uint32_t>(p->name.size()));
    os.write(p->name.data(), static_cast<std::streamsize>(p->name.size()));
    WriteTensor(os, p->value);
    if (with_opt_state) {
      WriteTensor(os, p->m.numel() ? p->m : Tensor(p->value.shape));
      WriteTensor(os, p->v.numel() ? p->v : Tensor(p->value.shape));
    }
  }
}

void ParamSet::Load(std::istream &is) {
  char magic[8];
  is.read(magic, sizeof(magic));
  RASO_CHECK(is.good() && std::memcmp(magic, kMagic, sizeof(kMagic)) == 0,
             "not a parameter file");
  uint8_t with_opt = 0;
  ReadPod(is, &with_opt);
  uint64_t count = 0;
  ReadPod(is, &count);
  RASO_CHECK(count == params_.size(),
             "parameter count mismatch while loading checkpoint");
  for (auto &p : params_) {
    uint32_t len = 0;
    ReadPod(is, &len);
    std::string name(len, '\0');
    is.read(name.data(), len);
    RASO_CHECK(is.good() && name == p->name,
               "parameter order mismatch while loading checkpoint: expected " +
                   p->name + " got " + name);
    Tensor v = ReadTensor(is);
    RASO_CHECK(v.shape == p->value.shape, "parameter shape mismatch: " + name);
    p->value = std::move(v);
    if (with_opt) {
      p->m = ReadTensor(is);
      p->v = ReadTensor(is);
      RASO_CHECK(p->m.shape == p->value.shape && p->v.shape == p->value.shape,
                 "optimizer state shape mismatch: " + name);
    }
  }
}

void ParamSet::CopyValuesFrom(const ParamSet &other) {
  RASO_CHECK(other.params_.size() == params_.size(),
             "parameter count mismatch in CopyValuesFrom");
  for (size_t i = 0; i < params_.size(); i++) {
    const Param &src = *other.params_[i];
    Param &dst = *params_[i];
    RASO_CHECK(src.name == dst.name && src.value.shape == dst.value.shape,
               "parameter mismatch in CopyValuesFrom: " + dst.name);
    dst.value.data = src.value.data;
  }
}

void ParamSet::EmaBlendFrom(const ParamSet &src, real gamma) {
  RASO_CHECK(src.params_.size() == params_.size(),
             "parameter count mismatch in EmaBlendFrom");
  for (size_t i = 0; i < params_.size(); i++) {
    const auto &s = src.params_[i]->value.data;
    auto &d = params_[i]->value.data;
    RASO_CHECK(s.size() == d.size(), "parameter size mismatch in EmaBlendFrom");
    for (size_t k = 0; k < d.size(); k++) d[k] = gamma * d[k] + (1.0 - gamma) * s[k];
  }
}

void AdamW::Step(ParamSet &params) {
  t++;
  const real bc1 = 1.0 - std::pow(beta1, static_cast<real>(t));
  const real bc2 = 1.0 - std::pow(beta2, static_cast<real>(t));
  for (auto &p : params.params()) {
    if (!p->trainable) continue;
    if (p->m.numel() == 0) {
      p->m = Tensor(p->value.shape);
      p->v = Tensor(p->value.shape);
    }
    auto &val = p->value.data;
    auto &g = p->grad.data;
    auto &m = p->m.data;
    auto &v = p->v.data;
    for (size_t i = 0; i < val.size(); i++) {
      m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
      v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
      const real mhat = m[i] / bc1;
      const real vhat = v[i] / bc2;
      val[i] -= lr * (mhat / (std::sqrt(vhat) + eps) + weight_decay * val[i]);
    }
  }
}

real PowerIterSigma(const Tensor &w, std::vector<real> *u, int iters) {
  const int64_t rows = w.dim(0);
  const int64_t cols = w.numel() / rows;
  if (u->empty()) u->assign(static_cast<size_t>(rows), 1.0 / std::sqrt(static_cast<real>(rows)));
  std::vector<real> v(static_cast<size_t>(cols), 0.0);
  const real *W = w.data.data();
  for (int it = 0; it < iters; it++) {
    // v = W^T u, normalized
    std::fill(v.begin(), v.end(), 0.0);
    for (int64_t r = 0; r < rows; r++) {
      const real ur = (*u)[static_cast<size_t>(r)];
      const real *row = W + r * cols;
      for (int64_t c = 0; c < cols; c++) v[static_cast<size_t>(c)] += row[c] * ur;
    }
    real nv = 0;
    for (real x : v) nv += x * x;
    nv = std::sqrt(nv) + 1e-12;
    for (real &x : v) x /= nv;
    // u = W v, normalized
    real nu = 0;
    for (int64_t r = 0; r < rows; r++) {
      const real *row = W + r * cols;
      real s = 0;
      for (int64_t c = 0; c < cols; c++) s += row[c] * v[static_cast<size_t>(c)];
      (*u)[static_cast<size_t>(r)] = s;
      nu += s * s;
    }
    nu = std::sqrt(nu) + 1e-12;
    for (real &x : *u) x /= nu;
  }
  // sigma = u^T W v
  real sigma = 0;
  for (int64_t r = 0; r < rows; r++) {
    const real *row = W + r * cols;
    real s = 0;
    for (int64_t c = 0; c < cols; c++) s += row[c] * v[static_cast<size_t>(c)];
    sigma += (*u)[static_cast<size_t>(r)] * s;
  }
  return std::fabs(sigma);
}

Conv2d Conv2d::Make(ParamSet &ps, const std::string &name, int in_ch, int out_ch,
                    int kh, int kw, int stride, int pad, Rng &rng, bool spectral) {
  Conv2d layer;
  const real stddev = std::sqrt(2.0 / static_cast<real>(in_ch * kh * kw));
  layer.w = &ps.Add(name + ".w", Tensor::Randn({out_ch, in_ch, kh, kw}, rng, stddev));
  layer.b = &ps.Add(name + ".b", Tensor({static_cast<int64_t>(out_ch)}));
  layer.stride = stride;
  layer.pad = pad;
  layer.spectral = spectral;
  if (spectral) layer.RefreshSpectralNorm(5);
  return layer;
}

Var Conv2d::Forward(Graph &g, Var x) const {
  Var wv = g.ParamLeaf(*w);
  if (spectral) wv = g.MulScalar(wv, 1.0 / sigma);
  Var bv = g.ParamLeaf(*b);
  return g.Conv2d(x, wv, bv, stride, pad);
}

void Conv2d::RefreshSpectralNorm(int iters) {
  RASO_CHECK(spectral, "RefreshSpectralNorm on a plain conv layer");
  sigma = std::max<real>(PowerIterSigma(w->value, &u, iters), 1e-8);
}

Linear Linear::Make(ParamSet &ps, const std::string &name, int in_dim, int out_dim,
                    Rng &rng, bool spectral) {
  Linear layer;
  const real stddev = std::sqrt(2.0 / static_cast<real>(in_dim));
  layer.w = &ps.Add(name + ".w", Tensor::Randn({in_dim, out_dim}, rng, stddev));
  layer.b = &ps.Add(name + ".b", Tensor({static_cast<int64_t>(out_dim)}));
  layer.spectral = spectral;
  if (spectral) layer.RefreshSpectralNorm(5);
  return layer;
}

Var Linear::Forward(Graph &g, Var x) const {
  Var wv = g.ParamLeaf(*w);
  if (spectral) wv = g.MulScalar(wv, 1.0 / sigma);
  Var bv = g.ParamLeaf(*b);
  return g.Linear(x, wv, bv);
}

void Linear::RefreshSpectralNorm(int iters) {
  RASO_CHECK(spectral, "RefreshSpectralNorm on a plain linear layer");
  sigma = std::max<real>(PowerIterSigma(w->value, &u, iters), 1e-8);
}

AdaIN AdaIN::Make(ParamSet &ps, const std::string &name, int style_dim, int channels) {
  AdaIN layer;
  layer.to_gamma.w = &ps.Add(name + ".gamma.w", Tensor({style_dim, channels}));
  layer.to_gamma.b = &ps.Add(name + ".gamma.b", Tensor({static_cast<int64_t>(channels)}));
  layer.to_beta.w = &ps.Add(name + ".beta.w", Tensor({style_dim, channels}));
  layer.to_beta.b = &ps.Add(name + ".beta.b", Tensor({static_cast<int64_t>(channels)}));
  return layer;
}

Var AdaIN::Forward(Graph &g, Var x, Var style) const {
  Var normed = g.InstanceNorm(x);
  Var gamma = g.AddScalar(to_gamma.Forward(g, style), 1.0);
  Var beta = to_beta.Forward(g, style);
  return g.AddCh(g.MulCh(normed, gamma), beta);
}

}  // namespace nn
}  // namespace raso
