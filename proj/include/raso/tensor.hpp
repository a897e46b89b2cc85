// raso/tensor.hpp

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

#ifndef RASO_TENSOR_HPP_
#define RASO_TENSOR_HPP_

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "raso/common.hpp"

namespace raso {

// Dense row-major tensor of doubles, rank <= 4.  Layout for rank-4 data is
// [batch, channel, height, width] with flat index ((b*C + c)*H + h)*W + w.
struct Tensor {
  std::vector<int64_t> shape;
  std::vector<real> data;

  Tensor() = default;
  explicit Tensor(std::vector<int64_t> s) : shape(std::move(s)) {
    data.assign(static_cast<size_t>(Numel(shape)), 0.0);
  }
  Tensor(std::vector<int64_t> s, std::vector<real> d)
      : shape(std::move(s)), data(std::move(d)) {
    RASO_CHECK(static_cast<int64_t>(data.size()) == Numel(shape),
               "tensor data size does not match shape");
  }

  static int64_t Numel(const std::vector<int64_t> &s) {
    int64_t n = 1;
    for (int64_t d : s) n *= d;
    return n;
  }
  int64_t numel() const { return static_cast<int64_t>(data.size()); }
  int rank() const { return static_cast<int>(shape.size()); }
  int64_t dim(int i) const { return shape[static_cast<size_t>(i)]; }

  real &at4(int64_t b, int64_t c, int64_t h, int64_t w) {
    return data[static_cast<size_t>(((b * dim(1) + c) * dim(2) + h) * dim(3) + w)];
  }
  real at4(int64_t b, int64_t c, int64_t h, int64_t w) const {
    return data[static_cast<size_t>(((b * dim(1) + c) * dim(2) + h) * dim(3) + w)];
  }
  real &at2(int64_t r, int64_t c) { return data[static_cast<size_t>(r * dim(1) + c)]; }
  real at2(int64_t r, int64_t c) const { return data[static_cast<size_t>(r * dim(1) + c)]; }

  bool all_finite() const {
    for (real v : data)
      if (!std::isfinite(v)) return false;
    return true;
  }

  static Tensor Zeros(std::vector<int64_t> s) { return Tensor(std::move(s)); }
  static Tensor Full(std::vector<int64_t> s, real v) {
    Tensor t(std::move(s));
    std::fill(t.data.begin(), t.data.end(), v);
    return t;
  }
  static Tensor Scalar(real v) { return Tensor({1}, {v}); }
  static Tensor Randn(std::vector<int64_t> s, Rng &rng, real stddev) {
    Tensor t(std::move(s));
    for (real &v : t.data) v = GaussianReal(rng, 0.0, stddev);
    return t;
  }
};

namespace nn {
struct Param;  // defined in nn.hpp
}

// Reverse-mode autodiff tape.  A Var is an index into the tape; ops compute
// eagerly and register a backward closure.  backward() walks the tape in
// reverse creation order, so the graph must be built by a single thread.
class Graph;
using Var = int32_t;

struct Node {
  Tensor value;
  Tensor grad;  // allocated on demand, same shape as value
  bool has_grad = false;
  bool needs_grad = false;
  nn::Param *source = nullptr;
  std::function<void(Graph &, Node &)> backward;
  std::string tag;
};

class Graph {
 public:
  Var Leaf(Tensor t, bool needs_grad = false, std::string tag = "");
  // Leaf bound to a persistent parameter: value is copied in, and after
  // backward() the accumulated gradient is added to the parameter's grad.
  Var ParamLeaf(nn::Param &p);

  const Tensor &val(Var v) const { return nodes_[static_cast<size_t>(v)].value; }
  Tensor &grad(Var v);
  bool has_grad(Var v) const { return nodes_[static_cast<size_t>(v)].has_grad; }
  bool needs_grad(Var v) const { return nodes_[static_cast<size_t>(v)].needs_grad; }
  real scalar(Var v) const {
    RASO_CHECK(val(v).numel() == 1, "scalar() on non-scalar var");
    return val(v).data[0];
  }
  size_t size() const { return nodes_.size(); }

  // Seeds d(root)/d(root) = 1 and accumulates gradients down the tape, then
  // flushes parameter-leaf gradients into their Param::grad buffers.
  void Backward(Var root);

  // ---- elementwise ----
  Var Add(Var a, Var b);
  Var Sub(Var a, Var b);
  Var Mul(Var a, Var b);
  Var Div(Var a, Var b);
  Var AddScalar(Var a, real s);
  Var MulScalar(Var a, real s);
  Var Exp(Var a);
  Var Log(Var a);  // caller guarantees positive input
  Var Abs(Var a);
  Var Square(Var a);
  Var Sqrt(Var a);  // caller guarantees positive input
  Var Sigmoid(Var a);
  Var LeakyRelu(Var a, real slope);
  Var Clamp(Var a, real lo, real hi);

  // ---- shape / gather ----
  Var Reshape(Var a, std::vector<int64_t> shape);
  Var Transpose2d(Var a);                    // [M,N] -> [N,M]
  Var CropW(Var a, int64_t new_w);           // keep columns [0, new_w)
  Var PadWEdge(Var a, int64_t new_w);        // replicate last column up to new_w
  Var SliceH(Var a, int64_t h0, int64_t h1);  // keep rows [h0, h1)
  Var ConcatCh(Var a, Var b);                 // along channel dim of [B,C,H,W]
  Var TileH(Var a, int64_t h);                // [B,C,1,W] -> [B,C,H,W]
  Var GatherRows(Var table, const std::vector<int> &rows);  // [N,D] -> [B,D]

  // ---- linear algebra ----
  Var MatMul(Var a, Var b);                        // [M,K]x[K,N]
  Var Linear(Var x, Var w, Var b);                 // [B,Din]x[Din,Dout]+[Dout]
  Var Conv2d(Var x, Var w, Var b, int stride, int pad);  // [B,Ci,H,W], [Co,Ci,kh,kw]

  // ---- structured ----
  Var Upsample2(Var a);                      // nearest-neighbour x2 in H and W
  Var AvgPoolW(Var a, int factor);           // ceil division; averages real counts
  Var InstanceNorm(Var a, real eps = 1e-5);  // per (b,c) over HxW, no affine
  Var MulBands(Var x, Var g);     // [B,1,H,W] * gains [B,H]
  Var MulMap(Var x, Var m);       // [B,C,H,W] * map [B,1,H,W]
  Var MulCh(Var x, Var g);        // [B,C,H,W] * per-channel gains [B,C]
  Var AddCh(Var x, Var t);        // [B,C,H,W] + per-channel shifts [B,C]
  // Fixed linear warp along the band axis; per-sample source index/weight
  // pairs are captured as constants (they come from pitch, not parameters).
  Var BandWarp(Var x, const std::vector<std::vector<int>> &src_lo,
               const std::vector<std::vector<real>> &frac);
  Var BandSmooth(Var x, int radius);  // moving average along H, edge-normalized
  // out = (1 - w) * x + w * (pattern + m), where m is each column's max of x
  // over rows [0, peak_rows): blends a fixed pattern into x, vertically
  // shifted so it sits at the column's own peak level.  `w` and `pattern`
  // match x's shape ([B,1,H,W]) and are captured as constants; gradient
  // reaches x both through the kept portion and through the peak.
  Var PeakBlend(Var x, const Tensor &w, const Tensor &pattern, int peak_rows);

  // ---- reductions ----
  Var SumAll(Var a);
  Var MeanAll(Var a);
  Var SumH(Var a);  // [B,C,H,W] -> [B,C,1,W]
  Var SumW(Var a);  // [B,C,H,W] -> [B,C,H,1]
  Var SumHW(Var a); // [B,C,H,W] -> [B,C] (used for pooled heads)

 private:
  Var Push(Node n);
  Node &node(Var v) { return nodes_[static_cast<size_t>(v)]; }
  std::vector<Node> nodes_;
};

}  // namespace raso

#endif  // RASO_TENSOR_HPP_
