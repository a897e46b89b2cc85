// raso/tensor.cpp

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

#include "raso/tensor.hpp"

#include <Eigen/Core>

#include "raso/nn.hpp"

namespace raso {

using RowMat = Eigen::Matrix<real, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using CMapMat = Eigen::Map<const RowMat>;

Var Graph::Push(Node n) {
  nodes_.push_back(std::move(n));
  return static_cast<Var>(nodes_.size() - 1);
}

Var Graph::Leaf(Tensor t, bool needs_grad, std::string tag) {
  Node n;
  n.value = std::move(t);
  n.needs_grad = needs_grad;
  n.tag = std::move(tag);
  return Push(std::move(n));
}

Var Graph::ParamLeaf(nn::Param &p) {
  Node n;
  n.value = p.value;
  n.needs_grad = true;
  n.source = &p;
  n.tag = p.name;
  return Push(std::move(n));
}

Tensor &Graph::grad(Var v) {
  Node &n = node(v);
  if (!n.has_grad) {
    n.grad = Tensor(n.value.shape);
    n.has_grad = true;
  }
  return n.grad;
}

void Graph::Backward(Var root) {
  RASO_CHECK(val(root).numel() == 1, "Backward root must be a scalar");
  grad(root).data[0] = 1.0;
  for (Var i = root; i >= 0; i--) {
    Node &n = node(i);
    if (n.has_grad && n.backward) n.backward(*this, n);
  }
  for (auto &n : nodes_) {
    if (n.source != nullptr && n.has_grad) {
      auto &pg = n.source->grad.data;
      for (size_t k = 0; k < pg.size(); k++) pg[k] += n.grad.data[k];
    }
  }
}

// ---------------------------------------------------------------------------
// elementwise
// ---------------------------------------------------------------------------

#define RASO_SAME_SHAPE(a, b) \
  RASO_CHECK(val(a).shape == val(b).shape, "shape mismatch in elementwise op")

Var Graph::Add(Var a, Var b) {
  RASO_SAME_SHAPE(a, b);
  Node n;
  n.value = val(a);
  for (int64_t i = 0; i < n.value.numel(); i++) n.value.data[i] += val(b).data[i];
  n.needs_grad = node(a).needs_grad || node(b).needs_grad;
  if (n.needs_grad)
    n.backward = [a, b](Graph &g, Node &self) {
      if (g.needs_grad(a)) {
        auto &da = g.grad(a).data;
        for (size_t i = 0; i < da.size(); i++) da[i] += self.grad.data[i];
      }
      if (g.needs_grad(b)) {
        auto &db = g.grad(b).data;
        for (size_t i = 0; i < db.size(); i++) db[i] += self.grad.data[i];
      }
    };
  return Push(std::move(n));
}

Var Graph::Sub(Var a, Var b) {
  RASO_SAME_SHAPE(a, b);
  Node n;
  n.value = val(a);
  for (int64_t i = 0; i < n.value.numel(); i++) n.value.data[i] -= val(b).data[i];
  n.needs_grad = node(a).needs_grad || node(b).needs_grad;
  if (n.needs_grad)
    n.backward = [a, b](Graph &g, Node &self) {
      if (g.needs_grad(a)) {
        auto &da = g.grad(a).data;
        for (size_t i = 0; i < da.size(); i++) da[i] += self.grad.data[i];
      }
      if (g.needs_grad(b)) {
        auto &db = g.grad(b).data;
        for (size_t i = 0; i < db.size(); i++) db[i] -= self.grad.data[i];
      }
    };
  return Push(std::move(n));
}

Var Graph::Mul(Var a, Var b) {
  RASO_SAME_SHAPE(a, b);
  Node n;
  n.value = val(a);
  for (int64_t i = 0; i < n.value.numel(); i++) n.value.data[i] *= val(b).data[i];
  n.needs_grad = node(a).needs_grad || node(b).needs_grad;
  if (n.needs_grad)
    n.backward = [a, b](Graph &g, Node &self) {
      const auto &va = g.val(a).data;
      const auto &vb = g.val(b).data;
      if (g.needs_grad(a)) {
        auto &da = g.grad(a).data;
        for (size_t i = 0; i < da.size(); i++) da[i] += self.grad.data[i] * vb[i];
      }
      if (g.needs_grad(b)) {
        auto &db = g.grad(b).data;
        for (size_t i = 0; i < db.size(); i++) db[i] += self.grad.data[i] * va[i];
      }
    };
  return Push(std::move(n));
}

Var Graph::Div(Var a, Var b) {
  RASO_SAME_SHAPE(a, b);
  Node n;
  n.value = val(a);
  for (int64_t i = 0; i < n.value.numel(); i++) n.value.data[i] /= val(b).data[i];
  n.needs_grad = node(a).needs_grad || node(b).needs_grad;
  if (n.needs_grad)
    n.backward = [a, b](Graph &g, Node &self) {
      const auto &va = g.val(a).data;
      const auto &vb = g.val(b).data;
      if (g.needs_grad(a)) {
        auto &da = g.grad(a).data;
        for (size_t i = 0; i < da.size(); i++) da[i] += self.grad.data[i] / vb[i];
      }
      if (g.needs_grad(b)) {
        auto &db = g.grad(b).data;
        for (size_t i = 0; i < db.size(); i++)
          db[i] -= self.grad.data[i] * va[i] / (vb[i] * vb[i]);
      }
    };
  return Push(std::move(n));
}

Var Graph::AddScalar(Var a, real s) {
  Node n;
  n.value = val(a);
  for (auto &v : n.value.data) v += s;
  n.needs_grad = node(a).needs_grad;
  if (n.needs_grad)
    n.backward = [a](Graph &g, Node &self) {
      auto &da = g.grad(a).data;
      for (size_t i = 0; i < da.size(); i++) da[i] += self.grad.data[i];
    };
  return Push(std::move(n));
}

Var Graph::MulScalar(Var a, real s) {
  Node n;
  n.value = val(a);
  for (auto &v : n.value.data) v *= s;
  n.needs_grad = node(a).needs_grad;
  if (n.needs_grad)
    n.backward = [a, s](Graph &g, Node &self) {
      auto &da = g.grad(a).data;
      for (size_t i = 0; i < da.size(); i++) da[i] += s * self.grad.data[i];
    };
  return Push(std::move(n));
}

Var Graph::Exp(Var a) {
  Node n;
  n.value = val(a);
  for (auto &v : n.value.data) v = std::exp(v);
  n.needs_grad = node(a).needs_grad;
  if (n.needs_grad)
    n.backward = [a](Graph &g, Node &self) {
      auto &da = g.grad(a).data;
      for (size_t i = 0; i < da.size(); i++)
        da[i] += self.grad.data[i] * self.value.data[i];
    };
  return Push(std::move(n));
}

Var Graph::Log(Var a) {
  Node n;
  n.value = val(a);
  for (auto &v : n.value.data) v = std::log(v);
  n.needs_grad = node(a).needs_grad;
  if (n.needs_grad)
    n.backward = [a](Graph &g, Node &self) {
      const auto &va = g.val(a).data;
      auto &da = g.grad(a).data;
      for (size_t i = 0; i < da.size(); i++) da[i] += self.grad.data[i] / va[i];
    };
  return Push(std::move(n));
}

Var Graph::Abs(Var a) {
  Node n;
  n.value = val(a);
  for (auto &v : n.value.data) v = std::fabs(v);
  n.needs_grad = node(a).needs_grad;
  if (n.needs_grad)
    n.backward = [a](Graph &g, Node &self) {
      const auto &va = g.val(a).data;
      auto &da = g.grad(a).data;
      for (size_t i = 0; i < da.size(); i++)
        da[i] += self.grad.data[i] * (va[i] > 0 ? 1.0 : (va[i] < 0 ? -1.0 : 0.0));
    };
  return Push(std::move(n));
}

Var Graph::Square(Var a) {
  Node n;
  n.value = val(a);
  for (auto &v : n.value.data) v = v * v;
  n.needs_grad = node(a).needs_grad;
  if (n.needs_grad)
    n.backward = [a](Graph &g, Node &self) {
      const auto &va = g.val(a).data;
      auto &da = g.grad(a).data;
      for (size_t i = 0; i < da.size(); i++)
        da[i] += self.grad.data[i] * 2.0 * va[i];
    };
  return Push(std::move(n));
}

Var Graph::Sqrt(Var a) {
  Node n;
  n.value = val(a);
  for (auto &v : n.value.data) v = std::sqrt(v);
  n.needs_grad = node(a).needs_grad;
  if (n.needs_grad)
    n.backward = [a](Graph &g, Node &self) {
      auto &da = g.grad(a).data;
      for (size_t i = 0; i < da.size(); i++)
        da[i] += self.grad.data[i] * 0.5 / self.value.data[i];
    };
  return Push(std::move(n));
}

Var Graph::Sigmoid(Var a) {
  Node n;
  n.value = val(a);
  for (auto &v : n.value.data) v = 1.0 / (1.0 + std::exp(-v));
  n.needs_grad = node(a).needs_grad;
  if (n.needs_grad)
    n.backward = [a](Graph &g, Node &self) {
      auto &da = g.grad(a).data;
      for (size_t i = 0; i < da.size(); i++) {
        const real y = self.value.data[i];
        da[i] += self.grad.data[i] * y * (1.0 - y);
      }
    };
  return Push(std::move(n));
}

Var Graph::LeakyRelu(Var a, real slope) {
  Node n;
  n.value = val(a);
  for (auto &v : n.value.data) v = v > 0 ? v : slope * v;
  n.needs_grad = node(a).needs_grad;
  if (n.needs_grad)
    n.backward = [a, slope](Graph &g, Node &self) {
      const auto &va = g.val(a).data;
      auto &da = g.grad(a).data;
      for (size_t i = 0; i < da.size(); i++)
        da[i] += self.grad.data[i] * (va[i] > 0 ? 1.0 : slope);
    };
  return Push(std::move(n));
}

Var Graph::Clamp(Var a, real lo, real hi) {
  Node n;
  n.value = val(a);
  for (auto &v : n.value.data) v = v < lo ? lo : (v > hi ? hi : v);
  n.needs_grad = node(a).needs_grad;
  if (n.needs_grad)
    n.backward = [a, lo, hi](Graph &g, Node &self) {
      const auto &va = g.val(a).data;
      auto &da = g.grad(a).data;
      for (size_t i = 0; i < da.size(); i++)
        da[i] += self.grad.data[i] * (va[i] > lo && va[i] < hi ? 1.0 : 0.0);
    };
  return Push(std::move(n));
}

// ---------------------------------------------------------------------------
// shape / gather
// ---------------------------------------------------------------------------

Var Graph::Reshape(Var a, std::vector<int64_t> shape) {
  RASO_CHECK(Tensor::Numel(shape) == val(a).numel(), "Reshape numel mismatch");
  Node n;
  n.value = Tensor(std::move(shape), val(a).data);
  n.needs_grad = node(a).needs_grad;
  if (n.needs_grad)
    n.backward = [a](Graph &g, Node &self) {
      auto &da = g.grad(a).data;
      for (size_t i = 0; i < da.size(); i++) da[i] += self.grad.data[i];
    };
  return Push(std::move(n));
}

Var Graph::Transpose2d(Var a) {
  const Tensor &x = val(a);
  RASO_CHECK(x.rank() == 2, "Transpose2d expects a matrix");
  const int64_t M = x.dim(0), N = x.dim(1);
  Node n;
  n.value = Tensor({N, M});
  for (int64_t i = 0; i < M; i++)
    for (int64_t j = 0; j < N; j++) n.value.at2(j, i) = x.at2(i, j);
  n.needs_grad = node(a).needs_grad;
  if (n.needs_grad)
    n.backward = [a, M, N](Graph &g, Node &self) {
      Tensor &da = g.grad(a);
      for (int64_t i = 0; i < M; i++)
        for (int64_t j = 0; j < N; j++) da.at2(i, j) += self.grad.at2(j, i);
    };
  return Push(std::move(n));
}

Var Graph::CropW(Var a, int64_t new_w) {
  const Tensor &x = val(a);
  const int64_t B = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  RASO_CHECK(new_w >= 1 && new_w <= W, "CropW out of range");
  Node n;
  n.value = Tensor({B, C, H, new_w});
  for (int64_t b = 0; b < B; b++)
    for (int64_t c = 0; c < C; c++)
      for (int64_t h = 0; h < H; h++)
        for (int64_t w = 0; w < new_w; w++)
          n.value.at4(b, c, h, w) = x.at4(b, c, h, w);
  n.needs_grad = node(a).needs_grad;
  if (n.needs_grad)
    n.backward = [a, new_w](Graph &g, Node &self) {
      Tensor &da = g.grad(a);
      const int64_t B = da.dim(0), C = da.dim(1), H = da.dim(2);
      for (int64_t b = 0; b < B; b++)
        for (int64_t c = 0; c < C; c++)
          for (int64_t h = 0; h < H; h++)
            for (int64_t w = 0; w < new_w; w++)
              da.at4(b, c, h, w) += self.grad.at4(b, c, h, w);
    };
  return Push(std::move(n));
}

Var Graph::PadWEdge(Var a, int64_t new_w) {
  const Tensor &x = val(a);
  const int64_t B = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  RASO_CHECK(new_w >= W, "PadWEdge cannot shrink");
  Node n;
  n.value = Tensor({B, C, H, new_w});
  for (int64_t b = 0; b < B; b++)
    for (int64_t c = 0; c < C; c++)
      for (int64_t h = 0; h < H; h++)
        for (int64_t w = 0; w < new_w; w++)
          n.value.at4(b, c, h, w) = x.at4(b, c, h, std::min(w, W - 1));
  n.needs_grad = node(a).needs_grad;
  if (n.needs_grad)
    n.backward = [a, new_w](Graph &g, Node &self) {
      Tensor &da = g.grad(a);
      const int64_t B = da.dim(0), C = da.dim(1), H = da.dim(2), W = da.dim(3);
      for (int64_t b = 0; b < B; b++)
        for (int64_t c = 0; c < C; c++)
          for (int64_t h = 0; h < H; h++)
            for (int64_t w = 0; w < new_w; w++)
              da.at4(b, c, h, std::min(w, W - 1)) += self.grad.at4(b, c, h, w);
    };
  return Push(std::move(n));
}

Var Graph::SliceH(Var a, int64_t h0, int64_t h1) {
  const Tensor &x = val(a);
  const int64_t B = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  RASO_CHECK(h0 >= 0 && h1 <= H && h0 < h1, "SliceH out of range");
  Node n;
  n.value = Tensor({B, C, h1 - h0, W});
  for (int64_t b = 0; b < B; b++)
    for (int64_t c = 0; c < C; c++)
      for (int64_t h = h0; h < h1; h++)
        for (int64_t w = 0; w < W; w++)
          n.value.at4(b, c, h - h0, w) = x.at4(b, c, h, w);
  n.needs_grad = node(a).needs_grad;
  if (n.needs_grad)
    n.backward = [a, h0, h1](Graph &g, Node &self) {
      Tensor &da = g.grad(a);
      const int64_t B = da.dim(0), C = da.dim(1), W = da.dim(3);
      for (int64_t b = 0; b < B; b++)
        for (int64_t c = 0; c < C; c++)
          for (int64_t h = h0; h < h1; h++)
            for (int64_t w = 0; w < W; w++)
              da.at4(b, c, h, w) += self.grad.at4(b, c, h - h0, w);
    };
  return Push(std::move(n));
}

Var Graph::ConcatCh(Var a, Var b) {
  const Tensor &x = val(a), &y = val(b);
  RASO_CHECK(x.dim(0) == y.dim(0) && x.dim(2) == y.dim(2) && x.dim(3) == y.dim(3),
             "ConcatCh shape mismatch");
  const int64_t B = x.dim(0), Ca = x.dim(1), Cb = y.dim(1), H = x.dim(2), W = x.dim(3);
  Node n;
  n.value = Tensor({B, Ca + Cb, H, W});
  const int64_t plane = H * W;
  for (int64_t bb = 0; bb < B; bb++) {
    std::copy(x.data.begin() + bb * Ca * plane, x.data.begin() + (bb + 1) * Ca * plane,
              n.value.data.begin() + bb * (Ca + Cb) * plane);
    std::copy(y.data.begin() + bb * Cb * plane, y.data.begin() + (bb + 1) * Cb * plane,
              n.value.data.begin() + bb * (Ca + Cb) * plane + Ca * plane);
  }
  n.needs_grad = node(a).needs_grad || node(b).needs_grad;
  if (n.needs_grad)
    n.backward = [a, b, Ca, Cb, plane](Graph &g, Node &self) {
      const int64_t B = self.grad.dim(0);
      if (g.needs_grad(a)) {
        auto &da = g.grad(a).data;
        for (int64_t bb = 0; bb < B; bb++)
          for (int64_t i = 0; i < Ca * plane; i++)
            da[bb * Ca * plane + i] += self.grad.data[bb * (Ca + Cb) * plane + i];
      }
      if (g.needs_grad(b)) {
        auto &db = g.grad(b).data;
        for (int64_t bb = 0; bb < B; bb++)
          for (int64_t i = 0; i < Cb * plane; i++)
            db[bb * Cb * plane + i] +=
                self.grad.data[bb * (Ca + Cb) * plane + Ca * plane + i];
      }
    };
  return Push(std::move(n));
}

Var Graph::TileH(Var a, int64_t h_out) {
  const Tensor &x = val(a);
  RASO_CHECK(x.dim(2) == 1, "TileH expects H == 1");
  const int64_t B = x.dim(0), C = x.dim(1), W = x.dim(3);
  Node n;
  n.value = Tensor({B, C, h_out, W});
  for (int64_t b = 0; b < B; b++)
    for (int64_t c = 0; c < C; c++)
      for (int64_t h = 0; h < h_out; h++)
        for (int64_t w = 0; w < W; w++)
          n.value.at4(b, c, h, w) = x.at4(b, c, 0, w);
  n.needs_grad = node(a).needs_grad;
  if (n.needs_grad)
    n.backward = [a, h_out](Graph &g, Node &self) {
      Tensor &da = g.grad(a);
      const int64_t B = da.dim(0), C = da.dim(1), W = da.dim(3);
      for (int64_t b = 0; b < B; b++)
        for (int64_t c = 0; c < C; c++)
          for (int64_t h = 0; h < h_out; h++)
            for (int64_t w = 0; w < W; w++)
              da.at4(b, c, 0, w) += self.grad.at4(b, c, h, w);
    };
  return Push(std::move(n));
}

Var Graph::GatherRows(Var table, const std::vector<int> &rows) {
  const Tensor &t = val(table);
  RASO_CHECK(t.rank() == 2, "GatherRows expects a matrix");
  const int64_t D = t.dim(1);
  Node n;
  n.value = Tensor({static_cast<int64_t>(rows.size()), D});
  for (size_t i = 0; i < rows.size(); i++) {
    RASO_CHECK(rows[i] >= 0 && rows[i] < t.dim(0), "GatherRows index out of range");
    for (int64_t d = 0; d < D; d++)
      n.value.at2(static_cast<int64_t>(i), d) = t.at2(rows[i], d);
  }
  n.needs_grad = node(table).needs_grad;
  if (n.needs_grad)
    n.backward = [table, rows, D](Graph &g, Node &self) {
      Tensor &dt = g.grad(table);
      for (size_t i = 0; i < rows.size(); i++)
        for (int64_t d = 0; d < D; d++)
          dt.at2(rows[i], d) += self.grad.at2(static_cast<int64_t>(i), d);
    };
  return Push(std::move(n));
}

// ---------------------------------------------------------------------------
// linear algebra
// ---------------------------------------------------------------------------

Var Graph::MatMul(Var a, Var b) {
  const Tensor &x = val(a), &y = val(b);
  RASO_CHECK(x.rank() == 2 && y.rank() == 2 && x.dim(1) == y.dim(0),
             "MatMul shape mismatch");
  const int64_t M = x.dim(0), K = x.dim(1), N = y.dim(1);
  Node n;
  n.value = Tensor({M, N});
  MapMat(n.value.data.data(), M, N) =
      CMapMat(x.data.data(), M, K) * CMapMat(y.data.data(), K, N);
  n.needs_grad = node(a).needs_grad || node(b).needs_grad;
  if (n.needs_grad)
    n.backward = [a, b, M, K, N](Graph &g, Node &self) {
      CMapMat dy(self.grad.data.data(), M, N);
      if (g.needs_grad(a)) {
        MapMat da(g.grad(a).data.data(), M, K);
        da.noalias() += dy * CMapMat(g.val(b).data.data(), K, N).transpose();
      }
      if (g.needs_grad(b)) {
        MapMat db(g.grad(b).data.data(), K, N);
        db.noalias() += CMapMat(g.val(a).data.data(), M, K).transpose() * dy;
      }
    };
  return Push(std::move(n));
}

Var Graph::Linear(Var x, Var w, Var b) {
  const Tensor &vx = val(x), &vw = val(w), &vb = val(b);
  RASO_CHECK(vx.rank() == 2 && vw.rank() == 2 && vx.dim(1) == vw.dim(0) &&
                 vb.numel() == vw.dim(1),
             "Linear shape mismatch");
  const int64_t B = vx.dim(0), Din = vx.dim(1), Dout = vw.dim(1);
  Node n;
  n.value = Tensor({B, Dout});
  MapMat out(n.value.data.data(), B, Dout);
  out.noalias() = CMapMat(vx.data.data(), B, Din) * CMapMat(vw.data.data(), Din, Dout);
  for (int64_t i = 0; i < B; i++)
    for (int64_t j = 0; j < Dout; j++) n.value.at2(i, j) += vb.data[static_cast<size_t>(j)];
  n.needs_grad = node(x).needs_grad || node(w).needs_grad || node(b).needs_grad;
  if (n.needs_grad)
    n.backward = [x, w, b, B, Din, Dout](Graph &g, Node &self) {
      CMapMat dy(self.grad.data.data(), B, Dout);
      if (g.needs_grad(x)) {
        MapMat dx(g.grad(x).data.data(), B, Din);
        dx.noalias() += dy * CMapMat(g.val(w).data.data(), Din, Dout).transpose();
      }
      if (g.needs_grad(w)) {
        MapMat dw(g.grad(w).data.data(), Din, Dout);
        dw.noalias() += CMapMat(g.val(x).data.data(), B, Din).transpose() * dy;
      }
      if (g.needs_grad(b)) {
        auto &db = g.grad(b).data;
        for (int64_t i = 0; i < B; i++)
          for (int64_t j = 0; j < Dout; j++) db[static_cast<size_t>(j)] += dy(i, j);
      }
    };
  return Push(std::move(n));
}

namespace {

void Im2Col(const Tensor &x, int64_t b, int kh, int kw, int stride, int pad,
            int64_t Ho, int64_t Wo, RowMat *col) {
  const int64_t C = x.dim(1), H = x.dim(2), W = x.dim(3);
  col->setZero();
  for (int64_t c = 0; c < C; c++) {
    for (int ki = 0; ki < kh; ki++) {
      for (int kj = 0; kj < kw; kj++) {
        const int64_t row = (c * kh + ki) * kw + kj;
        for (int64_t ho = 0; ho < Ho; ho++) {
          const int64_t hi = ho * stride - pad + ki;
          if (hi < 0 || hi >= H) continue;
          for (int64_t wo = 0; wo < Wo; wo++) {
            const int64_t wi = wo * stride - pad + kj;
            if (wi < 0 || wi >= W) continue;
            (*col)(row, ho * Wo + wo) = x.at4(b, c, hi, wi);
          }
        }
      }
    }
  }
}

void Col2ImAdd(const RowMat &col, int64_t b, int kh, int kw, int stride, int pad,
               int64_t Ho, int64_t Wo, Tensor *dx) {
  const int64_t C = dx->dim(1), H = dx->dim(2), W = dx->dim(3);
  for (int64_t c = 0; c < C; c++) {
    for (int ki = 0; ki < kh; ki++) {
      for (int kj = 0; kj < kw; kj++) {
        const int64_t row = (c * kh + ki) * kw + kj;
        for (int64_t ho = 0; ho < Ho; ho++) {
          const int64_t hi = ho * stride - pad + ki;
          if (hi < 0 || hi >= H) continue;
          for (int64_t wo = 0; wo < Wo; wo++) {
            const int64_t wi = wo * stride - pad + kj;
            if (wi < 0 || wi >= W) continue;
            dx->at4(b, c, hi, wi) += col(row, ho * Wo + wo);
          }
        }
      }
    }
  }
}

}  // namespace

Var Graph::Conv2d(Var x, Var w, Var b, int stride, int pad) {
  const Tensor &vx = val(x), &vw = val(w), &vb = val(b);
  RASO_CHECK(vx.rank() == 4 && vw.rank() == 4 && vx.dim(1) == vw.dim(1),
             "Conv2d shape mismatch");
  const int64_t B = vx.dim(0), Ci = vx.dim(1), H = vx.dim(2), W = vx.dim(3);
  const int64_t Co = vw.dim(0);
  const int kh = static_cast<int>(vw.dim(2)), kw = static_cast<int>(vw.dim(3));
  RASO_CHECK(vb.numel() == Co, "Conv2d bias size mismatch");
  const int64_t Ho = (H + 2 * pad - kh) / stride + 1;
  const int64_t Wo = (W + 2 * pad - kw) / stride + 1;
  RASO_CHECK(Ho >= 1 && Wo >= 1, "Conv2d output collapsed to zero");

  Node n;
  n.value = Tensor({B, Co, Ho, Wo});
  const int64_t K = Ci * kh * kw;
  CMapMat wm(vw.data.data(), Co, K);
  RowMat col(K, Ho * Wo);
  for (int64_t bb = 0; bb < B; bb++) {
    Im2Col(vx, bb, kh, kw, stride, pad, Ho, Wo, &col);
    MapMat out(n.value.data.data() + bb * Co * Ho * Wo, Co, Ho * Wo);
    out.noalias() = wm * col;
    for (int64_t c = 0; c < Co; c++)
      out.row(c).array() += vb.data[static_cast<size_t>(c)];
  }
  n.needs_grad = node(x).needs_grad || node(w).needs_grad || node(b).needs_grad;
  if (n.needs_grad)
    n.backward = [x, w, b, stride, pad, kh, kw, Ho, Wo, K](Graph &g, Node &self) {
      const Tensor &vx = g.val(x);
      const Tensor &vw = g.val(w);
      const int64_t B = vx.dim(0), Co = vw.dim(0);
      const bool need_x = g.needs_grad(x);
      const bool need_w = g.needs_grad(w);
      const bool need_b = g.needs_grad(b);
      RowMat col(K, Ho * Wo);
      RowMat dcol(K, Ho * Wo);
      CMapMat wm(vw.data.data(), Co, K);
      for (int64_t bb = 0; bb < B; bb++) {
        CMapMat dy(self.grad.data.data() + bb * Co * Ho * Wo, Co, Ho * Wo);
        if (need_w || need_x) Im2Col(vx, bb, kh, kw, stride, pad, Ho, Wo, &col);
        if (need_w) {
          MapMat dw(g.grad(w).data.data(), Co, K);
          dw.noalias() += dy * col.transpose();
        }
        if (need_b) {
          auto &db = g.grad(b).data;
          for (int64_t c = 0; c < Co; c++) db[static_cast<size_t>(c)] += dy.row(c).sum();
        }
        if (need_x) {
          dcol.noalias() = wm.transpose() * dy;
          Col2ImAdd(dcol, bb, kh, kw, stride, pad, Ho, Wo, &g.grad(x));
        }
      }
    };
  return Push(std::move(n));
}

// ---------------------------------------------------------------------------
// structured ops
// ---------------------------------------------------------------------------

Var Graph::Upsample2(Var a) {
  const Tensor &x = val(a);
  const int64_t B = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  Node n;
  n.value = Tensor({B, C, H * 2, W * 2});
  for (int64_t b = 0; b < B; b++)
    for (int64_t c = 0; c < C; c++)
      for (int64_t h = 0; h < H; h++)
        for (int64_t w = 0; w < W; w++) {
          const real v = x.at4(b, c, h, w);
          n.value.at4(b, c, 2 * h, 2 * w) = v;
          n.value.at4(b, c, 2 * h, 2 * w + 1) = v;
          n.value.at4(b, c, 2 * h + 1, 2 * w) = v;
          n.value.at4(b, c, 2 * h + 1, 2 * w + 1) = v;
        }
  n.needs_grad = node(a).needs_grad;
  if (n.needs_grad)
    n.backward = [a](Graph &g, Node &self) {
      Tensor &da = g.grad(a);
      const int64_t B = da.dim(0), C = da.dim(1), H = da.dim(2), W = da.dim(3);
      for (int64_t b = 0; b < B; b++)
        for (int64_t c = 0; c < C; c++)
          for (int64_t h = 0; h < H; h++)
            for (int64_t w = 0; w < W; w++)
              da.at4(b, c, h, w) += self.grad.at4(b, c, 2 * h, 2 * w) +
                                    self.grad.at4(b, c, 2 * h, 2 * w + 1) +
                                    self.grad.at4(b, c, 2 * h + 1, 2 * w) +
                                    self.grad.at4(b, c, 2 * h + 1, 2 * w + 1);
    };
  return Push(std::move(n));
}

Var Graph::AvgPoolW(Var a, int factor) {
  const Tensor &x = val(a);
  const int64_t B = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  const int64_t Wo = (W + factor - 1) / factor;
  Node n;
  n.value = Tensor({B, C, H, Wo});
  for (int64_t b = 0; b < B; b++)
    for (int64_t c = 0; c < C; c++)
      for (int64_t h = 0; h < H; h++)
        for (int64_t wo = 0; wo < Wo; wo++) {
          const int64_t w0 = wo * factor;
          const int64_t w1 = std::min(W, w0 + factor);
          real s = 0;
          for (int64_t w = w0; w < w1; w++) s += x.at4(b, c, h, w);
          n.value.at4(b, c, h, wo) = s / static_cast<real>(w1 - w0);
        }
  n.needs_grad = node(a).needs_grad;
  if (n.needs_grad)
    n.backward = [a, factor, Wo](Graph &g, Node &self) {
      Tensor &da = g.grad(a);
      const int64_t B = da.dim(0), C = da.dim(1), H = da.dim(2), W = da.dim(3);
      for (int64_t b = 0; b < B; b++)
        for (int64_t c = 0; c < C; c++)
          for (int64_t h = 0; h < H; h++)
            for (int64_t wo = 0; wo < Wo; wo++) {
              const int64_t w0 = wo * factor;
              const int64_t w1 = std::min(W, w0 + factor);
              const real gshare =
                  self.grad.at4(b, c, h, wo) / static_cast<real>(w1 - w0);
              for (int64_t w = w0; w < w1; w++) da.at4(b, c, h, w) += gshare;
            }
    };
  return Push(std::move(n));
}

Var Graph::InstanceNorm(Var a, real eps) {
  const Tensor &x = val(a);
  const int64_t B = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  const int64_t N = H * W;
  Node n;
  n.value = Tensor(x.shape);
  std::vector<real> inv_sigma(static_cast<size_t>(B * C));
  for (int64_t b = 0; b < B; b++)
    for (int64_t c = 0; c < C; c++) {
      const real *src = x.data.data() + (b * C + c) * N;
      real mu = 0;
      for (int64_t i = 0; i < N; i++) mu += src[i];
      mu /= static_cast<real>(N);
      real var = 0;
      for (int64_t i = 0; i < N; i++) var += (src[i] - mu) * (src[i] - mu);
      var /= static_cast<real>(N);
      const real is = 1.0 / std::sqrt(var + eps);
      inv_sigma[static_cast<size_t>(b * C + c)] = is;
      real *dst = n.value.data.data() + (b * C + c) * N;
      for (int64_t i = 0; i < N; i++) dst[i] = (src[i] - mu) * is;
    }
  n.needs_grad = node(a).needs_grad;
  if (n.needs_grad)
    n.backward = [a, inv_sigma, N](Graph &g, Node &self) {
      Tensor &da = g.grad(a);
      const int64_t B = da.dim(0), C = da.dim(1);
      for (int64_t b = 0; b < B; b++)
        for (int64_t c = 0; c < C; c++) {
          const real *dy = self.grad.data.data() + (b * C + c) * N;
          const real *y = self.value.data.data() + (b * C + c) * N;
          real *dx = da.data.data() + (b * C + c) * N;
          real mean_dy = 0, mean_dyy = 0;
          for (int64_t i = 0; i < N; i++) {
            mean_dy += dy[i];
            mean_dyy += dy[i] * y[i];
          }
          mean_dy /= static_cast<real>(N);
          mean_dyy /= static_cast<real>(N);
          const real is = inv_sigma[static_cast<size_t>(b * C + c)];
          for (int64_t i = 0; i < N; i++)
            dx[i] += is * (dy[i] - mean_dy - y[i] * mean_dyy);
        }
    };
  return Push(std::move(n));
}

Var Graph::MulBands(Var x, Var gains) {
  const Tensor &vx = val(x), &vg = val(gains);
  RASO_CHECK(vx.dim(1) == 1 && vg.rank() == 2 && vg.dim(0) == vx.dim(0) &&
                 vg.dim(1) == vx.dim(2),
             "MulBands shape mismatch");
  const int64_t B = vx.dim(0), H = vx.dim(2), W = vx.dim(3);
  Node n;
  n.value = Tensor(vx.shape);
  for (int64_t b = 0; b < B; b++)
    for (int64_t h = 0; h < H; h++) {
      const real gg = vg.at2(b, h);
      for (int64_t w = 0; w < W; w++)
        n.value.at4(b, 0, h, w) = vx.at4(b, 0, h, w) * gg;
    }
  n.needs_grad = node(x).needs_grad || node(gains).needs_grad;
  if (n.needs_grad)
    n.backward = [x, gains](Graph &g, Node &self) {
      const Tensor &vx = g.val(x);
      const Tensor &vg = g.val(gains);
      const int64_t B = vx.dim(0), H = vx.dim(2), W = vx.dim(3);
      if (g.needs_grad(x)) {
        Tensor &dx = g.grad(x);
        for (int64_t b = 0; b < B; b++)
          for (int64_t h = 0; h < H; h++) {
            const real gg = vg.at2(b, h);
            for (int64_t w = 0; w < W; w++)
              dx.at4(b, 0, h, w) += self.grad.at4(b, 0, h, w) * gg;
          }
      }
      if (g.needs_grad(gains)) {
        Tensor &dg = g.grad(gains);
        for (int64_t b = 0; b < B; b++)
          for (int64_t h = 0; h < H; h++) {
            real s = 0;
            for (int64_t w = 0; w < W; w++)
              s += self.grad.at4(b, 0, h, w) * vx.at4(b, 0, h, w);
            dg.at2(b, h) += s;
          }
      }
    };
  return Push(std::move(n));
}

Var Graph::MulMap(Var x, Var m) {
  const Tensor &vx = val(x), &vm = val(m);
  RASO_CHECK(vm.dim(0) == vx.dim(0) && vm.dim(1) == 1 && vm.dim(2) == vx.dim(2) &&
                 vm.dim(3) == vx.dim(3),
             "MulMap shape mismatch");
  const int64_t B = vx.dim(0), C = vx.dim(1), H = vx.dim(2), W = vx.dim(3);
  Node n;
  n.value = Tensor(vx.shape);
  for (int64_t b = 0; b < B; b++)
    for (int64_t c = 0; c < C; c++)
      for (int64_t h = 0; h < H; h++)
        for (int64_t w = 0; w < W; w++)
          n.value.at4(b, c, h, w) = vx.at4(b, c, h, w) * vm.at4(b, 0, h, w);
  n.needs_grad = node(x).needs_grad || node(m).needs_grad;
  if (n.needs_grad)
    n.backward = [x, m](Graph &g, Node &self) {
      const Tensor &vx = g.val(x);
      const Tensor &vm = g.val(m);
      const int64_t B = vx.dim(0), C = vx.dim(1), H = vx.dim(2), W = vx.dim(3);
      if (g.needs_grad(x)) {
        Tensor &dx = g.grad(x);
        for (int64_t b = 0; b < B; b++)
          for (int64_t c = 0; c < C; c++)
            for (int64_t h = 0; h < H; h++)
              for (int64_t w = 0; w < W; w++)
                dx.at4(b, c, h, w) += self.grad.at4(b, c, h, w) * vm.at4(b, 0, h, w);
      }
      if (g.needs_grad(m)) {
        Tensor &dm = g.grad(m);
        for (int64_t b = 0; b < B; b++)
          for (int64_t h = 0; h < H; h++)
            for (int64_t w = 0; w < W; w++) {
              real s = 0;
              for (int64_t c = 0; c < C; c++)
                s += self.grad.at4(b, c, h, w) * vx.at4(b, c, h, w);
              dm.at4(b, 0, h, w) += s;
            }
      }
    };
  return Push(std::move(n));
}

Var Graph::MulCh(Var x, Var g) {
  const Tensor &vx = val(x), &vg = val(g);
  RASO_CHECK(vg.rank() == 2 && vg.dim(0) == vx.dim(0) && vg.dim(1) == vx.dim(1),
             "MulCh shape mismatch");
  const int64_t B = vx.dim(0), C = vx.dim(1), N = vx.dim(2) * vx.dim(3);
  Node n;
  n.value = Tensor(vx.shape);
  for (int64_t b = 0; b < B; b++)
    for (int64_t c = 0; c < C; c++) {
      const real gg = vg.at2(b, c);
      const real *src = vx.data.data() + (b * C + c) * N;
      real *dst = n.value.data.data() + (b * C + c) * N;
      for (int64_t i = 0; i < N; i++) dst[i] = src[i] * gg;
    }
  n.needs_grad = node(x).needs_grad || node(g).needs_grad;
  if (n.needs_grad)
    n.backward = [x, g, N](Graph &gr, Node &self) {
      const Tensor &vx = gr.val(x);
      const Tensor &vg = gr.val(g);
      const int64_t B = vx.dim(0), C = vx.dim(1);
      if (gr.needs_grad(x)) {
        Tensor &dx = gr.grad(x);
        for (int64_t b = 0; b < B; b++)
          for (int64_t c = 0; c < C; c++) {
            const real gg = vg.at2(b, c);
            const real *dy = self.grad.data.data() + (b * C + c) * N;
            real *d = dx.data.data() + (b * C + c) * N;
            for (int64_t i = 0; i < N; i++) d[i] += dy[i] * gg;
          }
      }
      if (gr.needs_grad(g)) {
        Tensor &dg = gr.grad(g);
        for (int64_t b = 0; b < B; b++)
          for (int64_t c = 0; c < C; c++) {
            const real *dy = self.grad.data.data() + (b * C + c) * N;
            const real *src = vx.data.data() + (b * C + c) * N;
            real s = 0;
            for (int64_t i = 0; i < N; i++) s += dy[i] * src[i];
            dg.at2(b, c) += s;
          }
      }
    };
  return Push(std::move(n));
}

Var Graph::AddCh(Var x, Var t) {
  const Tensor &vx = val(x), &vt = val(t);
  RASO_CHECK(vt.rank() == 2 && vt.dim(0) == vx.dim(0) && vt.dim(1) == vx.dim(1),
             "AddCh shape mismatch");
  const int64_t B = vx.dim(0), C = vx.dim(1), N = vx.dim(2) * vx.dim(3);
  Node n;
  n.value = Tensor(vx.shape);
  for (int64_t b = 0; b < B; b++)
    for (int64_t c = 0; c < C; c++) {
      const real tt = vt.at2(b, c);
      const real *src = vx.data.data() + (b * C + c) * N;
      real *dst = n.value.data.data() + (b * C + c) * N;
      for (int64_t i = 0; i < N; i++) dst[i] = src[i] + tt;
    }
  n.needs_grad = node(x).needs_grad || node(t).needs_grad;
  if (n.needs_grad)
    n.backward = [x, t, N](Graph &gr, Node &self) {
      const int64_t B = self.grad.dim(0), C = self.grad.dim(1);
      if (gr.needs_grad(x)) {
        auto &dx = gr.grad(x).data;
        for (size_t i = 0; i < dx.size(); i++) dx[i] += self.grad.data[i];
      }
      if (gr.needs_grad(t)) {
        Tensor &dt = gr.grad(t);
        for (int64_t b = 0; b < B; b++)
          for (int64_t c = 0; c < C; c++) {
            const real *dy = self.grad.data.data() + (b * C + c) * N;
            real s = 0;
            for (int64_t i = 0; i < N; i++) s += dy[i];
            dt.at2(b, c) += s;
          }
      }
    };
  return Push(std::move(n));
}

Var Graph::BandWarp(Var x, const std::vector<std::vector<int>> &src_lo,
                    const std::vector<std::vector<real>> &frac) {
  const Tensor &vx = val(x);
  const int64_t B = vx.dim(0), H = vx.dim(2), W = vx.dim(3);
  RASO_CHECK(vx.dim(1) == 1, "BandWarp expects single channel");
  RASO_CHECK(static_cast<int64_t>(src_lo.size()) == B &&
                 static_cast<int64_t>(frac.size()) == B,
             "BandWarp coefficient batch mismatch");
  Node n;
  n.value = Tensor(vx.shape);
  for (int64_t b = 0; b < B; b++) {
    RASO_CHECK(static_cast<int64_t>(src_lo[b].size()) == H, "BandWarp rows mismatch");
    for (int64_t o = 0; o < H; o++) {
      const int lo = src_lo[b][static_cast<size_t>(o)];
      const real f = frac[b][static_cast<size_t>(o)];
      for (int64_t w = 0; w < W; w++) {
        real v = (1.0 - f) * vx.at4(b, 0, lo, w);
        if (lo + 1 < H) v += f * vx.at4(b, 0, lo + 1, w);
        else v += f * vx.at4(b, 0, lo, w);
        n.value.at4(b, 0, o, w) = v;
      }
    }
  }
  n.needs_grad = node(x).needs_grad;
  if (n.needs_grad)
    n.backward = [x, src_lo, frac](Graph &g, Node &self) {
      Tensor &dx = g.grad(x);
      const int64_t B = dx.dim(0), H = dx.dim(2), W = dx.dim(3);
      for (int64_t b = 0; b < B; b++)
        for (int64_t o = 0; o < H; o++) {
          const int lo = src_lo[b][static_cast<size_t>(o)];
          const real f = frac[b][static_cast<size_t>(o)];
          for (int64_t w = 0; w < W; w++) {
            const real gv = self.grad.at4(b, 0, o, w);
            dx.at4(b, 0, lo, w) += (1.0 - f) * gv;
            if (lo + 1 < H) dx.at4(b, 0, lo + 1, w) += f * gv;
            else dx.at4(b, 0, lo, w) += f * gv;
          }
        }
    };
  return Push(std::move(n));
}

Var Graph::BandSmooth(Var x, int radius) {
  const Tensor &vx = val(x);
  const int64_t B = vx.dim(0), C = vx.dim(1), H = vx.dim(2), W = vx.dim(3);
  Node n;
  n.value = Tensor(vx.shape);
  for (int64_t b = 0; b < B; b++)
    for (int64_t c = 0; c < C; c++)
      for (int64_t h = 0; h < H; h++) {
        const int64_t h0 = std::max<int64_t>(0, h - radius);
        const int64_t h1 = std::min<int64_t>(H - 1, h + radius);
        const real inv = 1.0 / static_cast<real>(h1 - h0 + 1);
        for (int64_t w = 0; w < W; w++) {
          real s = 0;
          for (int64_t hh = h0; hh <= h1; hh++) s += vx.at4(b, c, hh, w);
          n.value.at4(b, c, h, w) = s * inv;
        }
      }
  n.needs_grad = node(x).needs_grad;
  if (n.needs_grad)
    n.backward = [x, radius](Graph &g, Node &self) {
      Tensor &dx = g.grad(x);
      const int64_t B = dx.dim(0), C = dx.dim(1), H = dx.dim(2), W = dx.dim(3);
      for (int64_t b = 0; b < B; b++)
        for (int64_t c = 0; c < C; c++)
          for (int64_t h = 0; h < H; h++) {
            const int64_t h0 = std::max<int64_t>(0, h - radius);
            const int64_t h1 = std::min<int64_t>(H - 1, h + radius);
            const real inv = 1.0 / static_cast<real>(h1 - h0 + 1);
            for (int64_t w = 0; w < W; w++) {
              const real gv = self.grad.at4(b, c, h, w) * inv;
              for (int64_t hh = h0; hh <= h1; hh++) dx.at4(b, c, hh, w) += gv;
            }
          }
    };
  return Push(std::move(n));
}

Var Graph::PeakBlend(Var x, const Tensor &w, const Tensor &pattern,
                     int peak_rows) {
  const Tensor &vx = val(x);
  const int64_t B = vx.dim(0), H = vx.dim(2), W = vx.dim(3);
  RASO_CHECK(vx.dim(1) == 1, "PeakBlend expects single channel");
  RASO_CHECK(w.shape == vx.shape && pattern.shape == vx.shape,
             "PeakBlend weight and pattern must match the input shape");
  RASO_CHECK(peak_rows >= 1 && peak_rows <= H,
             "PeakBlend peak window must cover at least one row");

  // One peak value and its row per column; the row is reused in backward.
  std::vector<int> arg(static_cast<size_t>(B * W));
  Node n;
  n.value = Tensor(vx.shape);
  for (int64_t b = 0; b < B; b++)
    for (int64_t t = 0; t < W; t++) {
      int am = 0;
      real m = vx.at4(b, 0, 0, t);
      for (int64_t h = 1; h < peak_rows; h++)
        if (vx.at4(b, 0, h, t) > m) {
          m = vx.at4(b, 0, h, t);
          am = static_cast<int>(h);
        }
      arg[static_cast<size_t>(b * W + t)] = am;
      for (int64_t h = 0; h < H; h++) {
        const real wv = w.at4(b, 0, h, t);
        n.value.at4(b, 0, h, t) =
            (1.0 - wv) * vx.at4(b, 0, h, t) + wv * (pattern.at4(b, 0, h, t) + m);
      }
    }
  n.needs_grad = node(x).needs_grad;
  if (n.needs_grad)
    n.backward = [x, w, arg](Graph &g, Node &self) {
      Tensor &dx = g.grad(x);
      const int64_t B = dx.dim(0), H = dx.dim(2), W = dx.dim(3);
      for (int64_t b = 0; b < B; b++)
        for (int64_t t = 0; t < W; t++) {
          real through_peak = 0.0;
          for (int64_t h = 0; h < H; h++) {
            const real wv = w.at4(b, 0, h, t);
            const real gv = self.grad.at4(b, 0, h, t);
            dx.at4(b, 0, h, t) += (1.0 - wv) * gv;
            through_peak += wv * gv;
          }
          dx.at4(b, 0, arg[static_cast<size_t>(b * W + t)], t) += through_peak;
        }
    };
  return Push(std::move(n));
}

// ---------------------------------------------------------------------------
// reductions
// ---------------------------------------------------------------------------

Var Graph::SumAll(Var a) {
  Node n;
  real s = 0;
  for (real v : val(a).data) s += v;
  n.value = Tensor::Scalar(s);
  n.needs_grad = node(a).needs_grad;
  if (n.needs_grad)
    n.backward = [a](Graph &g, Node &self) {
      auto &da = g.grad(a).data;
      const real gv = self.grad.data[0];
      for (auto &v : da) v += gv;
    };
  return Push(std::move(n));
}

Var Graph::MeanAll(Var a) {
  const real inv = 1.0 / static_cast<real>(val(a).numel());
  Node n;
  real s = 0;
  for (real v : val(a).data) s += v;
  n.value = Tensor::Scalar(s * inv);
  n.needs_grad = node(a).needs_grad;
  if (n.needs_grad)
    n.backward = [a, inv](Graph &g, Node &self) {
      auto &da = g.grad(a).data;
      const real gv = self.grad.data[0] * inv;
      for (auto &v : da) v += gv;
    };
  return Push(std::move(n));
}

Var Graph::SumH(Var a) {
  const Tensor &x = val(a);
  const int64_t B = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  Node n;
  n.value = Tensor({B, C, 1, W});
  for (int64_t b = 0; b < B; b++)
    for (int64_t c = 0; c < C; c++)
      for (int64_t h = 0; h < H; h++)
        for (int64_t w = 0; w < W; w++)
          n.value.at4(b, c, 0, w) += x.at4(b, c, h, w);
  n.needs_grad = node(a).needs_grad;
  if (n.needs_grad)
    n.backward = [a](Graph &g, Node &self) {
      Tensor &da = g.grad(a);
      const int64_t B = da.dim(0), C = da.dim(1), H = da.dim(2), W = da.dim(3);
      for (int64_t b = 0; b < B; b++)
        for (int64_t c = 0; c < C; c++)
          for (int64_t h = 0; h < H; h++)
            for (int64_t w = 0; w < W; w++)
              da.at4(b, c, h, w) += self.grad.at4(b, c, 0, w);
    };
  return Push(std::move(n));
}

Var Graph::SumW(Var a) {
  const Tensor &x = val(a);
  const int64_t B = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  Node n;
  n.value = Tensor({B, C, H, 1});
  for (int64_t b = 0; b < B; b++)
    for (int64_t c = 0; c < C; c++)
      for (int64_t h = 0; h < H; h++)
        for (int64_t w = 0; w < W; w++)
          n.value.at4(b, c, h, 0) += x.at4(b, c, h, w);
  n.needs_grad = node(a).needs_grad;
  if (n.needs_grad)
    n.backward = [a](Graph &g, Node &self) {
      Tensor &da = g.grad(a);
      const int64_t B = da.dim(0), C = da.dim(1), H = da.dim(2), W = da.dim(3);
      for (int64_t b = 0; b < B; b++)
        for (int64_t c = 0; c < C; c++)
          for (int64_t h = 0; h < H; h++)
            for (int64_t w = 0; w < W; w++)
              da.at4(b, c, h, w) += self.grad.at4(b, c, h, 0);
    };
  return Push(std::move(n));
}

Var Graph::SumHW(Var a) {
  const Tensor &x = val(a);
  const int64_t B = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  Node n;
  n.value = Tensor({B, C});
  for (int64_t b = 0; b < B; b++)
    for (int64_t c = 0; c < C; c++) {
      real s = 0;
      for (int64_t h = 0; h < H; h++)
        for (int64_t w = 0; w < W; w++) s += x.at4(b, c, h, w);
      n.value.at2(b, c) = s;
    }
  n.needs_grad = node(a).needs_grad;
  if (n.needs_grad)
    n.backward = [a](Graph &g, Node &self) {
      Tensor &da = g.grad(a);
      const int64_t B = da.dim(0), C = da.dim(1), H = da.dim(2), W = da.dim(3);
      for (int64_t b = 0; b < B; b++)
        for (int64_t c = 0; c < C; c++) {
          const real gv = self.grad.at2(b, c);
          for (int64_t h = 0; h < H; h++)
            for (int64_t w = 0; w < W; w++) da.at4(b, c, h, w) += gv;
        }
    };
  return Push(std::move(n));
}

}  // namespace raso
