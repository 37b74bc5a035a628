#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <utility>
#include <vector>

#include "protoseg/core/autodiff.hpp"

namespace protoseg::ad {

template <typename T>
using MatMap = Eigen::Map<Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
template <typename T>
using ConstMatMap =
    Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

// SAME-padding geometry: output = ceil(in / stride), padding split with the
// extra pixel at the bottom/right.
struct ConvGeom {
  int out_h, out_w, pad_top, pad_left;
};

inline ConvGeom same_conv_geom(int in_h, int in_w, int k, int stride) {
  auto one = [&](int in) {
    int out = (in + stride - 1) / stride;
    int total = std::max(0, (out - 1) * stride + k - in);
    return std::pair<int, int>(out, total / 2);
  };
  auto [oh, pt] = one(in_h);
  auto [ow, pl] = one(in_w);
  return {oh, ow, pt, pl};
}

namespace detail {

template <typename T>
void im2col(const Tensor<T>& x, int k, int stride, const ConvGeom& g, Tensor<T>& col) {
  const int c_in = x.dim(0), in_h = x.dim(1), in_w = x.dim(2);
  const int ohw = g.out_h * g.out_w;
  T* out = col.data();
  for (int c = 0; c < c_in; ++c)
    for (int ky = 0; ky < k; ++ky)
      for (int kx = 0; kx < k; ++kx) {
        const T* plane = x.data() + size_t(c) * in_h * in_w;
        for (int oy = 0; oy < g.out_h; ++oy) {
          int y = oy * stride - g.pad_top + ky;
          if (y < 0 || y >= in_h) {
            std::fill(out, out + g.out_w, T(0));
            out += g.out_w;
            continue;
          }
          const T* row = plane + size_t(y) * in_w;
          int x0 = -g.pad_left + kx;
          for (int ox = 0; ox < g.out_w; ++ox) {
            int xx = ox * stride + x0;
            *out++ = (xx >= 0 && xx < in_w) ? row[xx] : T(0);
          }
        }
      }
  (void)ohw;
}

template <typename T>
void col2im_add(const Tensor<T>& col, int k, int stride, const ConvGeom& g, Tensor<T>& dx) {
  const int c_in = dx.dim(0), in_h = dx.dim(1), in_w = dx.dim(2);
  const T* in = col.data();
  for (int c = 0; c < c_in; ++c)
    for (int ky = 0; ky < k; ++ky)
      for (int kx = 0; kx < k; ++kx) {
        T* plane = dx.data() + size_t(c) * in_h * in_w;
        for (int oy = 0; oy < g.out_h; ++oy) {
          int y = oy * stride - g.pad_top + ky;
          if (y < 0 || y >= in_h) {
            in += g.out_w;
            continue;
          }
          T* row = plane + size_t(y) * in_w;
          int x0 = -g.pad_left + kx;
          for (int ox = 0; ox < g.out_w; ++ox) {
            int xx = ox * stride + x0;
            if (xx >= 0 && xx < in_w) row[xx] += in[ox];
          }
          in += g.out_w;
        }
      }
}

}  // namespace detail

// 2-D convolution, SAME padding. x:[Cin,H,W] w:[Cout,Cin,k,k] b:[Cout].
template <typename T>
Var<T> conv2d(const Var<T>& x, const Var<T>& w, const Var<T>& b, int stride) {
  const int c_in = x->value.dim(0), in_h = x->value.dim(1), in_w = x->value.dim(2);
  const int c_out = w->value.dim(0), k = w->value.dim(2);
  if (w->value.dim(1) != c_in)
    throw ValidationError("conv2d: weight expects " + std::to_string(w->value.dim(1)) +
                          " input channels, got " + std::to_string(c_in));
  ConvGeom g = same_conv_geom(in_h, in_w, k, stride);
  const int ck = c_in * k * k, ohw = g.out_h * g.out_w;

  auto col = std::make_shared<Tensor<T>>(std::vector<int>{ck, ohw});
  detail::im2col(x->value, k, stride, g, *col);

  Tensor<T> out({c_out, g.out_h, g.out_w});
  {
    ConstMatMap<T> wm(w->value.data(), c_out, ck);
    ConstMatMap<T> cm(col->data(), ck, ohw);
    MatMap<T> om(out.data(), c_out, ohw);
    om.noalias() = wm * cm;
    for (int c = 0; c < c_out; ++c) om.row(c).array() += b->value[size_t(c)];
  }

  return make_op<T>(std::move(out), {x, w, b}, [x, w, b, col, g, k, stride](Node<T>& n) {
    const int c_out2 = w->value.dim(0), c_in2 = x->value.dim(0);
    const int ck2 = c_in2 * k * k, ohw2 = g.out_h * g.out_w;
    ConstMatMap<T> gm(n.grad.data(), c_out2, ohw2);
    if (w->requires_grad) {
      ensure_grad(*w);
      ensure_grad(*b);
      ConstMatMap<T> cm(col->data(), ck2, ohw2);
      MatMap<T> gw(w->grad.data(), c_out2, ck2);
      gw.noalias() += gm * cm.transpose();
      for (int c = 0; c < c_out2; ++c) b->grad[size_t(c)] += gm.row(c).sum();
    }
    if (x->requires_grad) {
      ensure_grad(*x);
      Tensor<T> dcol({ck2, ohw2});
      ConstMatMap<T> wm(w->value.data(), c_out2, ck2);
      MatMap<T> dm(dcol.data(), ck2, ohw2);
      dm.noalias() = wm.transpose() * gm;
      detail::col2im_add(dcol, k, stride, g, x->grad);
    }
  });
}

// Depthwise 3x3-style convolution. x:[C,H,W] w:[C,1,k,k] b:[C].
template <typename T>
Var<T> depthwise_conv2d(const Var<T>& x, const Var<T>& w, const Var<T>& b, int stride) {
  const int ch = x->value.dim(0), in_h = x->value.dim(1), in_w = x->value.dim(2);
  const int k = w->value.dim(2);
  if (w->value.dim(0) != ch) throw ValidationError("depthwise_conv2d: channel mismatch");
  ConvGeom g = same_conv_geom(in_h, in_w, k, stride);

  Tensor<T> out({ch, g.out_h, g.out_w});
  for (int c = 0; c < ch; ++c)
    for (int oy = 0; oy < g.out_h; ++oy)
      for (int ox = 0; ox < g.out_w; ++ox) {
        T acc = b->value[size_t(c)];
        for (int ky = 0; ky < k; ++ky) {
          int y = oy * stride - g.pad_top + ky;
          if (y < 0 || y >= in_h) continue;
          for (int kx = 0; kx < k; ++kx) {
            int xx = ox * stride - g.pad_left + kx;
            if (xx < 0 || xx >= in_w) continue;
            acc += x->value.at(c, y, xx) * w->value.at(c, 0, ky, kx);
          }
        }
        out.at(c, oy, ox) = acc;
      }

  return make_op<T>(std::move(out), {x, w, b}, [x, w, b, g, k, stride](Node<T>& n) {
    const int ch2 = x->value.dim(0), in_h2 = x->value.dim(1), in_w2 = x->value.dim(2);
    const bool gx = x->requires_grad, gw = w->requires_grad;
    if (gx) ensure_grad(*x);
    if (gw) {
      ensure_grad(*w);
      ensure_grad(*b);
    }
    for (int c = 0; c < ch2; ++c)
      for (int oy = 0; oy < g.out_h; ++oy)
        for (int ox = 0; ox < g.out_w; ++ox) {
          T go = n.grad.at(c, oy, ox);
          if (gw) b->grad[size_t(c)] += go;
          for (int ky = 0; ky < k; ++ky) {
            int y = oy * stride - g.pad_top + ky;
            if (y < 0 || y >= in_h2) continue;
            for (int kx = 0; kx < k; ++kx) {
              int xx = ox * stride - g.pad_left + kx;
              if (xx < 0 || xx >= in_w2) continue;
              if (gw) w->grad.at(c, 0, ky, kx) += go * x->value.at(c, y, xx);
              if (gx) x->grad.at(c, y, xx) += go * w->value.at(c, 0, ky, kx);
            }
          }
        }
  });
}

template <typename T>
Var<T> relu(const Var<T>& x) {
  Tensor<T> out = x->value;
  for (size_t i = 0; i < out.numel(); ++i) out[i] = std::max(out[i], T(0));
  return make_op<T>(std::move(out), {x}, [x](Node<T>& n) {
    ensure_grad(*x);
    for (size_t i = 0; i < n.grad.numel(); ++i)
      if (x->value[i] > T(0)) x->grad[i] += n.grad[i];
  });
}

template <typename T>
Var<T> relu6(const Var<T>& x) {
  Tensor<T> out = x->value;
  for (size_t i = 0; i < out.numel(); ++i) out[i] = std::clamp(out[i], T(0), T(6));
  return make_op<T>(std::move(out), {x}, [x](Node<T>& n) {
    ensure_grad(*x);
    for (size_t i = 0; i < n.grad.numel(); ++i)
      if (x->value[i] > T(0) && x->value[i] < T(6)) x->grad[i] += n.grad[i];
  });
}

template <typename T>
Var<T> tanh_act(const Var<T>& x) {
  Tensor<T> out = x->value;
  for (size_t i = 0; i < out.numel(); ++i) out[i] = std::tanh(out[i]);
  auto n = make_op<T>(std::move(out), {x}, nullptr);
  if (n->requires_grad) {
    Node<T>* raw = n.get();
    raw->backprop = [x, raw](Node<T>& nn) {
      ensure_grad(*x);
      for (size_t i = 0; i < nn.grad.numel(); ++i) {
        T y = raw->value[i];
        x->grad[i] += nn.grad[i] * (T(1) - y * y);
      }
    };
  }
  return n;
}

template <typename T>
Var<T> add(const Var<T>& a, const Var<T>& b) {
  if (!a->value.same_shape(b->value)) throw ValidationError("add: shape mismatch");
  Tensor<T> out = a->value;
  for (size_t i = 0; i < out.numel(); ++i) out[i] += b->value[i];
  return make_op<T>(std::move(out), {a, b}, [a, b](Node<T>& n) {
    for (const auto& p : {a, b}) {
      if (!p->requires_grad) continue;
      ensure_grad(*p);
      for (size_t i = 0; i < n.grad.numel(); ++i) p->grad[i] += n.grad[i];
    }
  });
}

template <typename T>
Var<T> scale(const Var<T>& x, double s) {
  Tensor<T> out = x->value;
  for (size_t i = 0; i < out.numel(); ++i) out[i] *= T(s);
  return make_op<T>(std::move(out), {x}, [x, s](Node<T>& n) {
    ensure_grad(*x);
    for (size_t i = 0; i < n.grad.numel(); ++i) x->grad[i] += n.grad[i] * T(s);
  });
}

// Channel concatenation of two [C,H,W] maps.
template <typename T>
Var<T> concat_ch(const Var<T>& a, const Var<T>& b) {
  const int h = a->value.dim(1), w = a->value.dim(2);
  if (b->value.dim(1) != h || b->value.dim(2) != w)
    throw ValidationError("concat_ch: spatial mismatch");
  const int ca = a->value.dim(0), cb = b->value.dim(0);
  Tensor<T> out({ca + cb, h, w});
  std::copy(a->value.data(), a->value.data() + a->value.numel(), out.data());
  std::copy(b->value.data(), b->value.data() + b->value.numel(),
            out.data() + a->value.numel());
  return make_op<T>(std::move(out), {a, b}, [a, b](Node<T>& n) {
    size_t na = a->value.numel();
    if (a->requires_grad) {
      ensure_grad(*a);
      for (size_t i = 0; i < na; ++i) a->grad[i] += n.grad[i];
    }
    if (b->requires_grad) {
      ensure_grad(*b);
      for (size_t i = 0; i < b->value.numel(); ++i) b->grad[i] += n.grad[na + i];
    }
  });
}

// Nearest-neighbour resize to an explicit target; source index floors the
// scaled coordinate, so a 2x target reduces to index/2.
template <typename T>
Var<T> upsample_nearest(const Var<T>& x, int out_h, int out_w) {
  const int ch = x->value.dim(0), in_h = x->value.dim(1), in_w = x->value.dim(2);
  Tensor<T> out({ch, out_h, out_w});
  for (int c = 0; c < ch; ++c)
    for (int y = 0; y < out_h; ++y) {
      int sy = std::min(in_h - 1, y * in_h / out_h);
      for (int x2 = 0; x2 < out_w; ++x2) {
        int sx = std::min(in_w - 1, x2 * in_w / out_w);
        out.at(c, y, x2) = x->value.at(c, sy, sx);
      }
    }
  return make_op<T>(std::move(out), {x}, [x, out_h, out_w](Node<T>& n) {
    ensure_grad(*x);
    const int ch2 = x->value.dim(0), in_h2 = x->value.dim(1), in_w2 = x->value.dim(2);
    for (int c = 0; c < ch2; ++c)
      for (int y = 0; y < out_h; ++y) {
        int sy = std::min(in_h2 - 1, y * in_h2 / out_h);
        for (int x2 = 0; x2 < out_w; ++x2) {
          int sx = std::min(in_w2 - 1, x2 * in_w2 / out_w);
          x->grad.at(c, sy, sx) += n.grad.at(c, y, x2);
        }
      }
  });
}

// Rearranges a head prediction map [n_ratio*d, H, W] into per-anchor rows
// [(H*W*n_ratio), d] matching anchor order (row, col, ratio).
template <typename T>
Var<T> head_permute(const Var<T>& x, int n_ratio, int d) {
  const int ch = x->value.dim(0), h = x->value.dim(1), w = x->value.dim(2);
  if (ch != n_ratio * d) throw ValidationError("head_permute: channel count mismatch");
  Tensor<T> out({h * w * n_ratio, d});
  for (int y = 0; y < h; ++y)
    for (int xx = 0; xx < w; ++xx)
      for (int r = 0; r < n_ratio; ++r) {
        int row = (y * w + xx) * n_ratio + r;
        for (int j = 0; j < d; ++j) out.at(row, j) = x->value.at(r * d + j, y, xx);
      }
  return make_op<T>(std::move(out), {x}, [x, n_ratio, d](Node<T>& n) {
    ensure_grad(*x);
    const int h2 = x->value.dim(1), w2 = x->value.dim(2);
    for (int y = 0; y < h2; ++y)
      for (int xx = 0; xx < w2; ++xx)
        for (int r = 0; r < n_ratio; ++r) {
          int row = (y * w2 + xx) * n_ratio + r;
          for (int j = 0; j < d; ++j) x->grad.at(r * d + j, y, xx) += n.grad.at(row, j);
        }
  });
}

// Stacks [Ni, D] blocks into [sum Ni, D].
template <typename T>
Var<T> concat_rows(const std::vector<Var<T>>& parts) {
  if (parts.empty()) throw ValidationError("concat_rows: no inputs");
  const int d = parts[0]->value.dim(1);
  int rows = 0;
  for (const auto& p : parts) {
    if (p->value.dim(1) != d) throw ValidationError("concat_rows: width mismatch");
    rows += p->value.dim(0);
  }
  Tensor<T> out({rows, d});
  size_t off = 0;
  for (const auto& p : parts) {
    std::copy(p->value.data(), p->value.data() + p->value.numel(), out.data() + off);
    off += p->value.numel();
  }
  return make_op<T>(std::move(out), parts, [parts](Node<T>& n) {
    size_t off2 = 0;
    for (const auto& p : parts) {
      if (p->requires_grad) {
        ensure_grad(*p);
        for (size_t i = 0; i < p->value.numel(); ++i) p->grad[i] += n.grad[off2 + i];
      }
      off2 += p->value.numel();
    }
  });
}

// Row gather: out[i] = x[idx[i]].
template <typename T>
Var<T> gather_rows(const Var<T>& x, std::vector<int> idx) {
  const int d = x->value.dim(1);
  Tensor<T> out({int(idx.size()), d});
  for (size_t i = 0; i < idx.size(); ++i)
    for (int j = 0; j < d; ++j) out.at(int(i), j) = x->value.at(idx[i], j);
  return make_op<T>(std::move(out), {x}, [x, idx = std::move(idx), d](Node<T>& n) {
    ensure_grad(*x);
    for (size_t i = 0; i < idx.size(); ++i)
      for (int j = 0; j < d; ++j) x->grad.at(idx[i], j) += n.grad.at(int(i), j);
  });
}

// Plain matrix product [N,K]x[K,M].
template <typename T>
Var<T> matmul(const Var<T>& a, const Var<T>& b) {
  const int n_r = a->value.dim(0), k = a->value.dim(1), m = b->value.dim(1);
  if (b->value.dim(0) != k) throw ValidationError("matmul: inner dimension mismatch");
  Tensor<T> out({n_r, m});
  {
    ConstMatMap<T> am(a->value.data(), n_r, k);
    ConstMatMap<T> bm(b->value.data(), k, m);
    MatMap<T> om(out.data(), n_r, m);
    om.noalias() = am * bm;
  }
  return make_op<T>(std::move(out), {a, b}, [a, b, n_r, k, m](Node<T>& n) {
    ConstMatMap<T> gm(n.grad.data(), n_r, m);
    if (a->requires_grad) {
      ensure_grad(*a);
      ConstMatMap<T> bm(b->value.data(), k, m);
      MatMap<T> ga(a->grad.data(), n_r, k);
      ga.noalias() += gm * bm.transpose();
    }
    if (b->requires_grad) {
      ensure_grad(*b);
      ConstMatMap<T> am(a->value.data(), n_r, k);
      MatMap<T> gb(b->grad.data(), k, m);
      gb.noalias() += am.transpose() * gm;
    }
  });
}

// Shape-only view (copying; buffers are small relative to conv work).
template <typename T>
Var<T> reshape(const Var<T>& x, std::vector<int> shape) {
  Tensor<T> out = x->value.reshaped(shape);
  return make_op<T>(std::move(out), {x}, [x](Node<T>& n) {
    ensure_grad(*x);
    for (size_t i = 0; i < n.grad.numel(); ++i) x->grad[i] += n.grad[i];
  });
}

// Weighted sum of scalars: sum_i w_i * s_i.
template <typename T>
Var<T> wsum(const std::vector<std::pair<Var<T>, double>>& terms) {
  Tensor<T> out({1});
  for (const auto& [v, w] : terms) out[0] += T(w) * v->value[0];
  std::vector<Var<T>> parents;
  std::vector<double> ws;
  for (const auto& [v, w] : terms) {
    parents.push_back(v);
    ws.push_back(w);
  }
  return make_op<T>(std::move(out), parents, [parents, ws](Node<T>& n) {
    for (size_t i = 0; i < parents.size(); ++i) {
      if (!parents[i]->requires_grad) continue;
      ensure_grad(*parents[i]);
      parents[i]->grad[0] += n.grad[0] * T(ws[i]);
    }
  });
}

// Softmax cross-entropy over rows of [N,C] against integer targets,
// multiplied by inv_norm: inv_norm * sum_i CE_i.
template <typename T>
Var<T> softmax_ce(const Var<T>& logits, std::vector<int> targets, double inv_norm) {
  const int n_r = logits->value.dim(0), c_n = logits->value.dim(1);
  if (int(targets.size()) != n_r) throw ValidationError("softmax_ce: target count mismatch");
  auto probs = std::make_shared<Tensor<T>>(std::vector<int>{n_r, c_n});
  Tensor<T> out({1});
  T total = T(0);
  for (int i = 0; i < n_r; ++i) {
    T mx = logits->value.at(i, 0);
    for (int c = 1; c < c_n; ++c) mx = std::max(mx, logits->value.at(i, c));
    T denom = T(0);
    for (int c = 0; c < c_n; ++c) {
      T e = std::exp(logits->value.at(i, c) - mx);
      probs->at(i, c) = e;
      denom += e;
    }
    for (int c = 0; c < c_n; ++c) probs->at(i, c) /= denom;
    total += std::log(denom) + mx - logits->value.at(i, targets[size_t(i)]);
  }
  out[0] = total * T(inv_norm);
  return make_op<T>(std::move(out), {logits},
                    [logits, probs, targets = std::move(targets), inv_norm](Node<T>& n) {
                      ensure_grad(*logits);
                      const int n2 = logits->value.dim(0), c2 = logits->value.dim(1);
                      T g = n.grad[0] * T(inv_norm);
                      for (int i = 0; i < n2; ++i)
                        for (int c = 0; c < c2; ++c) {
                          T p = probs->at(i, c) - (c == targets[size_t(i)] ? T(1) : T(0));
                          logits->grad.at(i, c) += g * p;
                        }
                    });
}

// Smooth-L1 against a fixed target, inv_norm * sum over all elements.
template <typename T>
Var<T> smooth_l1(const Var<T>& pred, Tensor<T> target, double inv_norm) {
  if (!pred->value.same_shape(target)) throw ValidationError("smooth_l1: shape mismatch");
  Tensor<T> out({1});
  T total = T(0);
  for (size_t i = 0; i < target.numel(); ++i) {
    T d = pred->value[i] - target[i];
    T a = std::abs(d);
    total += a < T(1) ? T(0.5) * d * d : a - T(0.5);
  }
  out[0] = total * T(inv_norm);
  return make_op<T>(std::move(out), {pred},
                    [pred, target = std::move(target), inv_norm](Node<T>& n) {
                      ensure_grad(*pred);
                      T g = n.grad[0] * T(inv_norm);
                      for (size_t i = 0; i < target.numel(); ++i) {
                        T d = pred->value[i] - target[i];
                        T slope = std::abs(d) < T(1) ? d : (d > T(0) ? T(1) : T(-1));
                        pred->grad[i] += g * slope;
                      }
                    });
}

// Per-element binary cross-entropy with logits, weighted and summed:
// sum_ij w_ij * BCE(logit_ij, t_ij). Weights fold in crop masks and
// per-row area normalisation.
template <typename T>
Var<T> weighted_bce_logits(const Var<T>& logits, Tensor<T> target, Tensor<T> weight) {
  if (!logits->value.same_shape(target) || !logits->value.same_shape(weight))
    throw ValidationError("weighted_bce_logits: shape mismatch");
  Tensor<T> out({1});
  T total = T(0);
  for (size_t i = 0; i < target.numel(); ++i) {
    if (weight[i] == T(0)) continue;
    T l = logits->value[i];
    T softplus = std::max(l, T(0)) + std::log1p(std::exp(-std::abs(l)));
    total += weight[i] * (softplus - l * target[i]);
  }
  out[0] = total;
  return make_op<T>(std::move(out), {logits},
                    [logits, target = std::move(target), weight = std::move(weight)](Node<T>& n) {
                      ensure_grad(*logits);
                      T g = n.grad[0];
                      for (size_t i = 0; i < target.numel(); ++i) {
                        if (weight[i] == T(0)) continue;
                        T l = logits->value[i];
                        T sig = T(1) / (T(1) + std::exp(-l));
                        logits->grad[i] += g * weight[i] * (sig - target[i]);
                      }
                    });
}

}  // namespace protoseg::ad
