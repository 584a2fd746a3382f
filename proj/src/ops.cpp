// SPDX-License-Identifier: Apache-2.0
#include "nuigo/ops.hpp"

#include <cblas.h>

#include <algorithm>
#include <cmath>
#include <cstdlib>

// OpenBLAS picks its kernels from OPENBLAS_CORETYPE before any of our code
// runs, and its runtime detection misreads some virtualized CPUs. This
// constructor runs ahead of the statically linked library's own init (priority
// 101 < default) and pins a kernel set matching the actual ISA. Explicit
// OPENBLAS_* environment variables still win.
__attribute__((constructor(101))) static void nuigo_blas_env() {
  __builtin_cpu_init();
  if (__builtin_cpu_supports("avx512f")) {
    setenv("OPENBLAS_CORETYPE", "SKYLAKEX", 0);
  } else if (__builtin_cpu_supports("avx2")) {
    setenv("OPENBLAS_CORETYPE", "HASWELL", 0);
  }
  setenv("OPENBLAS_NUM_THREADS", "1", 0);
}

namespace nuigo::ops {

template <>
void gemm<float>(bool trans_a, bool trans_b, int m, int n, int k, float alpha,
                 const float* a, int lda, const float* b, int ldb, float beta,
                 float* c, int ldc) {
  cblas_sgemm(CblasRowMajor, trans_a ? CblasTrans : CblasNoTrans,
              trans_b ? CblasTrans : CblasNoTrans, m, n, k, alpha, a, lda, b, ldb,
              beta, c, ldc);
}

template <>
void gemm<double>(bool trans_a, bool trans_b, int m, int n, int k, double alpha,
                  const double* a, int lda, const double* b, int ldb, double beta,
                  double* c, int ldc) {
  cblas_dgemm(CblasRowMajor, trans_a ? CblasTrans : CblasNoTrans,
              trans_b ? CblasTrans : CblasNoTrans, m, n, k, alpha, a, lda, b, ldb,
              beta, c, ldc);
}

namespace {

template <typename T>
std::vector<T>& scratch(std::size_t need) {
  thread_local std::vector<T> buf;
  if (buf.size() < need) buf.resize(need);
  return buf;
}

// cols[(ic*k*k + ky*k + kx), oy*w + ox] = x[ic, oy+ky-p, ox+kx-p] (zero pad).
template <typename T>
void im2col(const T* x, int c, int h, int w, int k, T* cols) {
  const int pad = k / 2;
  for (int ic = 0; ic < c; ++ic) {
    const T* plane = x + static_cast<std::size_t>(ic) * h * w;
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        T* row = cols + (static_cast<std::size_t>(ic) * k * k + ky * k + kx) *
                            (static_cast<std::size_t>(h) * w);
        for (int oy = 0; oy < h; ++oy) {
          const int iy = oy + ky - pad;
          if (iy < 0 || iy >= h) {
            std::fill(row + static_cast<std::size_t>(oy) * w,
                      row + static_cast<std::size_t>(oy) * w + w, T(0));
            continue;
          }
          const T* src = plane + static_cast<std::size_t>(iy) * w;
          T* dst = row + static_cast<std::size_t>(oy) * w;
          const int shift = kx - pad;
          const int x_lo = std::max(0, -shift);
          const int x_hi = std::min(w, w - shift);
          for (int ox = 0; ox < x_lo; ++ox) dst[ox] = T(0);
          for (int ox = x_lo; ox < x_hi; ++ox) dst[ox] = src[ox + shift];
          for (int ox = x_hi; ox < w; ++ox) dst[ox] = T(0);
        }
      }
    }
  }
}

// Adjoint of im2col: scatters column gradients back into the input plane.
template <typename T>
void col2im_add(const T* cols, int c, int h, int w, int k, T* gx) {
  const int pad = k / 2;
  for (int ic = 0; ic < c; ++ic) {
    T* plane = gx + static_cast<std::size_t>(ic) * h * w;
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        const T* row = cols + (static_cast<std::size_t>(ic) * k * k + ky * k + kx) *
                                  (static_cast<std::size_t>(h) * w);
        const int shift_y = ky - pad;
        const int shift_x = kx - pad;
        for (int oy = 0; oy < h; ++oy) {
          const int iy = oy + shift_y;
          if (iy < 0 || iy >= h) continue;
          const T* src = row + static_cast<std::size_t>(oy) * w;
          T* dst = plane + static_cast<std::size_t>(iy) * w;
          const int x_lo = std::max(0, -shift_x);
          const int x_hi = std::min(w, w - shift_x);
          for (int ox = x_lo; ox < x_hi; ++ox) dst[ox + shift_x] += src[ox];
        }
      }
    }
  }
}

// Gather for the stride-2 transposed convolution: reads the 2x output grid
// back into [out_c*9, h*w] columns (used by deconv backward).
template <typename T>
void im2col_stride2(const T* g, int out_c, int h, int w, T* cols) {
  const int oh = 2 * h, ow = 2 * w;
  for (int oc = 0; oc < out_c; ++oc) {
    const T* plane = g + static_cast<std::size_t>(oc) * oh * ow;
    for (int ky = 0; ky < 3; ++ky) {
      for (int kx = 0; kx < 3; ++kx) {
        T* row = cols + (static_cast<std::size_t>(oc) * 9 + ky * 3 + kx) *
                            (static_cast<std::size_t>(h) * w);
        for (int iy = 0; iy < h; ++iy) {
          const int ty = 2 * iy + ky - 1;
          for (int ix = 0; ix < w; ++ix) {
            const int tx = 2 * ix + kx - 1;
            row[static_cast<std::size_t>(iy) * w + ix] =
                (ty >= 0 && ty < oh && tx >= 0 && tx < ow)
                    ? plane[static_cast<std::size_t>(ty) * ow + tx]
                    : T(0);
          }
        }
      }
    }
  }
}

template <typename T>
void col2im_stride2_add(const T* cols, int out_c, int h, int w, T* y) {
  const int oh = 2 * h, ow = 2 * w;
  for (int oc = 0; oc < out_c; ++oc) {
    T* plane = y + static_cast<std::size_t>(oc) * oh * ow;
    for (int ky = 0; ky < 3; ++ky) {
      for (int kx = 0; kx < 3; ++kx) {
        const T* row = cols + (static_cast<std::size_t>(oc) * 9 + ky * 3 + kx) *
                                  (static_cast<std::size_t>(h) * w);
        for (int iy = 0; iy < h; ++iy) {
          const int ty = 2 * iy + ky - 1;
          if (ty < 0 || ty >= oh) continue;
          for (int ix = 0; ix < w; ++ix) {
            const int tx = 2 * ix + kx - 1;
            if (tx < 0 || tx >= ow) continue;
            plane[static_cast<std::size_t>(ty) * ow + tx] +=
                row[static_cast<std::size_t>(iy) * w + ix];
          }
        }
      }
    }
  }
}

}  // namespace

template <typename T>
void conv2d(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b, Tensor<T>& y) {
  const int k = w.h;
  require(w.w == k && (k % 2) == 1, "conv2d expects odd square kernels");
  require(w.c == x.c, "conv2d channel mismatch");
  require(b.n == w.n, "conv2d bias size mismatch");
  y = Tensor<T>(x.n, w.n, x.h, x.w);

  const int hw = x.h * x.w;
  const int kk = x.c * k * k;
  for (int s = 0; s < x.n; ++s) {
    const T* xin = x.sample(s);
    T* yout = y.sample(s);
    const T* cols = xin;
    if (k != 1) {
      auto& buf = scratch<T>(static_cast<std::size_t>(kk) * hw);
      im2col(xin, x.c, x.h, x.w, k, buf.data());
      cols = buf.data();
    }
    gemm<T>(false, false, w.n, hw, kk, T(1), w.data(), kk, cols, hw, T(0), yout, hw);
    for (int oc = 0; oc < w.n; ++oc) {
      T* row = yout + static_cast<std::size_t>(oc) * hw;
      const T bias = b.v[oc];
      for (int i = 0; i < hw; ++i) row[i] += bias;
    }
  }
}

template <typename T>
void conv2d_backward(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& gy,
                     std::type_identity_t<Tensor<T>>* gx,
                     std::type_identity_t<Tensor<T>>* gw,
                     std::type_identity_t<Tensor<T>>* gb) {
  const int k = w.h;
  const int hw = x.h * x.w;
  const int kk = x.c * k * k;
  for (int s = 0; s < x.n; ++s) {
    const T* xin = x.sample(s);
    const T* g = gy.sample(s);
    if (gb) {
      for (int oc = 0; oc < w.n; ++oc) {
        const T* row = g + static_cast<std::size_t>(oc) * hw;
        T sum = T(0);
        for (int i = 0; i < hw; ++i) sum += row[i];
        gb->v[oc] += sum;
      }
    }
    if (gw) {
      const T* cols = xin;
      if (k != 1) {
        auto& buf = scratch<T>(static_cast<std::size_t>(kk) * hw);
        im2col(xin, x.c, x.h, x.w, k, buf.data());
        cols = buf.data();
      }
      gemm<T>(false, true, w.n, kk, hw, T(1), g, hw, cols, hw, T(1), gw->data(), kk);
    }
    if (gx) {
      if (k == 1) {
        gemm<T>(true, false, x.c, hw, w.n, T(1), w.data(), kk, g, hw, T(1),
                gx->sample(s), hw);
      } else {
        thread_local std::vector<T> colsg;
        if (colsg.size() < static_cast<std::size_t>(kk) * hw)
          colsg.resize(static_cast<std::size_t>(kk) * hw);
        gemm<T>(true, false, kk, hw, w.n, T(1), w.data(), kk, g, hw, T(0),
                colsg.data(), hw);
        col2im_add(colsg.data(), x.c, x.h, x.w, k, gx->sample(s));
      }
    }
  }
}

template <typename T>
void maxpool2(const Tensor<T>& x, Tensor<T>& y, std::vector<std::int32_t>& argmax) {
  require((x.h % 2) == 0 && (x.w % 2) == 0, "maxpool2 needs even spatial dims");
  y = Tensor<T>(x.n, x.c, x.h / 2, x.w / 2);
  argmax.assign(y.size(), 0);
  std::size_t o = 0;
  for (int s = 0; s < x.n; ++s) {
    for (int ic = 0; ic < x.c; ++ic) {
      const std::size_t base = (static_cast<std::size_t>(s) * x.c + ic) * x.h * x.w;
      for (int oy = 0; oy < y.h; ++oy) {
        for (int ox = 0; ox < y.w; ++ox, ++o) {
          std::size_t best = base + static_cast<std::size_t>(2 * oy) * x.w + 2 * ox;
          T bv = x.v[best];
          const std::size_t cand[3] = {best + 1, best + x.w, best + x.w + 1};
          for (std::size_t idx : cand) {
            if (x.v[idx] > bv) {
              bv = x.v[idx];
              best = idx;
            }
          }
          y.v[o] = bv;
          argmax[o] = static_cast<std::int32_t>(best);
        }
      }
    }
  }
}

template <typename T>
void maxpool2_backward(const Tensor<T>& gy, const std::vector<std::int32_t>& argmax,
                       Tensor<T>& gx) {
  for (std::size_t i = 0; i < gy.size(); ++i) gx.v[argmax[i]] += gy.v[i];
}

template <typename T>
void deconv2d(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b, Tensor<T>& y) {
  require(w.n == x.c, "deconv2d input channel mismatch");
  require(w.h == 3 && w.w == 3, "deconv2d expects 3x3 kernels");
  const int out_c = w.c;
  y = Tensor<T>(x.n, out_c, 2 * x.h, 2 * x.w);
  const int hw = x.h * x.w;
  const int rows = out_c * 9;
  for (int s = 0; s < x.n; ++s) {
    auto& cols = scratch<T>(static_cast<std::size_t>(rows) * hw);
    // cols = W^T [out_c*9, in_c] * x [in_c, hw]
    gemm<T>(true, false, rows, hw, x.c, T(1), w.data(), rows, x.sample(s), hw, T(0),
            cols.data(), hw);
    col2im_stride2_add(cols.data(), out_c, x.h, x.w, y.sample(s));
    T* yout = y.sample(s);
    const int ohw = 4 * hw;
    for (int oc = 0; oc < out_c; ++oc) {
      T* plane = yout + static_cast<std::size_t>(oc) * ohw;
      const T bias = b.v[oc];
      for (int i = 0; i < ohw; ++i) plane[i] += bias;
    }
  }
}

template <typename T>
void deconv2d_backward(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& gy,
                       std::type_identity_t<Tensor<T>>* gx,
                       std::type_identity_t<Tensor<T>>* gw,
                       std::type_identity_t<Tensor<T>>* gb) {
  const int out_c = w.c;
  const int hw = x.h * x.w;
  const int rows = out_c * 9;
  for (int s = 0; s < x.n; ++s) {
    const T* g = gy.sample(s);
    if (gb) {
      const int ohw = 4 * hw;
      for (int oc = 0; oc < out_c; ++oc) {
        const T* plane = g + static_cast<std::size_t>(oc) * ohw;
        T sum = T(0);
        for (int i = 0; i < ohw; ++i) sum += plane[i];
        gb->v[oc] += sum;
      }
    }
    auto& cols = scratch<T>(static_cast<std::size_t>(rows) * hw);
    im2col_stride2(g, out_c, x.h, x.w, cols.data());
    if (gx)
      gemm<T>(false, false, x.c, hw, rows, T(1), w.data(), rows, cols.data(), hw,
              T(1), gx->sample(s), hw);
    if (gw)
      gemm<T>(false, true, x.c, rows, hw, T(1), x.sample(s), hw, cols.data(), hw,
              T(1), gw->data(), rows);
  }
}

template <typename T>
void relu(Tensor<T>& x) {
  for (auto& v : x.v) v = v > T(0) ? v : T(0);
}

template <typename T>
void relu_backward(const Tensor<T>& y, Tensor<T>& gy) {
  for (std::size_t i = 0; i < y.size(); ++i)
    if (!(y.v[i] > T(0))) gy.v[i] = T(0);
}

template <typename T>
void concat_channels(const Tensor<T>& a, const Tensor<T>& b, Tensor<T>& y) {
  require(a.n == b.n && a.h == b.h && a.w == b.w, "concat spatial mismatch");
  y = Tensor<T>(a.n, a.c + b.c, a.h, a.w);
  const std::size_t pa = static_cast<std::size_t>(a.c) * a.h * a.w;
  const std::size_t pb = static_cast<std::size_t>(b.c) * b.h * b.w;
  for (int s = 0; s < a.n; ++s) {
    std::copy_n(a.sample(s), pa, y.sample(s));
    std::copy_n(b.sample(s), pb, y.sample(s) + pa);
  }
}

template <typename T>
void split_channels_add(const Tensor<T>& gy, Tensor<T>& ga, Tensor<T>& gb) {
  const std::size_t pa = static_cast<std::size_t>(ga.c) * ga.h * ga.w;
  const std::size_t pb = static_cast<std::size_t>(gb.c) * gb.h * gb.w;
  for (int s = 0; s < gy.n; ++s) {
    const T* src = gy.sample(s);
    T* da = ga.sample(s);
    T* db = gb.sample(s);
    for (std::size_t i = 0; i < pa; ++i) da[i] += src[i];
    for (std::size_t i = 0; i < pb; ++i) db[i] += src[pa + i];
  }
}

template <typename T>
void softmax_rows(T* m, int rows, int cols) {
  for (int r = 0; r < rows; ++r) {
    T* row = m + static_cast<std::size_t>(r) * cols;
    T mx = row[0];
    for (int i = 1; i < cols; ++i) mx = std::max(mx, row[i]);
    double sum = 0.0;
    for (int i = 0; i < cols; ++i) {
      const double e = std::exp(static_cast<double>(row[i] - mx));
      row[i] = static_cast<T>(e);
      sum += e;
    }
    for (int i = 0; i < cols; ++i)
      row[i] = static_cast<T>(static_cast<double>(row[i]) / sum);
  }
}

#define NUIGO_INSTANTIATE_OPS(T)                                                     \
  template void conv2d<T>(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&,      \
                          Tensor<T>&);                                               \
  template void conv2d_backward<T>(const Tensor<T>&, const Tensor<T>&,               \
                                   const Tensor<T>&, Tensor<T>*, Tensor<T>*,         \
                                   Tensor<T>*);                                      \
  template void maxpool2<T>(const Tensor<T>&, Tensor<T>&, std::vector<int32_t>&);    \
  template void maxpool2_backward<T>(const Tensor<T>&, const std::vector<int32_t>&,  \
                                     Tensor<T>&);                                    \
  template void deconv2d<T>(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&,    \
                            Tensor<T>&);                                             \
  template void deconv2d_backward<T>(const Tensor<T>&, const Tensor<T>&,             \
                                     const Tensor<T>&, Tensor<T>*, Tensor<T>*,       \
                                     Tensor<T>*);                                    \
  template void relu<T>(Tensor<T>&);                                                 \
  template void relu_backward<T>(const Tensor<T>&, Tensor<T>&);                      \
  template void concat_channels<T>(const Tensor<T>&, const Tensor<T>&, Tensor<T>&);  \
  template void split_channels_add<T>(const Tensor<T>&, Tensor<T>&, Tensor<T>&);     \
  template void softmax_rows<T>(T*, int, int);

NUIGO_INSTANTIATE_OPS(float)
NUIGO_INSTANTIATE_OPS(double)

}  // namespace nuigo::ops
