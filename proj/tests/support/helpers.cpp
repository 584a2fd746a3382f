// SPDX-License-Identifier: Apache-2.0
#include "support/helpers.hpp"

#include <unistd.h>

#include <algorithm>
#include <atomic>
#include <cmath>

namespace testsupport {

using nuigo::Image;
using nuigo::Rng;
using nuigo::Tensor;

TempDir::TempDir() {
  static std::atomic<int> counter{0};
  const auto base = std::filesystem::temp_directory_path();
  path_ = base / ("nuigo_test_" + std::to_string(::getpid()) + "_" +
                  std::to_string(counter++));
  std::filesystem::create_directories(path_);
}

TempDir::~TempDir() {
  std::error_code ec;
  std::filesystem::remove_all(path_, ec);
}

Image make_fundus_image(int size, std::uint64_t seed) {
  Rng rng(nuigo::mix64(seed ^ 0xf00du));
  Image img(size, size);
  const double c = (size - 1) / 2.0;
  const double fov = 0.48 * size;

  // Low-frequency shading so the background is smooth but not constant.
  const double ax = rng.uniform(0.5, 2.0), ay = rng.uniform(0.5, 2.0);
  const double px = rng.uniform(0.0, 6.28), py = rng.uniform(0.0, 6.28);
  // Optic-disc position a bit off center.
  const double ang = rng.uniform(0.0, 6.28);
  const double dcx = c + 0.22 * size * std::cos(ang);
  const double dcy = c + 0.22 * size * std::sin(ang);
  const double disc_sigma = 0.06 * size;
  const double base_r = rng.uniform(0.45, 0.60);
  const double base_g = rng.uniform(0.14, 0.24);
  const double base_b = rng.uniform(0.04, 0.10);

  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      const double r = std::hypot(x - c, y - c) / fov;
      double red, grn, blu;
      if (r >= 1.0) {
        red = grn = blu = 0.02;
      } else {
        const double shade =
            0.80 + 0.15 * std::sin(ax * 6.28 * x / size + px) *
                       std::cos(ay * 6.28 * y / size + py) -
            0.25 * r * r;  // vignetting toward the rim
        red = base_r * shade;
        grn = base_g * shade;
        blu = base_b * shade;
        const double dd = std::hypot(x - dcx, y - dcy);
        const double disc = std::exp(-dd * dd / (2.0 * disc_sigma * disc_sigma));
        red += 0.40 * disc;
        grn += 0.45 * disc;
        blu += 0.25 * disc;
      }
      img.at(0, y, x) = static_cast<float>(std::clamp(red, 0.01, 0.99));
      img.at(1, y, x) = static_cast<float>(std::clamp(grn, 0.01, 0.99));
      img.at(2, y, x) = static_cast<float>(std::clamp(blu, 0.01, 0.99));
    }
  }

  // Vessel strokes: random walks from the disc, stamped as dark disks.
  const int n_vessels = 6 + static_cast<int>(rng.index(4));
  for (int v = 0; v < n_vessels; ++v) {
    double xpos = dcx, ypos = dcy;
    double dir = rng.uniform(0.0, 6.28);
    const double thickness = rng.uniform(0.6, 1.8) * size / 128.0;
    const int steps = size + static_cast<int>(rng.index(size));
    for (int s = 0; s < steps; ++s) {
      dir += rng.uniform(-0.25, 0.25);
      xpos += std::cos(dir);
      ypos += std::sin(dir);
      if (std::hypot(xpos - c, ypos - c) > 0.94 * fov) break;
      const int lo_y = std::max(0, static_cast<int>(ypos - thickness - 1));
      const int hi_y = std::min(size - 1, static_cast<int>(ypos + thickness + 1));
      const int lo_x = std::max(0, static_cast<int>(xpos - thickness - 1));
      const int hi_x = std::min(size - 1, static_cast<int>(xpos + thickness + 1));
      for (int yy = lo_y; yy <= hi_y; ++yy)
        for (int xx = lo_x; xx <= hi_x; ++xx)
          if (std::hypot(xx - xpos, yy - ypos) <= thickness) {
            img.at(0, yy, xx) = std::min(img.at(0, yy, xx), 0.28f);
            img.at(1, yy, xx) = std::min(img.at(1, yy, xx), 0.07f);
            img.at(2, yy, xx) = std::min(img.at(2, yy, xx), 0.05f);
          }
    }
  }
  return img;
}

template <typename T>
Tensor<T> naive_conv2d(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b) {
  const int k = w.h, pad = k / 2;
  Tensor<T> y(x.n, w.n, x.h, x.w);
  for (int s = 0; s < x.n; ++s)
    for (int oc = 0; oc < w.n; ++oc)
      for (int oy = 0; oy < x.h; ++oy)
        for (int ox = 0; ox < x.w; ++ox) {
          double acc = b.v[oc];
          for (int ic = 0; ic < x.c; ++ic)
            for (int ky = 0; ky < k; ++ky)
              for (int kx = 0; kx < k; ++kx) {
                const int iy = oy + ky - pad, ix = ox + kx - pad;
                if (iy < 0 || iy >= x.h || ix < 0 || ix >= x.w) continue;
                acc += static_cast<double>(x.at(s, ic, iy, ix)) * w.at(oc, ic, ky, kx);
              }
          y.at(s, oc, oy, ox) = static_cast<T>(acc);
        }
  return y;
}

template <typename T>
Tensor<T> naive_deconv2d(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b) {
  const int out_c = w.c;
  Tensor<T> y(x.n, out_c, 2 * x.h, 2 * x.w);
  for (int s = 0; s < x.n; ++s) {
    for (int oc = 0; oc < out_c; ++oc)
      for (int oy = 0; oy < y.h; ++oy)
        for (int ox = 0; ox < y.w; ++ox) y.at(s, oc, oy, ox) = b.v[oc];
    for (int ic = 0; ic < x.c; ++ic)
      for (int iy = 0; iy < x.h; ++iy)
        for (int ix = 0; ix < x.w; ++ix)
          for (int oc = 0; oc < out_c; ++oc)
            for (int ky = 0; ky < 3; ++ky)
              for (int kx = 0; kx < 3; ++kx) {
                const int oy = 2 * iy + ky - 1, ox = 2 * ix + kx - 1;
                if (oy < 0 || oy >= y.h || ox < 0 || ox >= y.w) continue;
                y.at(s, oc, oy, ox) += x.at(s, ic, iy, ix) * w.at(ic, oc, ky, kx);
              }
  }
  return y;
}

template <typename T>
Tensor<T> naive_maxpool2(const Tensor<T>& x) {
  Tensor<T> y(x.n, x.c, x.h / 2, x.w / 2);
  for (int s = 0; s < x.n; ++s)
    for (int ic = 0; ic < x.c; ++ic)
      for (int oy = 0; oy < y.h; ++oy)
        for (int ox = 0; ox < y.w; ++ox) {
          T m = x.at(s, ic, 2 * oy, 2 * ox);
          m = std::max(m, x.at(s, ic, 2 * oy, 2 * ox + 1));
          m = std::max(m, x.at(s, ic, 2 * oy + 1, 2 * ox));
          m = std::max(m, x.at(s, ic, 2 * oy + 1, 2 * ox + 1));
          y.at(s, ic, oy, ox) = m;
        }
  return y;
}

template <typename T>
Tensor<T> naive_attention(const Tensor<T>& x, const Tensor<T>& qw, const Tensor<T>& qb,
                          const Tensor<T>& kw, const Tensor<T>& kb, const Tensor<T>& vw,
                          const Tensor<T>& vb, const Tensor<T>& ow, const Tensor<T>& ob) {
  const int ci = qw.n, np = x.h * x.w;
  auto embed = [&](const Tensor<T>& w, const Tensor<T>& b, int s, int e, int p) {
    double acc = b.v[e];
    for (int ic = 0; ic < x.c; ++ic)
      acc += static_cast<double>(x.v[(static_cast<std::size_t>(s) * x.c + ic) * np + p]) *
             w.at(e, ic, 0, 0);
    return acc;
  };
  Tensor<T> z(x.n, x.c, x.h, x.w);
  for (int s = 0; s < x.n; ++s) {
    for (int i = 0; i < np; ++i) {
      // softmax over similarities of position i with every position j
      std::vector<double> sim(np);
      double mx = -1e300;
      for (int j = 0; j < np; ++j) {
        double dot = 0;
        for (int e = 0; e < ci; ++e)
          dot += embed(qw, qb, s, e, i) * embed(kw, kb, s, e, j);
        sim[j] = dot;
        mx = std::max(mx, dot);
      }
      double sum = 0;
      for (int j = 0; j < np; ++j) {
        sim[j] = std::exp(sim[j] - mx);
        sum += sim[j];
      }
      // weighted sum of value embeddings, projected back to x's channels
      for (int oc = 0; oc < x.c; ++oc) {
        double out = ob.v[oc];
        for (int e = 0; e < ci; ++e) {
          double ye = 0;
          for (int j = 0; j < np; ++j)
            ye += sim[j] / sum * embed(vw, vb, s, e, j);
          out += ye * ow.at(oc, e, 0, 0);
        }
        z.v[(static_cast<std::size_t>(s) * x.c + oc) * np + i] =
            static_cast<T>(out + x.v[(static_cast<std::size_t>(s) * x.c + oc) * np + i]);
      }
    }
  }
  return z;
}

#define TS_INSTANTIATE(T)                                                            \
  template Tensor<T> naive_conv2d<T>(const Tensor<T>&, const Tensor<T>&,             \
                                     const Tensor<T>&);                              \
  template Tensor<T> naive_deconv2d<T>(const Tensor<T>&, const Tensor<T>&,           \
                                       const Tensor<T>&);                            \
  template Tensor<T> naive_maxpool2<T>(const Tensor<T>&);                            \
  template Tensor<T> naive_attention<T>(                                             \
      const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, const Tensor<T>&,        \
      const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, const Tensor<T>&,        \
      const Tensor<T>&);

TS_INSTANTIATE(float)
TS_INSTANTIATE(double)

}  // namespace testsupport
