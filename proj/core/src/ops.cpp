#include "camreid/ops.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace camreid::ops {
namespace {

enum class Broadcast { kFull, kPerChannel, kPerPixel };

Broadcast classify_broadcast(const Shape& a, const Shape& b) {
  if (a == b) return Broadcast::kFull;
  if (b == Shape{a.n, a.c, 1, 1}) return Broadcast::kPerChannel;
  if (b == Shape{a.n, 1, a.h, a.w}) return Broadcast::kPerPixel;
  throw ShapeError("mul: cannot broadcast " + b.str() + " onto " + a.str());
}

void require_same_shape(const char* op, const Shape& a, const Shape& b) {
  if (a != b) {
    throw ShapeError(std::string(op) + ": shape mismatch " + a.str() +
                     " vs " + b.str());
  }
}

}  // namespace

Variable mul(Tape& tape, const Variable& a, const Variable& b) {
  const Shape sa = a.shape();
  const Shape sb = b.shape();
  const Broadcast mode = classify_broadcast(sa, sb);

  // Flat index into b for every flat index of a.
  auto b_index = [sa, mode](std::size_t n, std::size_t c, std::size_t h,
                            std::size_t w) -> std::size_t {
    switch (mode) {
      case Broadcast::kFull:
        return ((n * sa.c + c) * sa.h + h) * sa.w + w;
      case Broadcast::kPerChannel:
        return n * sa.c + c;
      case Broadcast::kPerPixel:
        return (n * sa.h + h) * sa.w + w;
    }
    return 0;
  };

  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  Tensor out(sa);
  std::size_t i = 0;
  for (std::size_t n = 0; n < sa.n; ++n)
    for (std::size_t c = 0; c < sa.c; ++c)
      for (std::size_t h = 0; h < sa.h; ++h)
        for (std::size_t w = 0; w < sa.w; ++w, ++i)
          out[i] = av[i] * bv[b_index(n, c, h, w)];

  return tape.record(
      "mul", std::move(out), {a, b},
      [a, b, sa, sb, b_index](const Tensor& g) {
        const Tensor& av = a.value();
        const Tensor& bv = b.value();
        Tensor ga(sa);
        Tensor gb(sb);
        std::size_t i = 0;
        for (std::size_t n = 0; n < sa.n; ++n)
          for (std::size_t c = 0; c < sa.c; ++c)
            for (std::size_t h = 0; h < sa.h; ++h)
              for (std::size_t w = 0; w < sa.w; ++w, ++i) {
                const std::size_t j = b_index(n, c, h, w);
                ga[i] = g[i] * bv[j];
                gb[j] += g[i] * av[i];
              }
        return std::vector<Tensor>{std::move(ga), std::move(gb)};
      });
}

Variable add(Tape& tape, const Variable& a, const Variable& b) {
  require_same_shape("add", a.shape(), b.shape());
  Tensor out = a.value();
  const Tensor& bv = b.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += bv[i];
  return tape.record("add", std::move(out), {a, b}, [](const Tensor& g) {
    return std::vector<Tensor>{g, g};
  });
}

Variable scale(Tape& tape, const Variable& x, double s) {
  Tensor out = x.value();
  for (double& v : out.data()) v *= s;
  return tape.record("scale", std::move(out), {x}, [s](const Tensor& g) {
    Tensor gx = g;
    for (double& v : gx.data()) v *= s;
    return std::vector<Tensor>{std::move(gx)};
  });
}

Variable one_minus(Tape& tape, const Variable& x) {
  Tensor out = x.value();
  for (double& v : out.data()) v = 1.0 - v;
  return tape.record("one_minus", std::move(out), {x}, [](const Tensor& g) {
    Tensor gx = g;
    for (double& v : gx.data()) v = -v;
    return std::vector<Tensor>{std::move(gx)};
  });
}

Variable relu(Tape& tape, const Variable& x) {
  Tensor out = x.value();
  for (double& v : out.data()) v = v > 0.0 ? v : 0.0;
  return tape.record("relu", std::move(out), {x}, [x](const Tensor& g) {
    const Tensor& xv = x.value();
    Tensor gx(g.shape());
    for (std::size_t i = 0; i < gx.size(); ++i)
      gx[i] = xv[i] > 0.0 ? g[i] : 0.0;
    return std::vector<Tensor>{std::move(gx)};
  });
}

Variable sigmoid(Tape& tape, const Variable& x) {
  Tensor out = x.value();
  for (double& v : out.data()) {
    // Split on sign so exp() never overflows.
    if (v >= 0.0) {
      v = 1.0 / (1.0 + std::exp(-v));
    } else {
      const double e = std::exp(v);
      v = e / (1.0 + e);
    }
  }
  Tensor y = out;
  return tape.record("sigmoid", std::move(out), {x},
                     [y = std::move(y)](const Tensor& g) {
                       Tensor gx(g.shape());
                       for (std::size_t i = 0; i < gx.size(); ++i)
                         gx[i] = g[i] * y[i] * (1.0 - y[i]);
                       return std::vector<Tensor>{std::move(gx)};
                     });
}

Variable pool_global(Tape& tape, const Variable& x, PoolMode mode) {
  const Shape s = x.shape();
  if (s.h == 0 || s.w == 0) {
    throw ShapeError("pool_global: empty spatial extent " + s.str());
  }
  const std::size_t hw = s.spatial();
  const Tensor& xv = x.value();
  Tensor out(Shape{s.n, s.c, 1, 1});

  if (mode == PoolMode::kAvg) {
    for (std::size_t nc = 0; nc < s.n * s.c; ++nc) {
      double acc = 0.0;
      for (std::size_t k = 0; k < hw; ++k) acc += xv[nc * hw + k];
      out[nc] = acc / static_cast<double>(hw);
    }
    return tape.record("pool_global_avg", std::move(out), {x},
                       [s, hw](const Tensor& g) {
                         Tensor gx(s);
                         const double inv = 1.0 / static_cast<double>(hw);
                         for (std::size_t nc = 0; nc < s.n * s.c; ++nc)
                           for (std::size_t k = 0; k < hw; ++k)
                             gx[nc * hw + k] = g[nc] * inv;
                         return std::vector<Tensor>{std::move(gx)};
                       });
  }

  std::vector<std::size_t> argmax(s.n * s.c);
  for (std::size_t nc = 0; nc < s.n * s.c; ++nc) {
    std::size_t best = nc * hw;
    for (std::size_t k = 1; k < hw; ++k)
      if (xv[nc * hw + k] > xv[best]) best = nc * hw + k;
    argmax[nc] = best;
    out[nc] = xv[best];
  }
  return tape.record("pool_global_max", std::move(out), {x},
                     [s, argmax = std::move(argmax)](const Tensor& g) {
                       Tensor gx(s);
                       for (std::size_t nc = 0; nc < argmax.size(); ++nc)
                         gx[argmax[nc]] = g[nc];
                       return std::vector<Tensor>{std::move(gx)};
                     });
}

Variable pool_channel(Tape& tape, const Variable& x, PoolMode mode) {
  const Shape s = x.shape();
  if (s.c == 0) throw ShapeError("pool_channel: zero channels in " + s.str());
  const std::size_t hw = s.spatial();
  const Tensor& xv = x.value();
  const Shape os{s.n, 1, s.h, s.w};
  Tensor out(os);

  if (mode == PoolMode::kAvg) {
    const double inv = 1.0 / static_cast<double>(s.c);
    for (std::size_t n = 0; n < s.n; ++n)
      for (std::size_t p = 0; p < hw; ++p) {
        double acc = 0.0;
        for (std::size_t c = 0; c < s.c; ++c) acc += xv[(n * s.c + c) * hw + p];
        out[n * hw + p] = acc * inv;
      }
    return tape.record("pool_channel_avg", std::move(out), {x},
                       [s, hw, inv](const Tensor& g) {
                         Tensor gx(s);
                         for (std::size_t n = 0; n < s.n; ++n)
                           for (std::size_t c = 0; c < s.c; ++c)
                             for (std::size_t p = 0; p < hw; ++p)
                               gx[(n * s.c + c) * hw + p] = g[n * hw + p] * inv;
                         return std::vector<Tensor>{std::move(gx)};
                       });
  }

  std::vector<std::size_t> argmax(s.n * hw);
  for (std::size_t n = 0; n < s.n; ++n)
    for (std::size_t p = 0; p < hw; ++p) {
      std::size_t best = n * s.c * hw + p;
      for (std::size_t c = 1; c < s.c; ++c) {
        const std::size_t idx = (n * s.c + c) * hw + p;
        if (xv[idx] > xv[best]) best = idx;
      }
      argmax[n * hw + p] = best;
      out[n * hw + p] = xv[best];
    }
  return tape.record("pool_channel_max", std::move(out), {x},
                     [s, argmax = std::move(argmax)](const Tensor& g) {
                       Tensor gx(s);
                       for (std::size_t i = 0; i < argmax.size(); ++i)
                         gx[argmax[i]] = g[i];
                       return std::vector<Tensor>{std::move(gx)};
                     });
}

Variable concat_channels(Tape& tape, const Variable& a, const Variable& b) {
  const Shape sa = a.shape();
  const Shape sb = b.shape();
  if (sa.n != sb.n || sa.h != sb.h || sa.w != sb.w) {
    throw ShapeError("concat_channels: incompatible " + sa.str() + " and " +
                     sb.str());
  }
  const std::size_t hw = sa.spatial();
  const Shape os{sa.n, sa.c + sb.c, sa.h, sa.w};
  Tensor out(os);
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  for (std::size_t n = 0; n < sa.n; ++n) {
    const std::size_t dst = n * os.c * hw;
    std::copy_n(av.data().begin() + n * sa.c * hw, sa.c * hw,
                out.data().begin() + dst);
    std::copy_n(bv.data().begin() + n * sb.c * hw, sb.c * hw,
                out.data().begin() + dst + sa.c * hw);
  }
  return tape.record(
      "concat_channels", std::move(out), {a, b},
      [sa, sb, os, hw](const Tensor& g) {
        Tensor ga(sa);
        Tensor gb(sb);
        for (std::size_t n = 0; n < sa.n; ++n) {
          const std::size_t src = n * os.c * hw;
          std::copy_n(g.data().begin() + src, sa.c * hw,
                      ga.data().begin() + n * sa.c * hw);
          std::copy_n(g.data().begin() + src + sa.c * hw, sb.c * hw,
                      gb.data().begin() + n * sb.c * hw);
        }
        return std::vector<Tensor>{std::move(ga), std::move(gb)};
      });
}

Variable dense(Tape& tape, const Variable& x, const Variable& weights,
               const Variable& bias) {
  const Shape sx = x.shape();
  const Shape sw = weights.shape();
  if (sx.h != 1 || sx.w != 1) {
    throw ShapeError("dense: input must be (N,C,1,1), got " + sx.str());
  }
  if (sw.h != 1 || sw.w != 1 || sw.c != sx.c) {
    throw ShapeError("dense: weights " + sw.str() + " incompatible with input " +
                     sx.str());
  }
  if (bias.shape() != Shape{sw.n, 1, 1, 1}) {
    throw ShapeError("dense: bias " + bias.shape().str() + " expected " +
                     Shape{sw.n, 1, 1, 1}.str());
  }
  const std::size_t batch = sx.n;
  const std::size_t in = sx.c;
  const std::size_t outc = sw.n;
  const Tensor& xv = x.value();
  const Tensor& wv = weights.value();
  const Tensor& bv = bias.value();
  Tensor out(Shape{batch, outc, 1, 1});
  for (std::size_t n = 0; n < batch; ++n)
    for (std::size_t o = 0; o < outc; ++o) {
      double acc = bv[o];
      for (std::size_t i = 0; i < in; ++i) acc += wv[o * in + i] * xv[n * in + i];
      out[n * outc + o] = acc;
    }
  return tape.record(
      "dense", std::move(out), {x, weights, bias},
      [x, weights, batch, in, outc](const Tensor& g) {
        const Tensor& xv = x.value();
        const Tensor& wv = weights.value();
        Tensor gx(x.shape());
        Tensor gw(weights.shape());
        Tensor gb(Shape{outc, 1, 1, 1});
        for (std::size_t n = 0; n < batch; ++n)
          for (std::size_t o = 0; o < outc; ++o) {
            const double go = g[n * outc + o];
            gb[o] += go;
            for (std::size_t i = 0; i < in; ++i) {
              gx[n * in + i] += go * wv[o * in + i];
              gw[o * in + i] += go * xv[n * in + i];
            }
          }
        return std::vector<Tensor>{std::move(gx), std::move(gw), std::move(gb)};
      });
}

Variable conv2d(Tape& tape, const Variable& x, const Variable& kernel,
                const Variable& bias, std::size_t stride) {
  const Shape sx = x.shape();
  const Shape sk = kernel.shape();
  if (sk.h != sk.w || sk.h % 2 == 0) {
    throw ShapeError("conv2d: kernel must be square with odd size, got " +
                     sk.str());
  }
  if (sk.c != sx.c) {
    throw ShapeError("conv2d: kernel " + sk.str() +
                     " channel mismatch with input " + sx.str());
  }
  if (bias.shape() != Shape{sk.n, 1, 1, 1}) {
    throw ShapeError("conv2d: bias " + bias.shape().str() + " expected " +
                     Shape{sk.n, 1, 1, 1}.str());
  }
  if (stride == 0) throw std::invalid_argument("conv2d: stride must be >= 1");

  const std::size_t k = sk.h;
  const std::ptrdiff_t pad = static_cast<std::ptrdiff_t>(k / 2);
  const std::size_t oh = (sx.h + 2 * (k / 2) - k) / stride + 1;
  const std::size_t ow = (sx.w + 2 * (k / 2) - k) / stride + 1;
  const Shape os{sx.n, sk.n, oh, ow};

  // Output rows (or columns) o with 0 <= o*stride + d < extent, as [lo, hi).
  auto valid = [stride](std::ptrdiff_t d, std::size_t extent, std::size_t out_extent) {
    const auto s = static_cast<std::ptrdiff_t>(stride);
    const auto e = static_cast<std::ptrdiff_t>(extent);
    const std::ptrdiff_t lo = d < 0 ? (-d + s - 1) / s : 0;
    const std::ptrdiff_t hi =
        e - d <= 0 ? 0
                   : std::min<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(out_extent),
                                              (e - d + s - 1) / s);
    return std::pair<std::size_t, std::size_t>{static_cast<std::size_t>(lo),
                                               static_cast<std::size_t>(std::max(lo, hi))};
  };

  // Calls fn(out_plane, in_plane, kernel_index, y_range, x_range, dy, dx)
  // once per (n, co, ci, ky, kx); the callee walks the valid output window.
  auto for_each_tap = [sx, sk, os, k, pad, valid](auto&& fn) {
    for (std::size_t n = 0; n < os.n; ++n)
      for (std::size_t co = 0; co < os.c; ++co) {
        const std::size_t out_plane = (n * os.c + co) * os.h * os.w;
        for (std::size_t ci = 0; ci < sx.c; ++ci) {
          const std::size_t in_plane = (n * sx.c + ci) * sx.h * sx.w;
          for (std::size_t ky = 0; ky < k; ++ky) {
            const std::ptrdiff_t dy = static_cast<std::ptrdiff_t>(ky) - pad;
            const auto yr = valid(dy, sx.h, os.h);
            for (std::size_t kx = 0; kx < k; ++kx) {
              const std::ptrdiff_t dx = static_cast<std::ptrdiff_t>(kx) - pad;
              const auto xr = valid(dx, sx.w, os.w);
              const std::size_t ki = ((co * sk.c + ci) * k + ky) * k + kx;
              fn(out_plane, in_plane, ki, yr, xr, dy, dx);
            }
          }
        }
      }
  };

  const Tensor& xv = x.value();
  const Tensor& kv = kernel.value();
  const Tensor& bv = bias.value();
  Tensor out(os);
  const std::size_t plane = oh * ow;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = bv[(i / plane) % os.c];
  {
    const double* xp = xv.data().data();
    double* op = out.data().data();
    for_each_tap([&](std::size_t opl, std::size_t ipl, std::size_t ki, auto yr,
                     auto xr, std::ptrdiff_t dy, std::ptrdiff_t dx) {
      const double w = kv[ki];
      for (std::size_t y = yr.first; y < yr.second; ++y) {
        const std::size_t iy = static_cast<std::size_t>(
            static_cast<std::ptrdiff_t>(y * stride) + dy);
        double* orow = op + opl + y * ow;
        const double* irow = xp + ipl + iy * sx.w;
        for (std::size_t xo = xr.first; xo < xr.second; ++xo)
          orow[xo] += w * irow[static_cast<std::size_t>(
                              static_cast<std::ptrdiff_t>(xo * stride) + dx)];
      }
    });
  }

  return tape.record(
      "conv2d", std::move(out), {x, kernel, bias},
      [x, kernel, os, plane, ow, stride, sx, for_each_tap](const Tensor& g) {
        const Tensor& xv = x.value();
        const Tensor& kv = kernel.value();
        Tensor gx(x.shape());
        Tensor gk(kernel.shape());
        Tensor gb(Shape{os.c, 1, 1, 1});
        for (std::size_t i = 0; i < g.size(); ++i) gb[(i / plane) % os.c] += g[i];
        const double* xp = xv.data().data();
        const double* gp = g.data().data();
        double* gxp = gx.data().data();
        for_each_tap([&](std::size_t opl, std::size_t ipl, std::size_t ki, auto yr,
                         auto xr, std::ptrdiff_t dy, std::ptrdiff_t dx) {
          const double w = kv[ki];
          double acc = 0.0;
          for (std::size_t y = yr.first; y < yr.second; ++y) {
            const std::size_t iy = static_cast<std::size_t>(
                static_cast<std::ptrdiff_t>(y * stride) + dy);
            const double* grow = gp + opl + y * ow;
            const double* irow = xp + ipl + iy * sx.w;
            double* gxrow = gxp + ipl + iy * sx.w;
            for (std::size_t xo = xr.first; xo < xr.second; ++xo) {
              const std::size_t ix = static_cast<std::size_t>(
                  static_cast<std::ptrdiff_t>(xo * stride) + dx);
              gxrow[ix] += grow[xo] * w;
              acc += grow[xo] * irow[ix];
            }
          }
          gk[ki] += acc;
        });
        return std::vector<Tensor>{std::move(gx), std::move(gk), std::move(gb)};
      });
}

Variable sum(Tape& tape, const Variable& x) {
  double acc = 0.0;
  for (double v : x.value().data()) acc += v;
  const Shape s = x.shape();
  return tape.record("sum", Tensor::scalar(acc), {x}, [s](const Tensor& g) {
    return std::vector<Tensor>{Tensor(s, g.item())};
  });
}

Variable gradient_scale(Tape& tape, const Variable& x, double factor) {
  return tape.record("gradient_scale", x.value(), {x},
                     [factor](const Tensor& g) {
                       Tensor gx = g;
                       for (double& v : gx.data()) v *= factor;
                       return std::vector<Tensor>{std::move(gx)};
                     });
}

Variable gradient_reversal(Tape& tape, const Variable& x, double mu) {
  if (!(mu > 0.0) || !std::isfinite(mu)) {
    throw std::invalid_argument("gradient_reversal: scale must be positive, got " +
                                std::to_string(mu));
  }
  return gradient_scale(tape, x, -mu);
}

}  // namespace camreid::ops
