// Reference kernels: plain loops, no threading, written for clarity.

#include <algorithm>
#include <cmath>

#include "uranker/kernels.hpp"

namespace uranker::kernels::serial {

void gemm(bool trans_a, bool trans_b, Index m, Index n, Index k, const double* a, const double* b,
          double* c, bool accumulate) {
  for (Index i = 0; i < m; ++i) {
    for (Index j = 0; j < n; ++j) {
      double s = 0.0;
      for (Index p = 0; p < k; ++p) {
        const double av = trans_a ? a[p * m + i] : a[i * k + p];
        const double bv = trans_b ? b[j * k + p] : b[p * n + j];
        s += av * bv;
      }
      c[i * n + j] = accumulate ? c[i * n + j] + s : s;
    }
  }
}

void conv2d_forward(const Conv2dGeometry& g, const double* in, const double* weight, const double* bias,
                    double* out) {
  const Index oh = g.out_h(), ow = g.out_w();
  const Index ipg = g.in_per_group(), opg = g.out_per_group();
  for (Index oc = 0; oc < g.out_channels; ++oc) {
    const Index grp = oc / opg;
    for (Index oy = 0; oy < oh; ++oy) {
      for (Index ox = 0; ox < ow; ++ox) {
        double s = bias ? bias[oc] : 0.0;
        for (Index icg = 0; icg < ipg; ++icg) {
          const Index ic = grp * ipg + icg;
          for (Index ky = 0; ky < g.kernel; ++ky) {
            const Index iy = oy * g.stride - g.pad + ky;
            if (iy < 0 || iy >= g.in_h) continue;
            for (Index kx = 0; kx < g.kernel; ++kx) {
              const Index ix = ox * g.stride - g.pad + kx;
              if (ix < 0 || ix >= g.in_w) continue;
              s += weight[((oc * ipg + icg) * g.kernel + ky) * g.kernel + kx] *
                   in[(ic * g.in_h + iy) * g.in_w + ix];
            }
          }
        }
        out[(oc * oh + oy) * ow + ox] = s;
      }
    }
  }
}

void conv2d_backward_input(const Conv2dGeometry& g, const double* grad_out, const double* weight,
                           double* grad_in) {
  const Index oh = g.out_h(), ow = g.out_w();
  const Index ipg = g.in_per_group(), opg = g.out_per_group();
  for (Index oc = 0; oc < g.out_channels; ++oc) {
    const Index grp = oc / opg;
    for (Index oy = 0; oy < oh; ++oy) {
      for (Index ox = 0; ox < ow; ++ox) {
        const double go = grad_out[(oc * oh + oy) * ow + ox];
        for (Index icg = 0; icg < ipg; ++icg) {
          const Index ic = grp * ipg + icg;
          for (Index ky = 0; ky < g.kernel; ++ky) {
            const Index iy = oy * g.stride - g.pad + ky;
            if (iy < 0 || iy >= g.in_h) continue;
            for (Index kx = 0; kx < g.kernel; ++kx) {
              const Index ix = ox * g.stride - g.pad + kx;
              if (ix < 0 || ix >= g.in_w) continue;
              grad_in[(ic * g.in_h + iy) * g.in_w + ix] +=
                  go * weight[((oc * ipg + icg) * g.kernel + ky) * g.kernel + kx];
            }
          }
        }
      }
    }
  }
}

void conv2d_backward_weight(const Conv2dGeometry& g, const double* grad_out, const double* in,
                            double* grad_weight, double* grad_bias) {
  const Index oh = g.out_h(), ow = g.out_w();
  const Index ipg = g.in_per_group(), opg = g.out_per_group();
  for (Index oc = 0; oc < g.out_channels; ++oc) {
    const Index grp = oc / opg;
    for (Index oy = 0; oy < oh; ++oy) {
      for (Index ox = 0; ox < ow; ++ox) {
        const double go = grad_out[(oc * oh + oy) * ow + ox];
        if (grad_bias) grad_bias[oc] += go;
        for (Index icg = 0; icg < ipg; ++icg) {
          const Index ic = grp * ipg + icg;
          for (Index ky = 0; ky < g.kernel; ++ky) {
            const Index iy = oy * g.stride - g.pad + ky;
            if (iy < 0 || iy >= g.in_h) continue;
            for (Index kx = 0; kx < g.kernel; ++kx) {
              const Index ix = ox * g.stride - g.pad + kx;
              if (ix < 0 || ix >= g.in_w) continue;
              grad_weight[((oc * ipg + icg) * g.kernel + ky) * g.kernel + kx] +=
                  go * in[(ic * g.in_h + iy) * g.in_w + ix];
            }
          }
        }
      }
    }
  }
}

namespace {

// Source coordinate and the two taps for one output index (align_corners=false).
struct Tap {
  Index i0, i1;
  double w0, w1;
};

Tap bilinear_tap(Index out_i, Index in_n, Index out_n) {
  const double scale = static_cast<double>(in_n) / static_cast<double>(out_n);
  double src = (static_cast<double>(out_i) + 0.5) * scale - 0.5;
  if (src < 0.0) src = 0.0;
  Index i0 = static_cast<Index>(std::floor(src));
  if (i0 > in_n - 1) i0 = in_n - 1;
  const Index i1 = std::min(i0 + 1, in_n - 1);
  const double frac = src - static_cast<double>(i0);
  return {i0, i1, 1.0 - frac, frac};
}

}  // namespace

void bilinear_forward(Index channels, Index in_h, Index in_w, Index out_h, Index out_w, const double* in,
                      double* out) {
  for (Index c = 0; c < channels; ++c) {
    const double* src = in + c * in_h * in_w;
    for (Index y = 0; y < out_h; ++y) {
      const Tap ty = bilinear_tap(y, in_h, out_h);
      for (Index x = 0; x < out_w; ++x) {
        const Tap tx = bilinear_tap(x, in_w, out_w);
        out[(c * out_h + y) * out_w + x] =
            ty.w0 * (tx.w0 * src[ty.i0 * in_w + tx.i0] + tx.w1 * src[ty.i0 * in_w + tx.i1]) +
            ty.w1 * (tx.w0 * src[ty.i1 * in_w + tx.i0] + tx.w1 * src[ty.i1 * in_w + tx.i1]);
      }
    }
  }
}

void bilinear_backward(Index channels, Index in_h, Index in_w, Index out_h, Index out_w,
                       const double* grad_out, double* grad_in) {
  for (Index c = 0; c < channels; ++c) {
    double* dst = grad_in + c * in_h * in_w;
    for (Index y = 0; y < out_h; ++y) {
      const Tap ty = bilinear_tap(y, in_h, out_h);
      for (Index x = 0; x < out_w; ++x) {
        const Tap tx = bilinear_tap(x, in_w, out_w);
        const double go = grad_out[(c * out_h + y) * out_w + x];
        dst[ty.i0 * in_w + tx.i0] += go * ty.w0 * tx.w0;
        dst[ty.i0 * in_w + tx.i1] += go * ty.w0 * tx.w1;
        dst[ty.i1 * in_w + tx.i0] += go * ty.w1 * tx.w0;
        dst[ty.i1 * in_w + tx.i1] += go * ty.w1 * tx.w1;
      }
    }
  }
}

void normalize_rows_forward(Index rows, Index cols, double eps, const double* x, double* y, double* mean,
                            double* rstd) {
  for (Index r = 0; r < rows; ++r) {
    const double* xr = x + r * cols;
    double m = 0.0;
    for (Index c = 0; c < cols; ++c) m += xr[c];
    m /= static_cast<double>(cols);
    double v = 0.0;
    for (Index c = 0; c < cols; ++c) v += (xr[c] - m) * (xr[c] - m);
    v /= static_cast<double>(cols);
    const double rs = 1.0 / std::sqrt(v + eps);
    mean[r] = m;
    rstd[r] = rs;
    for (Index c = 0; c < cols; ++c) y[r * cols + c] = (xr[c] - m) * rs;
  }
}

void normalize_rows_backward(Index rows, Index cols, const double* y, const double* rstd, const double* grad_y,
                             double* grad_x) {
  const double n = static_cast<double>(cols);
  for (Index r = 0; r < rows; ++r) {
    const double* yr = y + r * cols;
    const double* gr = grad_y + r * cols;
    double sum_g = 0.0, sum_gy = 0.0;
    for (Index c = 0; c < cols; ++c) {
      sum_g += gr[c];
      sum_gy += gr[c] * yr[c];
    }
    for (Index c = 0; c < cols; ++c) {
      grad_x[r * cols + c] += rstd[r] * (gr[c] - sum_g / n - yr[c] * sum_gy / n);
    }
  }
}

void softmax_rows_forward(Index rows, Index cols, const double* x, double* y) {
  for (Index r = 0; r < rows; ++r) {
    const double* xr = x + r * cols;
    double mx = xr[0];
    for (Index c = 1; c < cols; ++c) mx = std::max(mx, xr[c]);
    double s = 0.0;
    for (Index c = 0; c < cols; ++c) {
      y[r * cols + c] = std::exp(xr[c] - mx);
      s += y[r * cols + c];
    }
    for (Index c = 0; c < cols; ++c) y[r * cols + c] /= s;
  }
}

void softmax_rows_backward(Index rows, Index cols, const double* y, const double* grad_y, double* grad_x) {
  for (Index r = 0; r < rows; ++r) {
    double dot = 0.0;
    for (Index c = 0; c < cols; ++c) dot += y[r * cols + c] * grad_y[r * cols + c];
    for (Index c = 0; c < cols; ++c) grad_x[r * cols + c] += y[r * cols + c] * (grad_y[r * cols + c] - dot);
  }
}

void histogram(const double* values, Index n, Index bins, double* counts) {
  std::fill(counts, counts + bins, 0.0);
  for (Index i = 0; i < n; ++i) {
    const double v = std::clamp(values[i], 0.0, 1.0);
    Index b = static_cast<Index>(v * static_cast<double>(bins));
    if (b >= bins) b = bins - 1;
    counts[b] += 1.0;
  }
}

void separable_filter_valid(Index channels, Index h, Index w, const double* in, const double* taps,
                            Index taps_len, double* out) {
  const Index oh = h - taps_len + 1, ow = w - taps_len + 1;
  for (Index c = 0; c < channels; ++c) {
    for (Index y = 0; y < oh; ++y) {
      for (Index x = 0; x < ow; ++x) {
        double s = 0.0;
        for (Index i = 0; i < taps_len; ++i) {
          for (Index j = 0; j < taps_len; ++j) {
            s += taps[i] * taps[j] * in[(c * h + y + i) * w + x + j];
          }
        }
        out[(c * oh + y) * ow + x] = s;
      }
    }
  }
}

}  // namespace uranker::kernels::serial
