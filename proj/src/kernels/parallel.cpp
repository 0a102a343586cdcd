// OpenMP kernels. Loop orders are chosen so that each thread owns a
// disjoint slice of the output; no atomics are needed anywhere.

#include <omp.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "uranker/kernels.hpp"

namespace uranker::kernels::parallel {

namespace {

// Below this many multiply-adds a parallel region costs more than it saves.
constexpr Index kGrain = 1 << 14;

struct Tap {
  Index i0, i1;
  double w0, w1;
};

Tap bilinear_tap(Index out_i, Index in_n, Index out_n) {
  const double scale = static_cast<double>(in_n) / static_cast<double>(out_n);
  const double src = std::max(0.0, (static_cast<double>(out_i) + 0.5) * scale - 0.5);
  const Index i0 = std::min(static_cast<Index>(src), in_n - 1);
  const Index i1 = std::min(i0 + 1, in_n - 1);
  const double frac = src - static_cast<double>(i0);
  return {i0, i1, 1.0 - frac, frac};
}

std::vector<Tap> taps_for(Index in_n, Index out_n) {
  std::vector<Tap> t(static_cast<std::size_t>(out_n));
  for (Index i = 0; i < out_n; ++i) t[static_cast<std::size_t>(i)] = bilinear_tap(i, in_n, out_n);
  return t;
}

}  // namespace

void gemm(bool trans_a, bool trans_b, Index m, Index n, Index k, const double* a, const double* b,
          double* c, bool accumulate) {
  const Index a_row = trans_a ? 1 : k, a_col = trans_a ? m : 1;
  const Index b_row = trans_b ? 1 : n, b_col = trans_b ? k : 1;
#pragma omp parallel for schedule(static) if (m * n * k >= kGrain)
  for (Index i = 0; i < m; ++i) {
    double* ci = c + i * n;
    if (!accumulate) std::fill(ci, ci + n, 0.0);
    for (Index p = 0; p < k; ++p) {
      const double av = a[i * a_row + p * a_col];
      const double* bp = b + p * b_row;
      for (Index j = 0; j < n; ++j) ci[j] += av * bp[j * b_col];
    }
  }
}

void conv2d_forward(const Conv2dGeometry& g, const double* in, const double* weight, const double* bias,
                    double* out) {
  const Index oh = g.out_h(), ow = g.out_w();
  const Index ipg = g.in_per_group(), opg = g.out_per_group();
  const Index work = g.out_channels * oh * ow * ipg * g.kernel * g.kernel;
#pragma omp parallel for schedule(static) if (work >= kGrain)
  for (Index oc = 0; oc < g.out_channels; ++oc) {
    const Index grp = oc / opg;
    double* dst = out + oc * oh * ow;
    std::fill(dst, dst + oh * ow, bias ? bias[oc] : 0.0);
    for (Index icg = 0; icg < ipg; ++icg) {
      const double* src = in + (grp * ipg + icg) * g.in_h * g.in_w;
      for (Index ky = 0; ky < g.kernel; ++ky) {
        for (Index kx = 0; kx < g.kernel; ++kx) {
          const double wv = weight[((oc * ipg + icg) * g.kernel + ky) * g.kernel + kx];
          for (Index oy = 0; oy < oh; ++oy) {
            const Index iy = oy * g.stride - g.pad + ky;
            if (iy < 0 || iy >= g.in_h) continue;
            const double* row = src + iy * g.in_w;
            double* orow = dst + oy * ow;
            for (Index ox = 0; ox < ow; ++ox) {
              const Index ix = ox * g.stride - g.pad + kx;
              if (ix < 0 || ix >= g.in_w) continue;
              orow[ox] += wv * row[ix];
            }
          }
        }
      }
    }
  }
}

void conv2d_backward_input(const Conv2dGeometry& g, const double* grad_out, const double* weight,
                           double* grad_in) {
  const Index oh = g.out_h(), ow = g.out_w();
  const Index ipg = g.in_per_group(), opg = g.out_per_group();
  const Index work = g.out_channels * oh * ow * ipg * g.kernel * g.kernel;
  // One thread per input channel: the scatter only touches that channel.
#pragma omp parallel for schedule(static) if (work >= kGrain)
  for (Index ic = 0; ic < g.in_channels; ++ic) {
    const Index grp = ic / ipg, icg = ic % ipg;
    double* dst = grad_in + ic * g.in_h * g.in_w;
    for (Index ocg = 0; ocg < opg; ++ocg) {
      const Index oc = grp * opg + ocg;
      const double* go = grad_out + oc * oh * ow;
      for (Index ky = 0; ky < g.kernel; ++ky) {
        for (Index kx = 0; kx < g.kernel; ++kx) {
          const double wv = weight[((oc * ipg + icg) * g.kernel + ky) * g.kernel + kx];
          for (Index oy = 0; oy < oh; ++oy) {
            const Index iy = oy * g.stride - g.pad + ky;
            if (iy < 0 || iy >= g.in_h) continue;
            for (Index ox = 0; ox < ow; ++ox) {
              const Index ix = ox * g.stride - g.pad + kx;
              if (ix < 0 || ix >= g.in_w) continue;
              dst[iy * g.in_w + ix] += wv * go[oy * ow + ox];
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
  const Index work = g.out_channels * oh * ow * ipg * g.kernel * g.kernel;
#pragma omp parallel for schedule(static) if (work >= kGrain)
  for (Index oc = 0; oc < g.out_channels; ++oc) {
    const Index grp = oc / opg;
    const double* go = grad_out + oc * oh * ow;
    if (grad_bias) {
      double s = 0.0;
      for (Index i = 0; i < oh * ow; ++i) s += go[i];
      grad_bias[oc] += s;
    }
    for (Index icg = 0; icg < ipg; ++icg) {
      const double* src = in + (grp * ipg + icg) * g.in_h * g.in_w;
      for (Index ky = 0; ky < g.kernel; ++ky) {
        for (Index kx = 0; kx < g.kernel; ++kx) {
          double s = 0.0;
          for (Index oy = 0; oy < oh; ++oy) {
            const Index iy = oy * g.stride - g.pad + ky;
            if (iy < 0 || iy >= g.in_h) continue;
            for (Index ox = 0; ox < ow; ++ox) {
              const Index ix = ox * g.stride - g.pad + kx;
              if (ix < 0 || ix >= g.in_w) continue;
              s += go[oy * ow + ox] * src[iy * g.in_w + ix];
            }
          }
          grad_weight[((oc * ipg + icg) * g.kernel + ky) * g.kernel + kx] += s;
        }
      }
    }
  }
}

void bilinear_forward(Index channels, Index in_h, Index in_w, Index out_h, Index out_w, const double* in,
                      double* out) {
  const auto ty = taps_for(in_h, out_h);
  const auto tx = taps_for(in_w, out_w);
#pragma omp parallel for schedule(static) if (channels * out_h * out_w >= kGrain)
  for (Index c = 0; c < channels; ++c) {
    const double* src = in + c * in_h * in_w;
    for (Index y = 0; y < out_h; ++y) {
      const Tap& a = ty[static_cast<std::size_t>(y)];
      for (Index x = 0; x < out_w; ++x) {
        const Tap& b = tx[static_cast<std::size_t>(x)];
        out[(c * out_h + y) * out_w + x] =
            a.w0 * (b.w0 * src[a.i0 * in_w + b.i0] + b.w1 * src[a.i0 * in_w + b.i1]) +
            a.w1 * (b.w0 * src[a.i1 * in_w + b.i0] + b.w1 * src[a.i1 * in_w + b.i1]);
      }
    }
  }
}

void bilinear_backward(Index channels, Index in_h, Index in_w, Index out_h, Index out_w,
                       const double* grad_out, double* grad_in) {
  const auto ty = taps_for(in_h, out_h);
  const auto tx = taps_for(in_w, out_w);
#pragma omp parallel for schedule(static) if (channels * out_h * out_w >= kGrain)
  for (Index c = 0; c < channels; ++c) {
    double* dst = grad_in + c * in_h * in_w;
    for (Index y = 0; y < out_h; ++y) {
      const Tap& a = ty[static_cast<std::size_t>(y)];
      for (Index x = 0; x < out_w; ++x) {
        const Tap& b = tx[static_cast<std::size_t>(x)];
        const double go = grad_out[(c * out_h + y) * out_w + x];
        dst[a.i0 * in_w + b.i0] += go * a.w0 * b.w0;
        dst[a.i0 * in_w + b.i1] += go * a.w0 * b.w1;
        dst[a.i1 * in_w + b.i0] += go * a.w1 * b.w0;
        dst[a.i1 * in_w + b.i1] += go * a.w1 * b.w1;
      }
    }
  }
}

void normalize_rows_forward(Index rows, Index cols, double eps, const double* x, double* y, double* mean,
                            double* rstd) {
#pragma omp parallel for schedule(static) if (rows * cols >= kGrain)
  for (Index r = 0; r < rows; ++r) {
    const double* xr = x + r * cols;
    double s = 0.0;
    for (Index c = 0; c < cols; ++c) s += xr[c];
    const double m = s / static_cast<double>(cols);
    double v = 0.0;
    for (Index c = 0; c < cols; ++c) v += (xr[c] - m) * (xr[c] - m);
    const double rs = 1.0 / std::sqrt(v / static_cast<double>(cols) + eps);
    mean[r] = m;
    rstd[r] = rs;
    double* yr = y + r * cols;
    for (Index c = 0; c < cols; ++c) yr[c] = (xr[c] - m) * rs;
  }
}

void normalize_rows_backward(Index rows, Index cols, const double* y, const double* rstd, const double* grad_y,
                             double* grad_x) {
  const double inv_n = 1.0 / static_cast<double>(cols);
#pragma omp parallel for schedule(static) if (rows * cols >= kGrain)
  for (Index r = 0; r < rows; ++r) {
    const double* yr = y + r * cols;
    const double* gr = grad_y + r * cols;
    double sum_g = 0.0, sum_gy = 0.0;
    for (Index c = 0; c < cols; ++c) {
      sum_g += gr[c];
      sum_gy += gr[c] * yr[c];
    }
    const double mg = sum_g * inv_n, mgy = sum_gy * inv_n;
    double* gx = grad_x + r * cols;
    for (Index c = 0; c < cols; ++c) gx[c] += rstd[r] * (gr[c] - mg - yr[c] * mgy);
  }
}

void softmax_rows_forward(Index rows, Index cols, const double* x, double* y) {
#pragma omp parallel for schedule(static) if (rows * cols >= kGrain)
  for (Index r = 0; r < rows; ++r) {
    const double* xr = x + r * cols;
    double* yr = y + r * cols;
    const double mx = *std::max_element(xr, xr + cols);
    double s = 0.0;
    for (Index c = 0; c < cols; ++c) s += (yr[c] = std::exp(xr[c] - mx));
    const double inv = 1.0 / s;
    for (Index c = 0; c < cols; ++c) yr[c] *= inv;
  }
}

void softmax_rows_backward(Index rows, Index cols, const double* y, const double* grad_y, double* grad_x) {
#pragma omp parallel for schedule(static) if (rows * cols >= kGrain)
  for (Index r = 0; r < rows; ++r) {
    const double* yr = y + r * cols;
    const double* gr = grad_y + r * cols;
    double dot = 0.0;
    for (Index c = 0; c < cols; ++c) dot += yr[c] * gr[c];
    double* gx = grad_x + r * cols;
    for (Index c = 0; c < cols; ++c) gx[c] += yr[c] * (gr[c] - dot);
  }
}

void histogram(const double* values, Index n, Index bins, double* counts) {
  std::fill(counts, counts + bins, 0.0);
  const double scale = static_cast<double>(bins);
#pragma omp parallel if (n >= kGrain)
  {
    std::vector<double> local(static_cast<std::size_t>(bins), 0.0);
#pragma omp for schedule(static) nowait
    for (Index i = 0; i < n; ++i) {
      const double v = std::clamp(values[i], 0.0, 1.0);
      const Index b = std::min(static_cast<Index>(v * scale), bins - 1);
      local[static_cast<std::size_t>(b)] += 1.0;
    }
#pragma omp critical(uranker_histogram_merge)
    for (Index b = 0; b < bins; ++b) counts[b] += local[static_cast<std::size_t>(b)];
  }
}

void separable_filter_valid(Index channels, Index h, Index w, const double* in, const double* taps,
                            Index taps_len, double* out) {
  const Index oh = h - taps_len + 1, ow = w - taps_len + 1;
  // Horizontal pass into a per-channel scratch, then vertical pass.
#pragma omp parallel for schedule(static) if (channels * h * w * taps_len >= kGrain)
  for (Index c = 0; c < channels; ++c) {
    std::vector<double> rowpass(static_cast<std::size_t>(h * ow));
    const double* src = in + c * h * w;
    for (Index y = 0; y < h; ++y) {
      for (Index x = 0; x < ow; ++x) {
        double s = 0.0;
        for (Index j = 0; j < taps_len; ++j) s += taps[j] * src[y * w + x + j];
        rowpass[static_cast<std::size_t>(y * ow + x)] = s;
      }
    }
    double* dst = out + c * oh * ow;
    for (Index y = 0; y < oh; ++y) {
      for (Index x = 0; x < ow; ++x) {
        double s = 0.0;
        for (Index i = 0; i < taps_len; ++i) s += taps[i] * rowpass[static_cast<std::size_t>((y + i) * ow + x)];
        dst[y * ow + x] = s;
      }
    }
  }
}

}  // namespace uranker::kernels::parallel
