#pragma once

// Numerical kernels behind the autodiff ops. Every kernel exists twice:
// `serial::` is the straightforward reference used by the tests as an
// oracle, `parallel::` is the OpenMP version used by default. The unscoped
// functions dispatch on the process-wide backend.
//
// Conventions: "accumulate" outputs are added into (+=), everything else is
// overwritten. Images are C×H×W, row-major.

#include "uranker/tensor.hpp"

namespace uranker::kernels {

enum class Backend { Serial, Parallel };

void set_backend(Backend b);
Backend backend();

struct Conv2dGeometry {
  Index in_channels = 0;
  Index in_h = 0;
  Index in_w = 0;
  Index out_channels = 0;
  Index kernel = 1;
  Index stride = 1;
  Index pad = 0;
  Index groups = 1;

  Index out_h() const { return (in_h + 2 * pad - kernel) / stride + 1; }
  Index out_w() const { return (in_w + 2 * pad - kernel) / stride + 1; }
  Index in_per_group() const { return in_channels / groups; }
  Index out_per_group() const { return out_channels / groups; }
};

#define URANKER_KERNEL_DECLS                                                                       \
  /* C[m×n] (+)= op(A)·op(B); op(A) is m×k, op(B) is k×n. A is stored k×m when trans_a. */        \
  void gemm(bool trans_a, bool trans_b, Index m, Index n, Index k, const double* a, const double* b, \
            double* c, bool accumulate);                                                           \
  void conv2d_forward(const Conv2dGeometry& g, const double* in, const double* weight,             \
                      const double* bias, double* out);                                            \
  /* accumulates into grad_in */                                                                   \
  void conv2d_backward_input(const Conv2dGeometry& g, const double* grad_out, const double* weight, \
                             double* grad_in);                                                     \
  /* accumulates into grad_weight and (when non-null) grad_bias */                                 \
  void conv2d_backward_weight(const Conv2dGeometry& g, const double* grad_out, const double* in,   \
                              double* grad_weight, double* grad_bias);                             \
  /* align_corners=false bilinear resampling of each channel */                                    \
  void bilinear_forward(Index channels, Index in_h, Index in_w, Index out_h, Index out_w,           \
                        const double* in, double* out);                                            \
  void bilinear_backward(Index channels, Index in_h, Index in_w, Index out_h, Index out_w,         \
                         const double* grad_out, double* grad_in);                                 \
  /* zero-mean unit-variance rows; writes per-row mean and 1/std */                                \
  void normalize_rows_forward(Index rows, Index cols, double eps, const double* x, double* y,       \
                              double* mean, double* rstd);                                         \
  void normalize_rows_backward(Index rows, Index cols, const double* y, const double* rstd,        \
                               const double* grad_y, double* grad_x);                              \
  void softmax_rows_forward(Index rows, Index cols, const double* x, double* y);                   \
  void softmax_rows_backward(Index rows, Index cols, const double* y, const double* grad_y,        \
                             double* grad_x);                                                      \
  /* counts of values in [0,1] over `bins` equal intervals, last one right-closed. */              \
  /* values outside [0,1] are clamped first. counts is overwritten. */                             \
  void histogram(const double* values, Index n, Index bins, double* counts);                       \
  /* "valid" 2-D correlation of each channel with a separable kernel of odd length */              \
  void separable_filter_valid(Index channels, Index h, Index w, const double* in,                  \
                              const double* taps, Index taps_len, double* out);

namespace serial {
URANKER_KERNEL_DECLS
}  // namespace serial

namespace parallel {
URANKER_KERNEL_DECLS
}  // namespace parallel

URANKER_KERNEL_DECLS

#undef URANKER_KERNEL_DECLS

}  // namespace uranker::kernels
