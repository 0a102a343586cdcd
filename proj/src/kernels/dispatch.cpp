#include <atomic>

#include "uranker/kernels.hpp"

namespace uranker::kernels {

namespace {
std::atomic<Backend> g_backend{Backend::Parallel};
}

void set_backend(Backend b) { g_backend.store(b, std::memory_order_relaxed); }
Backend backend() { return g_backend.load(std::memory_order_relaxed); }

#define URANKER_DISPATCH(name, ...)                                      \
  if (backend() == Backend::Serial) return serial::name(__VA_ARGS__);    \
  return parallel::name(__VA_ARGS__)

void gemm(bool ta, bool tb, Index m, Index n, Index k, const double* a, const double* b, double* c, bool acc) {
  URANKER_DISPATCH(gemm, ta, tb, m, n, k, a, b, c, acc);
}
void conv2d_forward(const Conv2dGeometry& g, const double* in, const double* w, const double* bias,
                    double* out) {
  URANKER_DISPATCH(conv2d_forward, g, in, w, bias, out);
}
void conv2d_backward_input(const Conv2dGeometry& g, const double* go, const double* w, double* gi) {
  URANKER_DISPATCH(conv2d_backward_input, g, go, w, gi);
}
void conv2d_backward_weight(const Conv2dGeometry& g, const double* go, const double* in, double* gw,
                            double* gb) {
  URANKER_DISPATCH(conv2d_backward_weight, g, go, in, gw, gb);
}
void bilinear_forward(Index c, Index ih, Index iw, Index oh, Index ow, const double* in, double* out) {
  URANKER_DISPATCH(bilinear_forward, c, ih, iw, oh, ow, in, out);
}
void bilinear_backward(Index c, Index ih, Index iw, Index oh, Index ow, const double* go, double* gi) {
  URANKER_DISPATCH(bilinear_backward, c, ih, iw, oh, ow, go, gi);
}
void normalize_rows_forward(Index rows, Index cols, double eps, const double* x, double* y, double* mean,
                            double* rstd) {
  URANKER_DISPATCH(normalize_rows_forward, rows, cols, eps, x, y, mean, rstd);
}
void normalize_rows_backward(Index rows, Index cols, const double* y, const double* rstd, const double* gy,
                             double* gx) {
  URANKER_DISPATCH(normalize_rows_backward, rows, cols, y, rstd, gy, gx);
}
void softmax_rows_forward(Index rows, Index cols, const double* x, double* y) {
  URANKER_DISPATCH(softmax_rows_forward, rows, cols, x, y);
}
void softmax_rows_backward(Index rows, Index cols, const double* y, const double* gy, double* gx) {
  URANKER_DISPATCH(softmax_rows_backward, rows, cols, y, gy, gx);
}
void histogram(const double* values, Index n, Index bins, double* counts) {
  URANKER_DISPATCH(histogram, values, n, bins, counts);
}
void separable_filter_valid(Index c, Index h, Index w, const double* in, const double* taps, Index len,
                            double* out) {
  URANKER_DISPATCH(separable_filter_valid, c, h, w, in, taps, len, out);
}

#undef URANKER_DISPATCH

}  // namespace uranker::kernels
