#include "dtsl/ops.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <memory>

#include "dtsl/blas.hpp"
#include "dtsl/errors.hpp"

namespace dtsl::ops {
namespace {

struct ConvDims {
  std::size_t batch, cin, h, w, cout;
  bool batched;  // rank-4 input
  std::size_t hw() const { return h * w; }
  std::size_t k() const { return cin * 9; }
};

ConvDims conv_dims(const Tensor& x, const Tensor& w, const Tensor& b) {
  if (x.rank() != 3 && x.rank() != 4) {
    throw ShapeError("conv2d: input must be [C,H,W] or [B,C,H,W], got " + shape_to_string(x.shape()));
  }
  if (w.rank() != 4 || w.dim(2) != 3 || w.dim(3) != 3) {
    throw ShapeError("conv2d: filters must be [Cout,Cin,3,3], got " + shape_to_string(w.shape()));
  }
  ConvDims d;
  d.batched = x.rank() == 4;
  d.batch = d.batched ? x.dim(0) : 1;
  d.cin = x.dim(d.batched ? 1 : 0);
  d.h = x.dim(d.batched ? 2 : 1);
  d.w = x.dim(d.batched ? 3 : 2);
  d.cout = w.dim(0);
  if (w.dim(1) != d.cin) {
    throw ShapeError("conv2d: input has " + std::to_string(d.cin) + " channels but filters expect " +
                     std::to_string(w.dim(1)));
  }
  if (b.rank() != 1 || b.dim(0) != d.cout) {
    throw ShapeError("conv2d: biases must be [Cout], got " + shape_to_string(b.shape()));
  }
  return d;
}

// Caffe-style patch matrix for one sample, written into a strided block:
// row r = (c*3 + kh)*3 + kw of length row_stride, sample block starting at
// col_offset, holding x[c, oh+kh-1, ow+kw-1] for each output pixel (zero
// outside the image).
void im2col_sample(const double* x, std::size_t cin, std::size_t h, std::size_t w, double* col,
                   std::size_t row_stride, std::size_t col_offset) {
  const std::size_t hw = h * w;
  for (std::size_t c = 0; c < cin; ++c) {
    for (std::size_t kh = 0; kh < 3; ++kh) {
      for (std::size_t kw = 0; kw < 3; ++kw) {
        double* dst = col + ((c * 3 + kh) * 3 + kw) * row_stride + col_offset;
        const double* src_plane = x + c * hw;
        for (std::size_t oh = 0; oh < h; ++oh) {
          double* row = dst + oh * w;
          const std::ptrdiff_t ih = static_cast<std::ptrdiff_t>(oh + kh) - 1;
          if (ih < 0 || ih >= static_cast<std::ptrdiff_t>(h)) {
            std::memset(row, 0, w * sizeof(double));
            continue;
          }
          const double* src = src_plane + static_cast<std::size_t>(ih) * w;
          if (kw == 0) {
            row[0] = 0.0;
            std::memcpy(row + 1, src, (w - 1) * sizeof(double));
          } else if (kw == 1) {
            std::memcpy(row, src, w * sizeof(double));
          } else {
            std::memcpy(row, src + 1, (w - 1) * sizeof(double));
            row[w - 1] = 0.0;
          }
        }
      }
    }
  }
}

// Transpose of im2col: scatter-add the patch matrix block back onto the image.
void col2im_sample(const double* col, std::size_t cin, std::size_t h, std::size_t w, double* x,
                   std::size_t row_stride, std::size_t col_offset) {
  const std::size_t hw = h * w;
  for (std::size_t c = 0; c < cin; ++c) {
    for (std::size_t kh = 0; kh < 3; ++kh) {
      for (std::size_t kw = 0; kw < 3; ++kw) {
        const double* src_rows = col + ((c * 3 + kh) * 3 + kw) * row_stride + col_offset;
        double* dst_plane = x + c * hw;
        for (std::size_t oh = 0; oh < h; ++oh) {
          const double* row = src_rows + oh * w;
          const std::ptrdiff_t ih = static_cast<std::ptrdiff_t>(oh + kh) - 1;
          if (ih < 0 || ih >= static_cast<std::ptrdiff_t>(h)) continue;
          double* dst = dst_plane + static_cast<std::size_t>(ih) * w;
          if (kw == 0) {
            for (std::size_t ow = 1; ow < w; ++ow) dst[ow - 1] += row[ow];
          } else if (kw == 1) {
            for (std::size_t ow = 0; ow < w; ++ow) dst[ow] += row[ow];
          } else {
            for (std::size_t ow = 0; ow + 1 < w; ++ow) dst[ow + 1] += row[ow];
          }
        }
      }
    }
  }
}

std::unique_ptr<double[]> build_col(const Tensor& x, const ConvDims& d) {
  auto col = std::make_unique_for_overwrite<double[]>(d.k() * d.batch * d.hw());
  const std::size_t sample = d.cin * d.hw();
  for (std::size_t b = 0; b < d.batch; ++b) {
    im2col_sample(x.data() + b * sample, d.cin, d.h, d.w, col.get(), d.batch * d.hw(), b * d.hw());
  }
  return col;
}

// [B, Cout, HW] -> [Cout, B*HW]
std::unique_ptr<double[]> pack_by_channel(const Tensor& y, const ConvDims& d) {
  auto packed = std::make_unique_for_overwrite<double[]>(d.cout * d.batch * d.hw());
  for (std::size_t b = 0; b < d.batch; ++b) {
    for (std::size_t co = 0; co < d.cout; ++co) {
      std::memcpy(packed.get() + co * d.batch * d.hw() + b * d.hw(), y.data() + (b * d.cout + co) * d.hw(),
                  d.hw() * sizeof(double));
    }
  }
  return packed;
}

}  // namespace

Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& b) {
  const ConvDims d = conv_dims(x, w, b);
  const std::size_t bhw = d.batch * d.hw();
  auto col = build_col(x, d);
  auto y_packed = std::make_unique_for_overwrite<double[]>(d.cout * bhw);
  // y_packed[Cout, B*HW] = w[Cout, K] * col[K, B*HW]
  blas::gemm(false, false, d.cout, bhw, d.k(), 1.0, w.data(), d.k(), col.get(), bhw, 0.0, y_packed.get(), bhw);

  Shape out_shape = d.batched ? Shape{d.batch, d.cout, d.h, d.w} : Shape{d.cout, d.h, d.w};
  Tensor y(std::move(out_shape));
  for (std::size_t s = 0; s < d.batch; ++s) {
    for (std::size_t co = 0; co < d.cout; ++co) {
      const double* src = y_packed.get() + co * bhw + s * d.hw();
      double* dst = y.data() + (s * d.cout + co) * d.hw();
      const double bias = b[co];
      for (std::size_t p = 0; p < d.hw(); ++p) dst[p] = src[p] + bias;
    }
  }
  return y;
}

void conv2d_backward(const Tensor& x, const Tensor& w, const Tensor& dy, Tensor* dx, Tensor* dw, Tensor* db) {
  Tensor bias_probe({w.dim(0)});
  const ConvDims d = conv_dims(x, w, bias_probe);
  if (!dy.same_shape(Tensor(d.batched ? Shape{d.batch, d.cout, d.h, d.w} : Shape{d.cout, d.h, d.w}))) {
    throw ShapeError("conv2d_backward: output gradient shape " + shape_to_string(dy.shape()) + " is wrong");
  }
  const std::size_t bhw = d.batch * d.hw();
  auto dy_packed = pack_by_channel(dy, d);

  if (db != nullptr) {
    for (std::size_t co = 0; co < d.cout; ++co) {
      double acc = 0.0;
      const double* row = dy_packed.get() + co * bhw;
      for (std::size_t p = 0; p < bhw; ++p) acc += row[p];
      (*db)[co] += acc;
    }
  }
  if (dw != nullptr) {
    auto col = build_col(x, d);
    // dw[Cout, K] += dy_packed[Cout, B*HW] * col[K, B*HW]^T
    blas::gemm(false, true, d.cout, d.k(), bhw, 1.0, dy_packed.get(), bhw, col.get(), bhw, 1.0, dw->data(), d.k());
  }
  if (dx != nullptr) {
    auto dcol = std::make_unique_for_overwrite<double[]>(d.k() * bhw);
    // dcol[K, B*HW] = w[Cout, K]^T * dy_packed[Cout, B*HW]
    blas::gemm(true, false, d.k(), bhw, d.cout, 1.0, w.data(), d.k(), dy_packed.get(), bhw, 0.0, dcol.get(), bhw);
    const std::size_t sample = d.cin * d.hw();
    for (std::size_t s = 0; s < d.batch; ++s) {
      col2im_sample(dcol.get(), d.cin, d.h, d.w, dx->data() + s * sample, bhw, s * d.hw());
    }
  }
}

Tensor maxpool2(const Tensor& x, std::vector<std::size_t>* argmax) {
  if (x.rank() != 3 && x.rank() != 4) {
    throw ShapeError("maxpool2: input must be [C,H,W] or [B,C,H,W], got " + shape_to_string(x.shape()));
  }
  const bool batched = x.rank() == 4;
  const std::size_t planes = batched ? x.dim(0) * x.dim(1) : x.dim(0);
  const std::size_t h = x.dim(batched ? 2 : 1);
  const std::size_t w = x.dim(batched ? 3 : 2);
  if (h < 2 || w < 2) {
    throw ShapeError("maxpool2: spatial extent " + std::to_string(h) + "x" + std::to_string(w) + " is below 2x2");
  }
  const std::size_t oh = h / 2, ow = w / 2;
  Shape out_shape = batched ? Shape{x.dim(0), x.dim(1), oh, ow} : Shape{x.dim(0), oh, ow};
  Tensor y(std::move(out_shape));
  if (argmax != nullptr) argmax->assign(y.size(), 0);

  for (std::size_t pl = 0; pl < planes; ++pl) {
    const double* src = x.data() + pl * h * w;
    double* dst = y.data() + pl * oh * ow;
    for (std::size_t r = 0; r < oh; ++r) {
      for (std::size_t c = 0; c < ow; ++c) {
        const std::size_t base = 2 * r * w + 2 * c;
        std::size_t best = base;
        double best_v = src[base];
        for (const std::size_t off : {base + 1, base + w, base + w + 1}) {
          if (src[off] > best_v) {
            best_v = src[off];
            best = off;
          }
        }
        dst[r * ow + c] = best_v;
        if (argmax != nullptr) (*argmax)[pl * oh * ow + r * ow + c] = pl * h * w + best;
      }
    }
  }
  return y;
}

void maxpool2_backward(const std::vector<std::size_t>& argmax, const Tensor& dy, Tensor& dx) {
  if (argmax.size() != dy.size()) throw ShapeError("maxpool2_backward: argmax record does not match gradient");
  for (std::size_t i = 0; i < argmax.size(); ++i) dx[argmax[i]] += dy[i];
}

Tensor relu(const Tensor& x) {
  Tensor y(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] > 0.0 ? x[i] : 0.0;
  return y;
}

void relu_backward(const Tensor& x, const Tensor& dy, Tensor& dx) {
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (x[i] > 0.0) dx[i] += dy[i];
  }
}

namespace {

struct DenseDims {
  std::size_t batch, in, out;
  bool batched;
};

DenseDims dense_dims(const Tensor& x, const Tensor& w, const Tensor& b) {
  if (x.rank() != 1 && x.rank() != 2) {
    throw ShapeError("dense: input must be [F] or [B,F], got " + shape_to_string(x.shape()));
  }
  if (w.rank() != 2) throw ShapeError("dense: weights must be [out,in], got " + shape_to_string(w.shape()));
  DenseDims d;
  d.batched = x.rank() == 2;
  d.batch = d.batched ? x.dim(0) : 1;
  d.in = x.dim(d.batched ? 1 : 0);
  d.out = w.dim(0);
  if (w.dim(1) != d.in) {
    throw ShapeError("dense: input width " + std::to_string(d.in) + " does not match weights " +
                     shape_to_string(w.shape()));
  }
  if (b.rank() != 1 || b.dim(0) != d.out) {
    throw ShapeError("dense: biases must be [out], got " + shape_to_string(b.shape()));
  }
  return d;
}

}  // namespace

Tensor dense(const Tensor& x, const Tensor& w, const Tensor& b) {
  const DenseDims d = dense_dims(x, w, b);
  Tensor y(d.batched ? Shape{d.batch, d.out} : Shape{d.out});
  for (std::size_t s = 0; s < d.batch; ++s) {
    std::memcpy(y.data() + s * d.out, b.data(), d.out * sizeof(double));
  }
  // y[B, out] += x[B, in] * w[out, in]^T
  blas::gemm(false, true, d.batch, d.out, d.in, 1.0, x.data(), d.in, w.data(), d.in, 1.0, y.data(), d.out);
  return y;
}

void dense_backward(const Tensor& x, const Tensor& w, const Tensor& dy, Tensor* dx, Tensor* dw, Tensor* db) {
  Tensor bias_probe({w.dim(0)});
  const DenseDims d = dense_dims(x, w, bias_probe);
  if (dy.size() != d.batch * d.out) {
    throw ShapeError("dense_backward: output gradient shape " + shape_to_string(dy.shape()) + " is wrong");
  }
  if (dx != nullptr) {
    // dx[B, in] += dy[B, out] * w[out, in]
    blas::gemm(false, false, d.batch, d.in, d.out, 1.0, dy.data(), d.out, w.data(), d.in, 1.0, dx->data(), d.in);
  }
  if (dw != nullptr) {
    // dw[out, in] += dy[B, out]^T * x[B, in]
    blas::gemm(true, false, d.out, d.in, d.batch, 1.0, dy.data(), d.out, x.data(), d.in, 1.0, dw->data(), d.in);
  }
  if (db != nullptr) {
    for (std::size_t s = 0; s < d.batch; ++s) {
      for (std::size_t o = 0; o < d.out; ++o) (*db)[o] += dy[s * d.out + o];
    }
  }
}

Tensor softmax_rows(const Tensor& x) {
  if (x.rank() != 1 && x.rank() != 2) {
    throw ShapeError("softmax: input must be [C] or [B,C], got " + shape_to_string(x.shape()));
  }
  const std::size_t c = x.dim(x.rank() - 1);
  const std::size_t rows = x.size() / c;
  if (c < 2) throw ShapeError("softmax: needs at least 2 classes, got " + std::to_string(c));
  if (!x.all_finite()) throw ValueError("softmax: non-finite logits");
  Tensor y(x.shape());
  for (std::size_t r = 0; r < rows; ++r) {
    const double* in = x.data() + r * c;
    double* out = y.data() + r * c;
    const double m = *std::max_element(in, in + c);
    double z = 0.0;
    for (std::size_t j = 0; j < c; ++j) {
      out[j] = std::exp(in[j] - m);
      z += out[j];
    }
    for (std::size_t j = 0; j < c; ++j) out[j] /= z;
  }
  return y;
}

void softmax_rows_backward(const Tensor& y, const Tensor& dy, Tensor& dx) {
  const std::size_t c = y.dim(y.rank() - 1);
  const std::size_t rows = y.size() / c;
  for (std::size_t r = 0; r < rows; ++r) {
    const double* s = y.data() + r * c;
    const double* g = dy.data() + r * c;
    double dot = 0.0;
    for (std::size_t j = 0; j < c; ++j) dot += s[j] * g[j];
    double* out = dx.data() + r * c;
    for (std::size_t j = 0; j < c; ++j) out[j] += s[j] * (g[j] - dot);
  }
}

}  // namespace dtsl::ops
