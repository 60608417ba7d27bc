#include "dghl/layers.hpp"

#include <Eigen/Dense>
#include <cmath>

#include "dghl/error.hpp"

namespace dghl {
namespace {

using ColMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::ColMajor>;
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct Dims3 {
  std::size_t batch, channels, length;
};

Dims3 activation_dims(const Tensor& t, const char* what) {
  if (t.rank() == 2) return {1, t.dim(0), t.dim(1)};
  if (t.rank() == 3) return {t.dim(0), t.dim(1), t.dim(2)};
  throw ShapeError(std::string(what) + ": expected [C x L] or [B x C x L], got " +
                   to_string(t.shape()));
}

Shape activation_shape(const Tensor& like, std::size_t channels, std::size_t length) {
  if (like.rank() == 2) return {channels, length};
  return {like.dim(0), channels, length};
}

void check_conv_shapes(const Dims3& in, const Tensor& kernel, const char* what) {
  if (kernel.rank() != 3) {
    throw ShapeError(std::string(what) + ": kernel must be [C_in x C_out x K], got " +
                     to_string(kernel.shape()));
  }
  if (kernel.dim(0) != in.channels) {
    throw ShapeError(std::string(what) + ": input has " + std::to_string(in.channels) +
                     " channels but kernel shape is " + to_string(kernel.shape()));
  }
}

// Input as [C x (B*L)], column (b*L + t).
ColMatrix to_channel_major(const Tensor& t, const Dims3& d) {
  ColMatrix m(d.channels, d.batch * d.length);
  const double* src = t.data().data();
  for (std::size_t b = 0; b < d.batch; ++b) {
    for (std::size_t c = 0; c < d.channels; ++c) {
      const double* row = src + (b * d.channels + c) * d.length;
      for (std::size_t l = 0; l < d.length; ++l) m(c, b * d.length + l) = row[l];
    }
  }
  return m;
}

}  // namespace

std::size_t conv1d_transpose_output_length(std::size_t length, std::size_t kernel_size,
                                           std::size_t stride, std::size_t padding) {
  const long out = static_cast<long>((length - 1) * stride + kernel_size) -
                   2 * static_cast<long>(padding);
  if (length < 1 || kernel_size < 1 || stride < 1 || out < 1) {
    throw ShapeError("conv1d_transpose: invalid geometry L=" + std::to_string(length) +
                     " K=" + std::to_string(kernel_size) + " stride=" + std::to_string(stride) +
                     " padding=" + std::to_string(padding));
  }
  return static_cast<std::size_t>(out);
}

Tensor conv1d_transpose_forward(const Tensor& input, const Tensor& kernel, const Tensor& bias,
                                std::size_t stride, std::size_t padding) {
  const Dims3 in = activation_dims(input, "conv1d_transpose_forward");
  check_conv_shapes(in, kernel, "conv1d_transpose_forward");
  const std::size_t c_out = kernel.dim(1);
  const std::size_t k_size = kernel.dim(2);
  if (bias.size() != c_out) {
    throw ShapeError("conv1d_transpose_forward: bias shape " + to_string(bias.shape()) +
                     " does not match kernel shape " + to_string(kernel.shape()));
  }
  const std::size_t l_out = conv1d_transpose_output_length(in.length, k_size, stride, padding);

  const ColMatrix x = to_channel_major(input, in);
  const Eigen::Map<const RowMatrix> w(kernel.data().data(), in.channels, c_out * k_size);
  const ColMatrix cols = w.transpose() * x;  // [(C_out*K) x (B*L)]

  Tensor out(activation_shape(input, c_out, l_out));
  double* dst = out.data().data();
  const long pad = static_cast<long>(padding);
  for (std::size_t b = 0; b < in.batch; ++b) {
    for (std::size_t co = 0; co < c_out; ++co) {
      double* orow = dst + (b * c_out + co) * l_out;
      std::fill(orow, orow + l_out, bias[co]);
      for (std::size_t t = 0; t < in.length; ++t) {
        const double* col = cols.data() + (b * in.length + t) * cols.rows() + co * k_size;
        const long base = static_cast<long>(t * stride) - pad;
        for (std::size_t k = 0; k < k_size; ++k) {
          const long pos = base + static_cast<long>(k);
          if (pos >= 0 && pos < static_cast<long>(l_out)) orow[pos] += col[k];
        }
      }
    }
  }
  return out;
}

LayerGrad conv1d_transpose_backward(const Tensor& input, const Tensor& kernel, std::size_t stride,
                                    std::size_t padding, const Tensor& grad_output,
                                    bool want_param_grads) {
  const Dims3 in = activation_dims(input, "conv1d_transpose_backward");
  check_conv_shapes(in, kernel, "conv1d_transpose_backward");
  const std::size_t c_out = kernel.dim(1);
  const std::size_t k_size = kernel.dim(2);
  const std::size_t l_out = conv1d_transpose_output_length(in.length, k_size, stride, padding);
  if (grad_output.shape() != activation_shape(input, c_out, l_out)) {
    throw ShapeError("conv1d_transpose_backward: grad_output shape " +
                     to_string(grad_output.shape()) + " does not match forward output " +
                     to_string(activation_shape(input, c_out, l_out)));
  }

  // Gather grad_output into the column layout produced by the forward pass.
  ColMatrix gcol(c_out * k_size, in.batch * in.length);
  const double* g = grad_output.data().data();
  const long pad = static_cast<long>(padding);
  for (std::size_t b = 0; b < in.batch; ++b) {
    for (std::size_t t = 0; t < in.length; ++t) {
      double* col = gcol.data() + (b * in.length + t) * gcol.rows();
      const long base = static_cast<long>(t * stride) - pad;
      for (std::size_t co = 0; co < c_out; ++co) {
        const double* grow = g + (b * c_out + co) * l_out;
        for (std::size_t k = 0; k < k_size; ++k) {
          const long pos = base + static_cast<long>(k);
          col[co * k_size + k] =
              (pos >= 0 && pos < static_cast<long>(l_out)) ? grow[pos] : 0.0;
        }
      }
    }
  }

  const Eigen::Map<const RowMatrix> w(kernel.data().data(), in.channels, c_out * k_size);
  const ColMatrix gx = w * gcol;  // [C_in x (B*L)]

  LayerGrad result;
  result.grad_input = Tensor(input.shape());
  double* gi = result.grad_input.data().data();
  for (std::size_t b = 0; b < in.batch; ++b) {
    for (std::size_t c = 0; c < in.channels; ++c) {
      double* row = gi + (b * in.channels + c) * in.length;
      for (std::size_t l = 0; l < in.length; ++l) row[l] = gx(c, b * in.length + l);
    }
  }

  if (want_param_grads) {
    const ColMatrix x = to_channel_major(input, in);
    Tensor grad_kernel(kernel.shape());
    Eigen::Map<RowMatrix> gk(grad_kernel.data().data(), in.channels, c_out * k_size);
    gk.noalias() = x * gcol.transpose();

    Tensor grad_bias(Shape{c_out});
    for (std::size_t b = 0; b < in.batch; ++b) {
      for (std::size_t co = 0; co < c_out; ++co) {
        const double* grow = g + (b * c_out + co) * l_out;
        double acc = 0.0;
        for (std::size_t l = 0; l < l_out; ++l) acc += grow[l];
        grad_bias[co] += acc;
      }
    }
    result.grad_params.push_back(std::move(grad_kernel));
    result.grad_params.push_back(std::move(grad_bias));
  }
  return result;
}

BatchNormOutput batchnorm_forward(const Tensor& input, const Tensor& gamma, const Tensor& beta,
                                  const Tensor& running_mean, const Tensor& running_var, Mode mode,
                                  double eps) {
  const Dims3 d = activation_dims(input, "batchnorm_forward");
  if (gamma.size() != d.channels || beta.size() != d.channels ||
      running_mean.size() != d.channels || running_var.size() != d.channels) {
    throw ShapeError("batchnorm_forward: parameters must have " + std::to_string(d.channels) +
                     " entries, gamma shape " + to_string(gamma.shape()));
  }
  if (!(eps > 0.0)) throw ValidationError("batchnorm_forward: eps must be positive");

  BatchStats stats;
  stats.count = d.batch * d.length;
  stats.mean.assign(d.channels, 0.0);
  stats.var.assign(d.channels, 0.0);
  const double* x = input.data().data();

  if (mode == Mode::kTrain) {
    const double n = static_cast<double>(stats.count);
    for (std::size_t c = 0; c < d.channels; ++c) {
      double sum = 0.0;
      for (std::size_t b = 0; b < d.batch; ++b) {
        const double* row = x + (b * d.channels + c) * d.length;
        for (std::size_t l = 0; l < d.length; ++l) sum += row[l];
      }
      const double mean = sum / n;
      double ss = 0.0;
      for (std::size_t b = 0; b < d.batch; ++b) {
        const double* row = x + (b * d.channels + c) * d.length;
        for (std::size_t l = 0; l < d.length; ++l) ss += (row[l] - mean) * (row[l] - mean);
      }
      stats.mean[c] = mean;
      stats.var[c] = ss / n;
    }
  } else {
    for (std::size_t c = 0; c < d.channels; ++c) {
      stats.mean[c] = running_mean[c];
      stats.var[c] = running_var[c];
    }
  }

  Tensor out(input.shape());
  double* y = out.data().data();
  for (std::size_t c = 0; c < d.channels; ++c) {
    const double inv = 1.0 / std::sqrt(stats.var[c] + eps);
    const double scale = gamma[c] * inv;
    const double shift = beta[c] - stats.mean[c] * scale;
    for (std::size_t b = 0; b < d.batch; ++b) {
      const std::size_t off = (b * d.channels + c) * d.length;
      for (std::size_t l = 0; l < d.length; ++l) y[off + l] = x[off + l] * scale + shift;
    }
  }
  return {std::move(out), std::move(stats)};
}

void update_running_stats(const BatchStats& stats, double momentum, Tensor& running_mean,
                          Tensor& running_var) {
  const double n = static_cast<double>(stats.count);
  const double unbias = stats.count > 1 ? n / (n - 1.0) : 1.0;
  for (std::size_t c = 0; c < stats.mean.size(); ++c) {
    running_mean[c] = (1.0 - momentum) * running_mean[c] + momentum * stats.mean[c];
    running_var[c] = (1.0 - momentum) * running_var[c] + momentum * stats.var[c] * unbias;
  }
}

LayerGrad batchnorm_backward(const Tensor& input, const Tensor& gamma, const BatchStats& stats,
                             Mode mode, double eps, const Tensor& grad_output) {
  const Dims3 d = activation_dims(input, "batchnorm_backward");
  require_same_shape(input, grad_output, "batchnorm_backward");
  const double* x = input.data().data();
  const double* g = grad_output.data().data();

  LayerGrad result;
  result.grad_input = Tensor(input.shape());
  Tensor grad_gamma(Shape{d.channels});
  Tensor grad_beta(Shape{d.channels});
  double* gx = result.grad_input.data().data();
  const double n = static_cast<double>(d.batch * d.length);

  for (std::size_t c = 0; c < d.channels; ++c) {
    const double inv = 1.0 / std::sqrt(stats.var[c] + eps);
    const double mean = stats.mean[c];
    double sum_g = 0.0;
    double sum_g_xhat = 0.0;
    for (std::size_t b = 0; b < d.batch; ++b) {
      const std::size_t off = (b * d.channels + c) * d.length;
      for (std::size_t l = 0; l < d.length; ++l) {
        sum_g += g[off + l];
        sum_g_xhat += g[off + l] * (x[off + l] - mean) * inv;
      }
    }
    grad_gamma[c] = sum_g_xhat;
    grad_beta[c] = sum_g;

    const double scale = gamma[c] * inv;
    for (std::size_t b = 0; b < d.batch; ++b) {
      const std::size_t off = (b * d.channels + c) * d.length;
      for (std::size_t l = 0; l < d.length; ++l) {
        if (mode == Mode::kTrain) {
          const double xhat = (x[off + l] - mean) * inv;
          gx[off + l] = scale * (g[off + l] - sum_g / n - xhat * sum_g_xhat / n);
        } else {
          gx[off + l] = scale * g[off + l];
        }
      }
    }
  }
  result.grad_params.push_back(std::move(grad_gamma));
  result.grad_params.push_back(std::move(grad_beta));
  return result;
}

Tensor relu_forward(const Tensor& input) {
  Tensor out = input;
  for (double& v : out.data()) v = v > 0.0 ? v : 0.0;
  return out;
}

Tensor relu_backward(const Tensor& input, const Tensor& grad_output) {
  require_same_shape(input, grad_output, "relu_backward");
  Tensor out = grad_output;
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (!(input[i] > 0.0)) out[i] = 0.0;
  }
  return out;
}

}  // namespace dghl
