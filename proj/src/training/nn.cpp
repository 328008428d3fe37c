#include "styleshift/nn.hpp"

#include <algorithm>
#include <cmath>

#include "styleshift/error.hpp"

namespace styleshift::nn {

void Param::init(std::string param_name, int rows, int cols) {
  name = std::move(param_name);
  value = Matrix::Zero(rows, cols);
  grad = Matrix::Zero(rows, cols);
  velocity = Matrix::Zero(rows, cols);
}

Conv2d::Conv2d(std::string name, int in_channels, int out_channels, int kernel, int stride,
               int padding)
    : in_channels_(in_channels), out_channels_(out_channels), kernel_(kernel),
      stride_(stride), padding_(padding) {
  weight.init(name + ".weight", out_channels, in_channels * kernel * kernel);
  bias.init(name + ".bias", out_channels, 1);
}

void Conv2d::init_he(Rng& rng, double gain) {
  const double fan_in = static_cast<double>(in_channels_ * kernel_ * kernel_);
  const double stddev = gain * std::sqrt(2.0 / fan_in);
  for (Eigen::Index i = 0; i < weight.value.size(); ++i) {
    weight.value.data()[i] = rng.normal(0.0, stddev);
  }
  bias.value.setZero();
}

Geometry Conv2d::output_geometry(const Geometry& in) const {
  Geometry out;
  out.batch = in.batch;
  out.channels = out_channels_;
  out.height = (in.height + 2 * padding_ - kernel_) / stride_ + 1;
  out.width = (in.width + 2 * padding_ - kernel_) / stride_ + 1;
  return out;
}

Matrix Conv2d::forward(const Matrix& input, const Geometry& in, Matrix* cols_out) const {
  if (in.channels != in_channels_) throw Error("nn.shape", "conv input channel mismatch");
  const Geometry out = output_geometry(in);
  const int k = kernel_;
  const int in_pos = in.positions();
  const int out_pos = out.positions();
  Matrix cols(static_cast<Eigen::Index>(in_channels_) * k * k,
              static_cast<Eigen::Index>(in.batch) * out_pos);
  for (int c = 0; c < in_channels_; ++c) {
    const double* src = input.row(c).data();
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        double* dst = cols.row((c * k + ky) * k + kx).data();
        for (int n = 0; n < in.batch; ++n) {
          const double* plane = src + static_cast<std::ptrdiff_t>(n) * in_pos;
          double* row = dst + static_cast<std::ptrdiff_t>(n) * out_pos;
          for (int oy = 0; oy < out.height; ++oy) {
            const int iy = oy * stride_ - padding_ + ky;
            double* o = row + oy * out.width;
            if (iy < 0 || iy >= in.height) {
              std::fill(o, o + out.width, 0.0);
              continue;
            }
            const double* irow = plane + iy * in.width;
            for (int ox = 0; ox < out.width; ++ox) {
              const int ix = ox * stride_ - padding_ + kx;
              o[ox] = (ix >= 0 && ix < in.width) ? irow[ix] : 0.0;
            }
          }
        }
      }
    }
  }
  Matrix result = weight.value * cols;
  result.colwise() += Eigen::Map<const Vector>(bias.value.data(), out_channels_);
  if (cols_out != nullptr) *cols_out = std::move(cols);
  return result;
}

Matrix Conv2d::backward(const Matrix& grad_out, const Matrix& cols, const Geometry& in,
                        bool need_input_grad) {
  weight.grad.noalias() += grad_out * cols.transpose();
  bias.grad += grad_out.rowwise().sum();
  if (!need_input_grad) return {};

  const Geometry out = output_geometry(in);
  const Matrix dcols = weight.value.transpose() * grad_out;
  const int k = kernel_;
  const int in_pos = in.positions();
  const int out_pos = out.positions();
  Matrix grad_in = Matrix::Zero(in_channels_, static_cast<Eigen::Index>(in.batch) * in_pos);
  for (int c = 0; c < in_channels_; ++c) {
    double* dst = grad_in.row(c).data();
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        const double* src = dcols.row((c * k + ky) * k + kx).data();
        for (int n = 0; n < in.batch; ++n) {
          double* plane = dst + static_cast<std::ptrdiff_t>(n) * in_pos;
          const double* row = src + static_cast<std::ptrdiff_t>(n) * out_pos;
          for (int oy = 0; oy < out.height; ++oy) {
            const int iy = oy * stride_ - padding_ + ky;
            if (iy < 0 || iy >= in.height) continue;
            double* irow = plane + iy * in.width;
            const double* o = row + oy * out.width;
            for (int ox = 0; ox < out.width; ++ox) {
              const int ix = ox * stride_ - padding_ + kx;
              if (ix >= 0 && ix < in.width) irow[ix] += o[ox];
            }
          }
        }
      }
    }
  }
  return grad_in;
}

Linear::Linear(std::string name, int in_features, int out_features) {
  weight.init(name + ".weight", out_features, in_features);
  bias.init(name + ".bias", out_features, 1);
}

void Linear::init_normal(Rng& rng, double stddev) {
  for (Eigen::Index i = 0; i < weight.value.size(); ++i) {
    weight.value.data()[i] = rng.normal(0.0, stddev);
  }
  bias.value.setZero();
}

Matrix Linear::forward(const Matrix& input) const {
  Matrix out = weight.value * input;
  out.colwise() += Eigen::Map<const Vector>(bias.value.data(), bias.value.rows());
  return out;
}

Matrix Linear::backward(const Matrix& grad_out, const Matrix& input, bool need_input_grad) {
  weight.grad.noalias() += grad_out * input.transpose();
  bias.grad += grad_out.rowwise().sum();
  if (!need_input_grad) return {};
  return weight.value.transpose() * grad_out;
}

Matrix relu(const Matrix& x) { return x.cwiseMax(0.0); }

Matrix relu_backward(const Matrix& grad, const Matrix& output) {
  return (output.array() > 0.0).select(grad, 0.0);
}

Matrix global_average_pool(const Matrix& x, const Geometry& g) {
  Matrix out(g.channels, g.batch);
  const int pos = g.positions();
  for (int c = 0; c < g.channels; ++c) {
    for (int n = 0; n < g.batch; ++n) {
      out(c, n) = x.row(c).segment(static_cast<Eigen::Index>(n) * pos, pos).sum() / pos;
    }
  }
  return out;
}

Matrix global_average_pool_backward(const Matrix& grad, const Geometry& g) {
  const int pos = g.positions();
  Matrix out(g.channels, static_cast<Eigen::Index>(g.batch) * pos);
  for (int c = 0; c < g.channels; ++c) {
    for (int n = 0; n < g.batch; ++n) {
      out.row(c).segment(static_cast<Eigen::Index>(n) * pos, pos).setConstant(grad(c, n) / pos);
    }
  }
  return out;
}

CrossEntropy softmax_cross_entropy(const Matrix& logits, const std::vector<int>& labels,
                                   const std::vector<double>& weights) {
  const auto batch = logits.cols();
  if (static_cast<std::size_t>(batch) != labels.size() || labels.size() != weights.size()) {
    throw Error("nn.shape", "cross-entropy: batch size mismatch");
  }
  CrossEntropy ce;
  ce.grad = Matrix::Zero(logits.rows(), batch);
  ce.per_sample.resize(batch);
  for (Eigen::Index n = 0; n < batch; ++n) {
    const double max = logits.col(n).maxCoeff();
    double total = 0.0;
    for (Eigen::Index k = 0; k < logits.rows(); ++k) total += std::exp(logits(k, n) - max);
    const double log_z = max + std::log(total);
    const int y = labels[n];
    if (y < 0 || y >= logits.rows()) throw Error("nn.label", "label outside logit range");
    const double loss = log_z - logits(y, n);
    ce.per_sample[n] = loss;
    ce.loss += weights[n] * loss;
    for (Eigen::Index k = 0; k < logits.rows(); ++k) {
      const double p = std::exp(logits(k, n) - log_z);
      ce.grad(k, n) = weights[n] * (p - (k == y ? 1.0 : 0.0));
    }
  }
  return ce;
}

std::vector<double> softmax(const std::vector<double>& logits) {
  std::vector<double> p(logits.size());
  if (logits.empty()) return p;
  const double max = *std::max_element(logits.begin(), logits.end());
  double total = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    p[i] = std::exp(logits[i] - max);
    total += p[i];
  }
  for (double& v : p) v /= total;
  return p;
}

int argmax(const std::vector<double>& values) {
  if (values.empty()) throw Error("nn.argmax", "argmax of empty vector");
  int best = 0;
  for (std::size_t i = 1; i < values.size(); ++i) {
    if (values[i] > values[best]) best = static_cast<int>(i);
  }
  return best;
}

void sgd_step(Param& p, double lr, double momentum) {
  p.velocity = momentum * p.velocity + p.grad;
  p.value -= lr * p.velocity;
}

}  // namespace styleshift::nn
