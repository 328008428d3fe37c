#pragma once

// Minimal convolutional network engine with explicit backpropagation.
// Activations are stored as channels x (batch * height * width) row-major
// matrices; column index n * H * W + y * W + x.

#include <Eigen/Core>

#include <cstdint>
#include <string>
#include <vector>

#include "styleshift/random.hpp"

namespace styleshift::nn {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

struct Param {
  std::string name;
  Matrix value;
  Matrix grad;
  Matrix velocity;

  void init(std::string param_name, int rows, int cols);
  void zero_grad() { grad.setZero(); }
};

struct Geometry {
  int batch = 0;
  int channels = 0;
  int height = 0;
  int width = 0;

  int positions() const { return height * width; }
};

class Conv2d {
 public:
  Conv2d() = default;
  Conv2d(std::string name, int in_channels, int out_channels, int kernel, int stride,
         int padding);

  void init_he(Rng& rng, double gain = 1.0);

  Geometry output_geometry(const Geometry& in) const;
  /// `cols` receives the unfolded input for backward.
  Matrix forward(const Matrix& input, const Geometry& in, Matrix* cols) const;
  /// Accumulates parameter gradients; returns the input gradient when
  /// `need_input_grad` is set.
  Matrix backward(const Matrix& grad_out, const Matrix& cols, const Geometry& in,
                  bool need_input_grad);

  Param weight;  // out x (in * k * k)
  Param bias;    // out x 1

 private:
  int in_channels_ = 0;
  int out_channels_ = 0;
  int kernel_ = 3;
  int stride_ = 1;
  int padding_ = 1;
};

class Linear {
 public:
  Linear() = default;
  Linear(std::string name, int in_features, int out_features);

  void init_normal(Rng& rng, double stddev);

  /// input: in x batch -> out x batch.
  Matrix forward(const Matrix& input) const;
  Matrix backward(const Matrix& grad_out, const Matrix& input, bool need_input_grad);

  int in_features() const { return static_cast<int>(weight.value.cols()); }
  int out_features() const { return static_cast<int>(weight.value.rows()); }

  Param weight;
  Param bias;
};

Matrix relu(const Matrix& x);
/// grad * 1[output > 0]
Matrix relu_backward(const Matrix& grad, const Matrix& output);

Matrix global_average_pool(const Matrix& x, const Geometry& g);
Matrix global_average_pool_backward(const Matrix& grad, const Geometry& g);

struct CrossEntropy {
  double loss = 0.0;       // sum_i weight_i * ce_i
  std::vector<double> per_sample;
  Matrix grad;             // d loss / d logits
};

/// Weighted softmax cross-entropy over columns of `logits` (classes x batch).
CrossEntropy softmax_cross_entropy(const Matrix& logits, const std::vector<int>& labels,
                                   const std::vector<double>& weights);

std::vector<double> softmax(const std::vector<double>& logits);
/// Index of the largest value; ties go to the lowest index.
int argmax(const std::vector<double>& values);

/// SGD with classical momentum: v <- mu v + g; p <- p - lr v.
void sgd_step(Param& p, double lr, double momentum);

}  // namespace styleshift::nn
