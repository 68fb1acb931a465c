#pragma once

// Minimal tape-based reverse-mode autodiff over row-major matrices, plus the
// MLP, Adam and robust-scaling utilities used by every trained component.

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <nlohmann/json.hpp>

#include "hwnas/error.hpp"

namespace hwnas::grad {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowVector = Eigen::Matrix<double, 1, Eigen::Dynamic>;

[[nodiscard]] Matrix row(std::span<const double> values);
[[nodiscard]] std::vector<double> to_vector(const Matrix& m);

/// Trainable tensor: value and gradient always share a shape.
struct Tensor {
  Matrix value;
  Matrix grad;

  Tensor() = default;
  Tensor(Eigen::Index rows, Eigen::Index cols) : value(Matrix::Zero(rows, cols)), grad(Matrix::Zero(rows, cols)) {}
  explicit Tensor(Matrix v) : value(std::move(v)), grad(Matrix::Zero(value.rows(), value.cols())) {}

  void zero_grad() { grad.setZero(value.rows(), value.cols()); }
};

class Tape;

/// Handle to a node recorded on a Tape. Valid for the tape's lifetime.
class Var {
 public:
  Var() = default;
  [[nodiscard]] const Matrix& value() const;
  [[nodiscard]] const Matrix& grad() const;
  [[nodiscard]] Eigen::Index rows() const { return value().rows(); }
  [[nodiscard]] Eigen::Index cols() const { return value().cols(); }
  [[nodiscard]] double scalar() const { return value()(0, 0); }

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}
  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Leaf without gradient.
  Var constant(Matrix value);
  /// Leaf whose gradient is kept on the tape (read with Var::grad()).
  Var input(Matrix value);
  /// Leaf bound to a parameter; backward() accumulates into tensor.grad.
  Var param(Tensor& tensor);

  Var matmul(Var a, Var b);
  /// x (n x m) + bias (1 x m) broadcast over rows.
  Var add_bias(Var x, Var bias);
  Var relu(Var x);
  /// Row-wise softmax, independently over consecutive column segments.
  /// An empty segment list means one segment spanning every column.
  Var softmax(Var x, std::span<const int> segments = {});
  /// Column-wise concatenation of equal-height operands.
  Var concat(Var a, Var b);
  Var add(Var a, Var b);
  Var scale(Var a, double factor);
  /// Scalar sum of all entries.
  Var sum(Var a);
  /// Column block [first, first + count).
  Var columns(Var a, Eigen::Index first, Eigen::Index count);

  /// Mean absolute error over all entries.
  Var l1_loss(Var pred, const Matrix& target);
  /// Mean over rows of -w[label] * log_softmax(logits)[label].
  Var cross_entropy(Var logits, std::span<const int> labels, std::span<const double> class_weights);

  /// Arbitrary unary node: caller supplies the value and a function mapping
  /// the upstream gradient to the gradient with respect to x.
  Var custom(Var x, Matrix value, std::function<Matrix(const Matrix& upstream)> backward);

  /// Reverse pass from a 1x1 root. Gradients accumulate on every node.
  void backward(Var root);

  [[nodiscard]] std::size_t size() const { return nodes_.size(); }

 private:
  friend class Var;
  struct Node {
    Matrix value;
    Matrix grad;
    bool needs_grad = false;
    Tensor* bound = nullptr;
    std::function<void(Tape&, const Node&)> backward;
  };

  Var push(Matrix value, bool needs_grad, std::function<void(Tape&, const Node&)> backward);
  Node& node(Var v);
  void accumulate(std::size_t id, const Matrix& g);
  void check_owner(Var v) const;

  std::vector<Node> nodes_;
};

/// Fully connected ReLU network with a linear output layer.
class Mlp {
 public:
  Mlp() = default;
  /// widths = {in, hidden..., out}; He-uniform weights, zero biases.
  Mlp(std::vector<int> widths, std::uint64_t seed);

  [[nodiscard]] Var forward(Tape& tape, Var x);
  /// Tape-free evaluation, identical arithmetic to forward().
  [[nodiscard]] Matrix predict(const Matrix& x) const;

  [[nodiscard]] std::vector<Tensor*> parameters();
  [[nodiscard]] std::size_t parameter_count() const;
  [[nodiscard]] const std::vector<int>& widths() const { return widths_; }
  [[nodiscard]] int input_width() const { return widths_.front(); }
  [[nodiscard]] int output_width() const { return widths_.back(); }
  void zero_grad();

  [[nodiscard]] nlohmann::json to_json() const;
  static Mlp from_json(const nlohmann::json& j);

 private:
  std::vector<int> widths_;
  std::vector<Tensor> weights_;  // in x out
  std::vector<Tensor> biases_;   // 1 x out
};

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

class Adam {
 public:
  Adam(std::vector<Tensor*> params, AdamConfig config = {});

  /// One bias-corrected update from the gradients currently stored in the parameters.
  void step();
  void zero_grad();
  void set_lr(double lr) { config_.lr = lr; }
  [[nodiscard]] double lr() const { return config_.lr; }
  [[nodiscard]] std::int64_t steps() const { return t_; }

 private:
  std::vector<Tensor*> params_;
  std::vector<Matrix> m_;
  std::vector<Matrix> v_;
  AdamConfig config_;
  std::int64_t t_ = 0;
};

/// Rescales all gradients so their global L2 norm is at most max_norm.
/// Returns the norm before clipping.
double clip_grad_norm(std::span<Tensor* const> params, double max_norm);

[[nodiscard]] bool all_finite(std::span<Tensor* const> params);

/// Linear-interpolation quantile of unsorted data, q in [0, 1].
[[nodiscard]] double quantile(std::vector<double> data, double q);

/// (x - median) / IQR. A zero IQR is replaced by 1 and flagged.
class RobustScaler {
 public:
  void fit(std::span<const double> targets);
  /// Pass-through scaler (median 0, IQR 1).
  static RobustScaler identity();
  [[nodiscard]] double transform(double x) const { return (x - median_) / iqr_; }
  [[nodiscard]] double inverse_transform(double z) const { return z * iqr_ + median_; }
  [[nodiscard]] double median() const { return median_; }
  [[nodiscard]] double iqr() const { return iqr_; }
  [[nodiscard]] bool degenerate() const { return degenerate_; }
  [[nodiscard]] bool fitted() const { return fitted_; }

  [[nodiscard]] nlohmann::json to_json() const;
  static RobustScaler from_json(const nlohmann::json& j);

 private:
  double median_ = 0.0;
  double iqr_ = 1.0;
  bool degenerate_ = false;
  bool fitted_ = false;
};

inline constexpr int kCheckpointVersion = 1;

}  // namespace hwnas::grad
