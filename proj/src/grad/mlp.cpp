#include <algorithm>
#include <cmath>
#include <random>

#include "hwnas/grad.hpp"

namespace hwnas::grad {
namespace {

Matrix matrix_from_json(const nlohmann::json& j) {
  const auto rows = j.at("rows").get<Eigen::Index>();
  const auto cols = j.at("cols").get<Eigen::Index>();
  const auto data = j.at("data").get<std::vector<double>>();
  if (rows < 0 || cols < 0 || static_cast<Eigen::Index>(data.size()) != rows * cols) {
    throw ValidationError("checkpoint matrix has inconsistent shape");
  }
  Matrix m(rows, cols);
  std::copy(data.begin(), data.end(), m.data());
  return m;
}

nlohmann::json matrix_to_json(const Matrix& m) {
  return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", to_vector(m)}};
}

}  // namespace

Mlp::Mlp(std::vector<int> widths, std::uint64_t seed) : widths_(std::move(widths)) {
  if (widths_.size() < 2) {
    throw ValidationError("an MLP needs at least an input and an output width");
  }
  for (int w : widths_) {
    if (w <= 0) {
      throw ValidationError("MLP widths must be positive");
    }
  }
  std::mt19937_64 rng(seed);
  for (std::size_t l = 0; l + 1 < widths_.size(); ++l) {
    const double limit = std::sqrt(6.0 / widths_[l]);
    std::uniform_real_distribution<double> dist(-limit, limit);
    Matrix w(widths_[l], widths_[l + 1]);
    for (Eigen::Index i = 0; i < w.size(); ++i) {
      w.data()[i] = dist(rng);
    }
    weights_.emplace_back(std::move(w));
    biases_.emplace_back(1, widths_[l + 1]);
  }
}

Var Mlp::forward(Tape& tape, Var x) {
  if (x.cols() != input_width()) {
    throw ValidationError("MLP expects " + std::to_string(input_width()) + " inputs, got " +
                          std::to_string(x.cols()));
  }
  Var h = x;
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    h = tape.add_bias(tape.matmul(h, tape.param(weights_[l])), tape.param(biases_[l]));
    if (l + 1 < weights_.size()) {
      h = tape.relu(h);
    }
  }
  return h;
}

Matrix Mlp::predict(const Matrix& x) const {
  if (x.cols() != input_width()) {
    throw ValidationError("MLP expects " + std::to_string(input_width()) + " inputs, got " +
                          std::to_string(x.cols()));
  }
  Matrix h = x;
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    Matrix z = h * weights_[l].value;
    z.rowwise() += biases_[l].value.row(0);
    h = l + 1 < weights_.size() ? Matrix(z.cwiseMax(0.0)) : std::move(z);
  }
  return h;
}

std::vector<Tensor*> Mlp::parameters() {
  std::vector<Tensor*> out;
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    out.push_back(&weights_[l]);
    out.push_back(&biases_[l]);
  }
  return out;
}

std::size_t Mlp::parameter_count() const {
  std::size_t n = 0;
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    n += static_cast<std::size_t>(weights_[l].value.size() + biases_[l].value.size());
  }
  return n;
}

void Mlp::zero_grad() {
  for (auto* p : parameters()) {
    p->zero_grad();
  }
}

nlohmann::json Mlp::to_json() const {
  nlohmann::json layers = nlohmann::json::array();
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    layers.push_back({{"weight", matrix_to_json(weights_[l].value)}, {"bias", matrix_to_json(biases_[l].value)}});
  }
  return {{"version", kCheckpointVersion}, {"widths", widths_}, {"layers", layers}};
}

Mlp Mlp::from_json(const nlohmann::json& j) {
  if (j.value("version", -1) != kCheckpointVersion) {
    throw ValidationError("unsupported MLP checkpoint version");
  }
  Mlp m;
  m.widths_ = j.at("widths").get<std::vector<int>>();
  const auto& layers = j.at("layers");
  if (m.widths_.size() < 2 || layers.size() + 1 != m.widths_.size()) {
    throw ValidationError("MLP checkpoint layer count does not match widths");
  }
  for (std::size_t l = 0; l < layers.size(); ++l) {
    Matrix w = matrix_from_json(layers[l].at("weight"));
    Matrix b = matrix_from_json(layers[l].at("bias"));
    if (w.rows() != m.widths_[l] || w.cols() != m.widths_[l + 1] || b.rows() != 1 || b.cols() != w.cols()) {
      throw ValidationError("MLP checkpoint layer " + std::to_string(l) + " has the wrong shape");
    }
    m.weights_.emplace_back(std::move(w));
    m.biases_.emplace_back(std::move(b));
  }
  return m;
}

Adam::Adam(std::vector<Tensor*> params, AdamConfig config) : params_(std::move(params)), config_(config) {
  for (auto* p : params_) {
    m_.push_back(Matrix::Zero(p->value.rows(), p->value.cols()));
    v_.push_back(Matrix::Zero(p->value.rows(), p->value.cols()));
  }
}

void Adam::step() {
  ++t_;
  const double c1 = 1.0 - std::pow(config_.beta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(config_.beta2, static_cast<double>(t_));
  for (std::size_t i = 0; i < params_.size(); ++i) {
    const auto& g = params_[i]->grad;
    m_[i] = config_.beta1 * m_[i] + (1.0 - config_.beta1) * g;
    v_[i] = config_.beta2 * v_[i] + (1.0 - config_.beta2) * g.cwiseProduct(g);
    params_[i]->value.array() -=
        config_.lr * (m_[i].array() / c1) / ((v_[i].array() / c2).sqrt() + config_.eps);
  }
}

void Adam::zero_grad() {
  for (auto* p : params_) {
    p->zero_grad();
  }
}

double clip_grad_norm(std::span<Tensor* const> params, double max_norm) {
  double sq = 0.0;
  for (const auto* p : params) {
    sq += p->grad.squaredNorm();
  }
  const double norm = std::sqrt(sq);
  if (norm > max_norm && norm > 0.0) {
    const double s = max_norm / norm;
    for (auto* p : params) {
      p->grad *= s;
    }
  }
  return norm;
}

bool all_finite(std::span<Tensor* const> params) {
  return std::all_of(params.begin(), params.end(), [](const Tensor* p) { return p->value.allFinite(); });
}

double quantile(std::vector<double> data, double q) {
  if (data.empty()) {
    throw ValidationError("quantile of empty data");
  }
  if (!(q >= 0.0 && q <= 1.0)) {
    throw RangeError("quantile level must be in [0, 1]");
  }
  std::sort(data.begin(), data.end());
  const double pos = q * static_cast<double>(data.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, data.size() - 1);
  return data[lo] + (pos - static_cast<double>(lo)) * (data[hi] - data[lo]);
}

void RobustScaler::fit(std::span<const double> targets) {
  if (targets.size() < 2) {
    throw ValidationError("robust scaler needs at least two samples");
  }
  std::vector<double> v(targets.begin(), targets.end());
  median_ = quantile(v, 0.5);
  const double iqr = quantile(v, 0.75) - quantile(v, 0.25);
  degenerate_ = !(iqr > 0.0);
  iqr_ = degenerate_ ? 1.0 : iqr;
  fitted_ = true;
}

RobustScaler RobustScaler::identity() {
  RobustScaler s;
  s.fitted_ = true;
  return s;
}

nlohmann::json RobustScaler::to_json() const {
  return {{"version", kCheckpointVersion}, {"median", median_}, {"iqr", iqr_}, {"degenerate", degenerate_}};
}

RobustScaler RobustScaler::from_json(const nlohmann::json& j) {
  if (j.value("version", -1) != kCheckpointVersion) {
    throw ValidationError("unsupported scaler checkpoint version");
  }
  RobustScaler s;
  s.median_ = j.at("median").get<double>();
  s.iqr_ = j.at("iqr").get<double>();
  s.degenerate_ = j.at("degenerate").get<bool>();
  if (!(s.iqr_ > 0.0)) {
    throw ValidationError("scaler checkpoint has non-positive IQR");
  }
  s.fitted_ = true;
  return s;
}

}  // namespace hwnas::grad
