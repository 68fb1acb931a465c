#include <cmath>

#include "hwnas/grad.hpp"

namespace hwnas::grad {
namespace {

void require(bool cond, const std::string& what) {
  if (!cond) {
    throw ValidationError("shape mismatch: " + what);
  }
}

std::vector<int> resolve_segments(std::span<const int> segments, Eigen::Index cols) {
  if (segments.empty()) {
    return {static_cast<int>(cols)};
  }
  int total = 0;
  for (int s : segments) {
    require(s > 0, "softmax segment widths must be positive");
    total += s;
  }
  require(total == cols, "softmax segments must cover every column");
  return {segments.begin(), segments.end()};
}

}  // namespace

Matrix row(std::span<const double> values) {
  Matrix m(1, static_cast<Eigen::Index>(values.size()));
  for (std::size_t i = 0; i < values.size(); ++i) {
    m(0, static_cast<Eigen::Index>(i)) = values[i];
  }
  return m;
}

std::vector<double> to_vector(const Matrix& m) { return {m.data(), m.data() + m.size()}; }

const Matrix& Var::value() const { return tape_->nodes_.at(id_).value; }

const Matrix& Var::grad() const {
  const auto& n = tape_->nodes_.at(id_);
  if (n.grad.size() == 0) {
    static const Matrix kEmpty;
    return kEmpty;
  }
  return n.grad;
}

Var Tape::push(Matrix value, bool needs_grad, std::function<void(Tape&, const Node&)> backward) {
  nodes_.push_back(Node{std::move(value), Matrix(), needs_grad, nullptr, std::move(backward)});
  return Var(this, nodes_.size() - 1);
}

Tape::Node& Tape::node(Var v) {
  check_owner(v);
  return nodes_[v.id_];
}

void Tape::check_owner(Var v) const {
  if (v.tape_ != this || v.id_ >= nodes_.size()) {
    throw ValidationError("variable does not belong to this tape");
  }
}

void Tape::accumulate(std::size_t id, const Matrix& g) {
  auto& n = nodes_[id];
  if (!n.needs_grad) {
    return;
  }
  if (n.grad.size() == 0) {
    n.grad = g;
  } else {
    n.grad += g;
  }
}

Var Tape::constant(Matrix value) { return push(std::move(value), false, nullptr); }

Var Tape::input(Matrix value) { return push(std::move(value), true, nullptr); }

Var Tape::param(Tensor& tensor) {
  auto v = push(tensor.value, true, nullptr);
  nodes_.back().bound = &tensor;
  return v;
}

Var Tape::matmul(Var a, Var b) {
  const auto& av = node(a).value;
  const auto& bv = node(b).value;
  require(av.cols() == bv.rows(), "matmul " + std::to_string(av.cols()) + " vs " + std::to_string(bv.rows()));
  Matrix out = av * bv;
  const std::size_t ia = a.id_, ib = b.id_;
  return push(std::move(out), nodes_[ia].needs_grad || nodes_[ib].needs_grad, [ia, ib](Tape& t, const Node& self) {
    if (t.nodes_[ia].needs_grad) {
      t.accumulate(ia, self.grad * t.nodes_[ib].value.transpose());
    }
    if (t.nodes_[ib].needs_grad) {
      t.accumulate(ib, t.nodes_[ia].value.transpose() * self.grad);
    }
  });
}

Var Tape::add_bias(Var x, Var bias) {
  const auto& xv = node(x).value;
  const auto& bv = node(bias).value;
  require(bv.rows() == 1 && bv.cols() == xv.cols(), "bias must be 1 x " + std::to_string(xv.cols()));
  Matrix out = xv;
  out.rowwise() += bv.row(0);
  const std::size_t ix = x.id_, ib = bias.id_;
  return push(std::move(out), nodes_[ix].needs_grad || nodes_[ib].needs_grad, [ix, ib](Tape& t, const Node& self) {
    t.accumulate(ix, self.grad);
    t.accumulate(ib, self.grad.colwise().sum());
  });
}

Var Tape::relu(Var x) {
  Matrix out = node(x).value.cwiseMax(0.0);
  const std::size_t ix = x.id_;
  return push(std::move(out), nodes_[ix].needs_grad, [ix](Tape& t, const Node& self) {
    Matrix g = (self.value.array() > 0.0).select(self.grad, 0.0);
    t.accumulate(ix, g);
  });
}

Var Tape::softmax(Var x, std::span<const int> segments) {
  const auto& xv = node(x).value;
  const auto segs = resolve_segments(segments, xv.cols());
  Matrix out(xv.rows(), xv.cols());
  Eigen::Index col = 0;
  for (int w : segs) {
    auto in = xv.middleCols(col, w);
    auto o = out.middleCols(col, w);
    o = (in.colwise() - in.rowwise().maxCoeff()).array().exp().matrix();
    o.array().colwise() /= o.rowwise().sum().array();
    col += w;
  }
  const std::size_t ix = x.id_;
  return push(std::move(out), nodes_[ix].needs_grad, [ix, segs](Tape& t, const Node& self) {
    Matrix g(self.value.rows(), self.value.cols());
    Eigen::Index c = 0;
    for (int w : segs) {
      const auto y = self.value.middleCols(c, w).array();
      const auto up = self.grad.middleCols(c, w).array();
      const Eigen::ArrayXd dot = (y * up).rowwise().sum();
      g.middleCols(c, w) = (y * (up.colwise() - dot)).matrix();
      c += w;
    }
    t.accumulate(ix, g);
  });
}

Var Tape::concat(Var a, Var b) {
  const auto& av = node(a).value;
  const auto& bv = node(b).value;
  require(av.rows() == bv.rows(), "concat needs equal row counts");
  Matrix out(av.rows(), av.cols() + bv.cols());
  out << av, bv;
  const std::size_t ia = a.id_, ib = b.id_;
  const Eigen::Index ca = av.cols(), cb = bv.cols();
  return push(std::move(out), nodes_[ia].needs_grad || nodes_[ib].needs_grad,
              [ia, ib, ca, cb](Tape& t, const Node& self) {
                t.accumulate(ia, self.grad.leftCols(ca));
                t.accumulate(ib, self.grad.rightCols(cb));
              });
}

Var Tape::add(Var a, Var b) {
  const auto& av = node(a).value;
  const auto& bv = node(b).value;
  require(av.rows() == bv.rows() && av.cols() == bv.cols(), "add needs equal shapes");
  Matrix out = av + bv;
  const std::size_t ia = a.id_, ib = b.id_;
  return push(std::move(out), nodes_[ia].needs_grad || nodes_[ib].needs_grad, [ia, ib](Tape& t, const Node& self) {
    t.accumulate(ia, self.grad);
    t.accumulate(ib, self.grad);
  });
}

Var Tape::scale(Var a, double factor) {
  Matrix out = node(a).value * factor;
  const std::size_t ia = a.id_;
  return push(std::move(out), nodes_[ia].needs_grad,
              [ia, factor](Tape& t, const Node& self) { t.accumulate(ia, self.grad * factor); });
}

Var Tape::sum(Var a) {
  const auto& av = node(a).value;
  Matrix out(1, 1);
  out(0, 0) = av.sum();
  const std::size_t ia = a.id_;
  const Eigen::Index r = av.rows(), c = av.cols();
  return push(std::move(out), nodes_[ia].needs_grad, [ia, r, c](Tape& t, const Node& self) {
    t.accumulate(ia, Matrix::Constant(r, c, self.grad(0, 0)));
  });
}

Var Tape::columns(Var a, Eigen::Index first, Eigen::Index count) {
  const auto& av = node(a).value;
  require(first >= 0 && count >= 0 && first + count <= av.cols(), "column range out of bounds");
  Matrix out = av.middleCols(first, count);
  const std::size_t ia = a.id_;
  const Eigen::Index r = av.rows(), c = av.cols();
  return push(std::move(out), nodes_[ia].needs_grad, [ia, r, c, first, count](Tape& t, const Node& self) {
    Matrix g = Matrix::Zero(r, c);
    g.middleCols(first, count) = self.grad;
    t.accumulate(ia, g);
  });
}

Var Tape::l1_loss(Var pred, const Matrix& target) {
  const auto& pv = node(pred).value;
  require(pv.rows() == target.rows() && pv.cols() == target.cols(), "l1 target shape");
  const Matrix diff = pv - target;
  const double n = static_cast<double>(diff.size());
  Matrix out(1, 1);
  out(0, 0) = diff.cwiseAbs().sum() / n;
  const std::size_t ip = pred.id_;
  Matrix sign = diff.unaryExpr([](double d) { return d > 0.0 ? 1.0 : (d < 0.0 ? -1.0 : 0.0); }) / n;
  return push(std::move(out), nodes_[ip].needs_grad,
              [ip, sign = std::move(sign)](Tape& t, const Node& self) { t.accumulate(ip, sign * self.grad(0, 0)); });
}

Var Tape::cross_entropy(Var logits, std::span<const int> labels, std::span<const double> class_weights) {
  const auto& z = node(logits).value;
  require(static_cast<Eigen::Index>(labels.size()) == z.rows(), "one label per row");
  require(static_cast<Eigen::Index>(class_weights.size()) == z.cols(), "one weight per class");
  for (double w : class_weights) {
    if (!(w > 0.0)) {
      throw ValidationError("class weights must be positive");
    }
  }
  const double n = static_cast<double>(z.rows());
  Matrix dz(z.rows(), z.cols());
  double loss = 0.0;
  for (Eigen::Index r = 0; r < z.rows(); ++r) {
    const int label = labels[static_cast<std::size_t>(r)];
    if (label < 0 || label >= z.cols()) {
      throw ValidationError("label " + std::to_string(label) + " outside [0, " + std::to_string(z.cols()) + ")");
    }
    const double mx = z.row(r).maxCoeff();
    const RowVector e = (z.row(r).array() - mx).exp().matrix();
    const double s = e.sum();
    const double log_p = z(r, label) - mx - std::log(s);
    const double w = class_weights[static_cast<std::size_t>(label)];
    loss += -w * log_p;
    dz.row(r) = e / s;
    dz(r, label) -= 1.0;
    dz.row(r) *= w / n;
  }
  Matrix out(1, 1);
  out(0, 0) = loss / n;
  const std::size_t il = logits.id_;
  return push(std::move(out), nodes_[il].needs_grad,
              [il, dz = std::move(dz)](Tape& t, const Node& self) { t.accumulate(il, dz * self.grad(0, 0)); });
}

Var Tape::custom(Var x, Matrix value, std::function<Matrix(const Matrix& upstream)> backward) {
  check_owner(x);
  const std::size_t ix = x.id_;
  const auto r = nodes_[ix].value.rows(), c = nodes_[ix].value.cols();
  return push(std::move(value), nodes_[ix].needs_grad,
              [ix, r, c, fn = std::move(backward)](Tape& t, const Node& self) {
                Matrix g = fn(self.grad);
                require(g.rows() == r && g.cols() == c, "custom backward returned wrong shape");
                t.accumulate(ix, g);
              });
}

void Tape::backward(Var root) {
  auto& r = node(root);
  require(r.value.rows() == 1 && r.value.cols() == 1, "backward root must be scalar");
  if (!r.needs_grad) {
    return;
  }
  accumulate(root.id_, Matrix::Ones(1, 1));
  for (std::size_t i = root.id_ + 1; i-- > 0;) {
    auto& n = nodes_[i];
    if (!n.needs_grad || n.grad.size() == 0) {
      continue;
    }
    if (n.backward) {
      n.backward(*this, n);
    }
    if (n.bound != nullptr) {
      n.bound->grad += n.grad;
    }
  }
}

}  // namespace hwnas::grad
