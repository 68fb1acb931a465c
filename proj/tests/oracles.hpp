#pragma once

// Independent reference implementations shared by the unit tests and the
// acceptance run: central-difference gradients, randomized op graphs and an
// exhaustive tiling search.

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <random>
#include <tuple>
#include <vector>

#include "hwnas/accel.hpp"
#include "hwnas/grad.hpp"

namespace oracle {

using hwnas::grad::Matrix;
using hwnas::grad::Tape;
using hwnas::grad::Var;
using Graph = std::function<Var(Tape&, Var)>;

inline Matrix uniform(Eigen::Index r, Eigen::Index c, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> d(-1.0, 1.0);
  Matrix m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) {
    m.data()[i] = d(rng);
  }
  return m;
}

inline double eval(const Graph& f, const Matrix& x) {
  Tape t;
  return f(t, t.constant(x)).scalar();
}

// Central differences, h = 1e-5. Returns the max relative error
// |a - n| / max(1, |a|, |n|) over all entries of x.
inline double fd_error(const Graph& f, const Matrix& x) {
  Tape t;
  Var in = t.input(x);
  t.backward(f(t, in));
  const Matrix analytic = in.grad().size() ? in.grad() : Matrix::Zero(x.rows(), x.cols());
  constexpr double h = 1e-5;
  double worst = 0.0;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    Matrix xp = x, xm = x;
    xp.data()[i] += h;
    xm.data()[i] -= h;
    const double numeric = (eval(f, xp) - eval(f, xm)) / (2 * h);
    const double a = analytic.data()[i];
    worst = std::max(worst, std::abs(a - numeric) / std::max({1.0, std::abs(a), std::abs(numeric)}));
  }
  return worst;
}

// One of five op mixes (by trial % 5) over a 3 x 6 input, with fresh random
// constants. Together the mixes touch every tape op.
inline Graph op_graph(int trial, std::mt19937_64& rng) {
  const Matrix w = uniform(6, 6, rng), bias = uniform(1, 6, rng), other = uniform(3, 6, rng);
  const Matrix weights = uniform(3, 12, rng);
  const double k = 0.5 + trial % 3;
  switch (trial % 5) {
    case 0:  // matmul on both sides, bias, custom square
      return [=](Tape& t, Var x) {
        Var y = t.add_bias(t.matmul(x, t.constant(w)), t.constant(bias));
        return t.sum(t.matmul(t.custom(y, y.value().cwiseProduct(y.value()),
                                       [yv = y.value()](const Matrix& up) { return Matrix(2.0 * yv.cwiseProduct(up)); }),
                              t.constant(w.leftCols(1))));
      };
    case 1:  // segmented softmax, elementwise weights, concat with relu branch
      return [=](Tape& t, Var x) {
        Var s = t.softmax(t.scale(x, k), std::vector<int>{2, 3, 1});
        Var weighted =
            t.custom(s, s.value().cwiseProduct(other), [other](const Matrix& up) { return Matrix(up.cwiseProduct(other)); });
        Var both = t.concat(weighted, t.relu(t.add(x, t.constant(other))));
        return t.sum(t.columns(both, 1, 9));
      };
    case 2:  // concat, columns, relu
      return [=](Tape& t, Var x) {
        Var c = t.concat(t.relu(x), t.scale(x, k));
        Var sel = t.columns(c, 2, 8);
        return t.sum(t.matmul(sel, t.constant(weights.leftCols(8).transpose())));
      };
    case 3:  // l1 through a linear layer
      return [=](Tape& t, Var x) { return t.l1_loss(t.matmul(x, t.constant(w)), other); };
    default:  // weighted cross entropy over raw logits
      return [=](Tape& t, Var x) {
        Var z = t.add(t.matmul(x, t.constant(w)), t.constant(other));
        const std::vector<int> labels{trial % 6, (trial + 1) % 6, (trial + 4) % 6};
        const std::vector<double> cw{0.1, 0.2, 0.5, 1.0, 1.5, 3.0};
        return t.cross_entropy(z, labels, cw);
      };
  }
}

inline std::int64_t cdiv(std::int64_t a, std::int64_t b) { return (a + b - 1) / b; }

inline hwnas::accel::LayerWorkload random_workload(std::mt19937_64& rng) {
  auto pick = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };
  hwnas::accel::LayerWorkload w;
  w.in_h = pick(1, 20);
  w.in_w = pick(1, 20);
  w.depthwise = pick(0, 3) == 0;
  w.c_in = pick(1, 200);
  w.c_out = w.depthwise ? w.c_in : pick(1, 200);
  w.k_h = w.k_w = std::array{1, 3, 5, 7}[static_cast<std::size_t>(pick(0, 3))];
  w.stride = pick(1, 2);
  return w;
}

inline hwnas::accel::HwConfig random_valid(std::mt19937_64& rng) {
  const auto& v = hwnas::accel::valid_configs();
  return v[std::uniform_int_distribution<std::size_t>(0, v.size() - 1)(rng)];
}

// Every power-of-two tiling up to the layer extents, ranked by (traffic,
// tile count, o, i, r, c, order).
inline std::optional<hwnas::accel::TilingChoice> brute_force(const hwnas::accel::LayerWorkload& w,
                                                             const hwnas::accel::HwConfig& h) {
  using namespace hwnas::accel;
  const int nco = static_cast<int>(cdiv(w.c_out, h.block_out()));
  const int nci = w.depthwise ? 1 : static_cast<int>(cdiv(w.c_in, h.block_in()));
  std::optional<TilingChoice> best;
  std::tuple<std::int64_t, std::int64_t, int, int, int, int, int> best_key{};
  for (int o = 1; o < 2 * nco; o *= 2)
    for (int i = 1; i < 2 * nci; i *= 2)
      for (int r = 1; r < 2 * w.out_h(); r *= 2)
        for (int c = 1; c < 2 * w.out_w(); c *= 2)
          for (int ord = 0; ord < 2; ++ord) {
            const TilingChoice t{o, i, r, c, ord == 0 ? LoopOrder::kWeightStationary : LoopOrder::kInputStationary};
            if (!fits(w, h, t)) continue;
            const auto key = std::tuple{dram_traffic(w, h, t).total(), tile_count(w, h, t), o, i, r, c, ord};
            if (!best || key < best_key) {
              best = t;
              best_key = key;
            }
          }
  return best;
}

}  // namespace oracle
