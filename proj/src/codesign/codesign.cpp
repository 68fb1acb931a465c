#include "hwnas/codesign.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numeric>
#include <ostream>
#include <random>
#include <sstream>

namespace hwnas::cd {

using grad::Matrix;

namespace {

constexpr std::array<int, accel::kNumParams> kHwSegments{4, 4, 2, 2, 8, 8, 8};

std::vector<int> arch_segments(std::size_t layers) { return std::vector<int>(layers, nn::kNumChoices); }

std::size_t layers_of(nn::Dataset d) { return static_cast<std::size_t>(nn::supernet(d).num_choice_blocks()); }

void check_widths(std::size_t layers, const TaskOracle& oracle, const sur::PerfPredictor& predictor) {
  if (oracle.layers() != layers) {
    throw ValidationError("task oracle has " + std::to_string(oracle.layers()) + " blocks, supernet has " +
                          std::to_string(layers));
  }
  if (predictor.nn_width() != static_cast<int>(layers) * nn::kNumChoices) {
    throw ValidationError("predictor was trained for a different supernet");
  }
}

grad::Tensor init_logits(Eigen::Index width, std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, 1e-3);
  grad::Tensor t(1, width);
  for (Eigen::Index i = 0; i < width; ++i) {
    t.value(0, i) = g(rng);
  }
  return t;
}

// Shared architecture search. hw_for maps sigma(alpha) to the hardware used
// in the HW loss (only called when lambda != 0).
struct Search {
  nn::Architecture arch;
  std::vector<double> alpha;
  std::vector<double> history;
};

Search search_architecture(const CodesignConfig& cfg, double lambda, const sur::PerfPredictor& predictor,
                           const TaskOracle& oracle,
                           const std::function<accel::HwConfig(const std::vector<double>&)>& hw_for) {
  const auto layers = layers_of(cfg.dataset);
  check_widths(layers, oracle, predictor);
  auto pred = predictor;
  const auto segs = arch_segments(layers);
  std::mt19937_64 rng(cfg.seed);
  auto alpha = init_logits(static_cast<Eigen::Index>(layers * nn::kNumChoices), rng);
  grad::Adam opt({&alpha}, grad::AdamConfig{.lr = cfg.lr});
  Search s;
  for (int it = 0; it < cfg.iterations; ++it) {
    grad::Tape tape;
    opt.zero_grad();
    auto probs = tape.softmax(tape.param(alpha), segs);
    auto total = oracle.loss(tape, probs);
    if (lambda != 0.0) {
      const auto hw = hw_for(grad::to_vector(probs.value()));
      auto p = pred.forward(tape, tape.concat(probs, tape.constant(grad::row(hw.one_hot()))));
      total = tape.add(total, tape.scale(p, lambda));
    }
    tape.backward(total);
    s.history.push_back(total.scalar());
    opt.step();
  }
  s.alpha = grad::to_vector(alpha.value);
  s.arch = nn::Architecture::from_scores(s.alpha);
  return s;
}

}  // namespace

TaskOracle::TaskOracle(std::size_t layers, std::uint64_t seed, double kappa) : kappa_(kappa) {
  if (layers == 0) {
    throw ValidationError("task oracle needs at least one block");
  }
  if (!(kappa >= 0.0)) {
    throw RangeError("kappa must be >= 0");
  }
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  base_.resize(layers * nn::kNumChoices);
  for (auto& b : base_) {
    b = u(rng);
  }
}

TaskOracle::TaskOracle(std::vector<double> base, double kappa) : base_(std::move(base)), kappa_(kappa) {
  if (base_.empty() || base_.size() % nn::kNumChoices != 0) {
    throw ValidationError("base scores must be a non-empty L x 4 matrix");
  }
  if (!(kappa >= 0.0)) {
    throw RangeError("kappa must be >= 0");
  }
}

double TaskOracle::base(std::size_t layer, nn::ChoiceId c) const {
  return base_.at(layer * nn::kNumChoices + static_cast<std::size_t>(c));
}

double TaskOracle::coefficient(std::size_t layer, nn::ChoiceId c) const {
  return base(layer, c) - kappa_ * kQuality[static_cast<std::size_t>(c)];
}

double TaskOracle::loss(const nn::Architecture& a) const {
  if (a.size() != layers()) {
    throw ValidationError("architecture has " + std::to_string(a.size()) + " blocks, oracle has " +
                          std::to_string(layers()));
  }
  double l = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    l += coefficient(i, a.choices[i]);
  }
  return l;
}

double TaskOracle::loss(std::span<const double> probs) const {
  if (probs.size() != base_.size()) {
    throw ValidationError("probability matrix has the wrong width");
  }
  double l = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    l += probs[i] * coefficient(i / nn::kNumChoices, static_cast<nn::ChoiceId>(i % nn::kNumChoices));
  }
  return l;
}

grad::Var TaskOracle::loss(grad::Tape& tape, grad::Var probs) const {
  Matrix coef(static_cast<Eigen::Index>(base_.size()), 1);
  for (std::size_t i = 0; i < base_.size(); ++i) {
    coef(static_cast<Eigen::Index>(i), 0) =
        coefficient(i / nn::kNumChoices, static_cast<nn::ChoiceId>(i % nn::kNumChoices));
  }
  return tape.matmul(probs, tape.constant(std::move(coef)));
}

nn::Architecture TaskOracle::best() const {
  nn::Architecture a;
  for (std::size_t l = 0; l < layers(); ++l) {
    auto best = nn::ChoiceId::kC3;
    for (auto c : nn::kAllChoices) {
      if (coefficient(l, c) < coefficient(l, best)) {
        best = c;
      }
    }
    a.choices.push_back(best);
  }
  return a;
}

void CodesignConfig::validate() const {
  if (iterations < 0) {
    throw RangeError("iterations must be >= 0");
  }
  if (!(lr > 0.0)) {
    throw RangeError("learning rate must be > 0");
  }
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) {
    throw RangeError("lambda must be >= 0");
  }
  h0.check_range();
  if (!accel::is_valid(h0).valid) {
    throw ValidationError("template configuration " + h0.to_string() + " is invalid");
  }
}

nlohmann::json CodesignConfig::to_json() const {
  return {{"dataset", std::string(nn::to_string(dataset))},
          {"lambda", lambda},
          {"iterations", iterations},
          {"lr", lr},
          {"seed", seed},
          {"h0", h0.to_string()}};
}

std::string results_csv_header() { return "method,seed,lambda,beta,arch,hw,latency_s,edp_js,task_loss,valid"; }

std::string to_csv_row(const CodesignResult& r) {
  std::ostringstream os;
  os << std::setprecision(12);
  os << r.method << ',' << r.seed << ',' << r.lambda << ',';
  if (r.beta) {
    os << *r.beta;
  }
  os << ',' << r.arch.to_string() << ",\"" << r.hw.to_string() << "\"," << r.perf.latency_s << ','
     << r.perf.edp_js << ',' << r.task_loss << ',' << (r.valid ? 1 : 0);
  return os.str();
}

void write_results_csv(std::ostream& os, std::span<const CodesignResult> rows) {
  os << results_csv_header() << '\n';
  for (const auto& r : rows) {
    os << to_csv_row(r) << '\n';
  }
}

CodesignResult evaluate_design(std::string method, const CodesignConfig& cfg, const nn::Architecture& arch,
                               const accel::HwConfig& hw, const TaskOracle& oracle) {
  CodesignResult r;
  r.method = std::move(method);
  r.seed = cfg.seed;
  r.lambda = cfg.lambda;
  r.arch = arch;
  r.hw = hw;
  r.valid = accel::is_valid(hw).valid;
  if (r.valid) {
    r.perf = accel::simulate(nn::workloads_of(arch, nn::supernet(cfg.dataset)), hw);
  }
  r.task_loss = oracle.loss(arch);
  return r;
}

CodesignResult rl_codesign_run(const CodesignConfig& cfg, const rl::HwOptAgent& agent,
                               const sur::PerfPredictor& predictor, const TaskOracle& oracle) {
  cfg.validate();
  if (agent.nn_width() != predictor.nn_width()) {
    throw ValidationError("agent and predictor disagree on the architecture width");
  }
  auto s = search_architecture(cfg, cfg.lambda, predictor, oracle,
                               [&](const std::vector<double>& probs) { return agent.hwopt(probs, cfg.h0); });
  auto r = evaluate_design("rl-codesign", cfg, s.arch, agent.hwopt(nn::encode_onehot(s.arch), cfg.h0), oracle);
  r.alpha = std::move(s.alpha);
  r.loss_history = std::move(s.history);
  return r;
}

CodesignResult hwaware_nas_run(const CodesignConfig& cfg, const sur::PerfPredictor& predictor,
                               const TaskOracle& oracle) {
  cfg.validate();
  auto s = search_architecture(cfg, cfg.lambda, predictor, oracle,
                               [&](const std::vector<double>&) { return cfg.h0; });
  auto r = evaluate_design("hwnas", cfg, s.arch, cfg.h0, oracle);
  r.alpha = std::move(s.alpha);
  r.loss_history = std::move(s.history);
  return r;
}

CodesignResult sequential_opt_run(const CodesignConfig& cfg, const rl::HwOptAgent& agent,
                                  const sur::PerfPredictor& predictor, const TaskOracle& oracle) {
  cfg.validate();
  auto s = search_architecture(cfg, 0.0, predictor, oracle, {});
  auto r = evaluate_design("sequential", cfg, s.arch, agent.hwopt(nn::encode_onehot(s.arch), cfg.h0), oracle);
  r.lambda = 0.0;
  r.alpha = std::move(s.alpha);
  r.loss_history = std::move(s.history);
  return r;
}

CodesignResult dshwnas_run(const CodesignConfig& cfg, double beta, const sur::PerfPredictor& predictor,
                           const sur::ValidNet& validnet, const TaskOracle& oracle) {
  cfg.validate();
  if (!(beta >= 0.0) || !std::isfinite(beta)) {
    throw RangeError("beta must be >= 0");
  }
  const auto layers = layers_of(cfg.dataset);
  check_widths(layers, oracle, predictor);
  auto pred = predictor;
  auto vnet = validnet;
  const auto segs = arch_segments(layers);
  std::mt19937_64 rng(cfg.seed);
  auto alpha = init_logits(static_cast<Eigen::Index>(layers * nn::kNumChoices), rng);
  auto gamma = init_logits(accel::kOneHotSize, rng);
  grad::Adam opt({&alpha, &gamma}, grad::AdamConfig{.lr = cfg.lr});
  std::vector<double> history;
  for (int it = 0; it < cfg.iterations; ++it) {
    grad::Tape tape;
    opt.zero_grad();
    auto pa = tape.softmax(tape.param(alpha), segs);
    auto pg = tape.softmax(tape.param(gamma), kHwSegments);
    auto total = oracle.loss(tape, pa);
    total = tape.add(total, tape.scale(pred.forward(tape, tape.concat(pa, pg)), cfg.lambda));
    total = tape.add(total, tape.scale(tape.l1_loss(vnet.forward(tape, pg), Matrix::Ones(1, 1)), beta));
    tape.backward(total);
    history.push_back(total.scalar());
    opt.step();
  }
  const auto a = grad::to_vector(alpha.value);
  const auto g = grad::to_vector(gamma.value);
  auto r = evaluate_design("dshwnas", cfg, nn::Architecture::from_scores(a), accel::HwConfig::from_scores(g), oracle);
  r.beta = beta;
  r.alpha = a;
  r.loss_history = std::move(history);
  return r;
}

std::vector<double> beta_sweep() {
  std::vector<double> b;
  for (int x = -7; x <= 7; ++x) {
    b.push_back(std::pow(10.0, x));
  }
  return b;
}

nlohmann::json HwGenConfig::to_json() const {
  return {{"train_archs", train_archs}, {"epochs", epochs}, {"batch_size", batch_size},
          {"lr", lr},                   {"hidden", hidden}, {"metric", std::string(accel::to_string(metric))},
          {"seed", seed}};
}

HwGenNet::HwGenNet(grad::Mlp mlp) : mlp_(std::move(mlp)) {
  if (mlp_.output_width() != accel::kOneHotSize || mlp_.input_width() % nn::kNumChoices != 0) {
    throw ValidationError("hardware generator must map 4L inputs to 36 head logits");
  }
}

accel::HwConfig HwGenNet::generate(std::span<const double> nn_vec) const {
  if (static_cast<int>(nn_vec.size()) != mlp_.input_width()) {
    throw ValidationError("architecture vector has the wrong width for this generator");
  }
  return accel::HwConfig::from_scores(grad::to_vector(mlp_.predict(grad::row(nn_vec))));
}

nlohmann::json HwGenNet::to_json() const {
  return {{"version", grad::kCheckpointVersion}, {"kind", "hwgen"}, {"mlp", mlp_.to_json()}};
}

HwGenNet HwGenNet::from_json(const nlohmann::json& j) {
  if (j.value("version", -1) != grad::kCheckpointVersion || j.value("kind", "") != "hwgen") {
    throw ValidationError("not a hardware generator checkpoint");
  }
  return HwGenNet(grad::Mlp::from_json(j.at("mlp")));
}

std::vector<accel::HwConfig> exhaustive_labels(const CostTable& table, std::span<const nn::Architecture> archs,
                                               accel::Metric metric) {
  std::vector<accel::HwConfig> out;
  out.reserve(archs.size());
  for (const auto& a : archs) {
    out.push_back(table.grid_search(a, metric).config);
  }
  return out;
}

namespace {

grad::Mlp make_generator(const HwGenConfig& cfg, int nn_width) {
  if (cfg.train_archs < 1 || cfg.epochs < 0 || cfg.batch_size < 1) {
    throw RangeError("generator training needs >= 1 architecture, epochs >= 0 and batch >= 1");
  }
  std::vector<int> w{nn_width};
  w.insert(w.end(), cfg.hidden.begin(), cfg.hidden.end());
  w.push_back(accel::kOneHotSize);
  return {w, cfg.seed};
}

Matrix arch_matrix(std::span<const nn::Architecture> archs) {
  const auto width = static_cast<Eigen::Index>(archs.front().size() * nn::kNumChoices);
  Matrix x(static_cast<Eigen::Index>(archs.size()), width);
  for (std::size_t i = 0; i < archs.size(); ++i) {
    x.row(static_cast<Eigen::Index>(i)) = grad::row(nn::encode_onehot(archs[i]));
  }
  return x;
}

// Calls step(batch rows) for each shuffled minibatch of every epoch.
void for_each_batch(std::size_t n, const HwGenConfig& cfg, const std::function<void(std::span<const std::size_t>)>& step) {
  std::mt19937_64 rng(cfg.seed ^ 0x5bd1e995ULL);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  const auto bs = static_cast<std::size_t>(cfg.batch_size);
  for (int e = 0; e < cfg.epochs; ++e) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t b = 0; b < n; b += bs) {
      step(std::span<const std::size_t>(order.data() + b, std::min(bs, n - b)));
    }
  }
}

Matrix gather(const Matrix& m, std::span<const std::size_t> idx) {
  Matrix out(static_cast<Eigen::Index>(idx.size()), m.cols());
  for (std::size_t r = 0; r < idx.size(); ++r) {
    out.row(static_cast<Eigen::Index>(r)) = m.row(static_cast<Eigen::Index>(idx[r]));
  }
  return out;
}

}  // namespace

HwGenNet exhaustive_hwgen_train(const HwGenConfig& cfg, const CostTable& table) {
  const auto layers = table.layers();
  auto mlp = make_generator(cfg, static_cast<int>(layers) * nn::kNumChoices);
  const auto archs = rl::sample_architectures(static_cast<std::size_t>(cfg.train_archs), layers, cfg.seed);
  const auto labels = exhaustive_labels(table, archs, cfg.metric);
  const Matrix x = arch_matrix(archs);
  auto params = mlp.parameters();
  grad::Adam opt(params, grad::AdamConfig{.lr = cfg.lr});
  for_each_batch(archs.size(), cfg, [&](std::span<const std::size_t> idx) {
    grad::Tape tape;
    opt.zero_grad();
    auto logits = mlp.forward(tape, tape.constant(gather(x, idx)));
    grad::Var total;
    int off = 0;
    for (int k = 0; k < accel::kNumParams; ++k) {
      const int w = kHwSegments[static_cast<std::size_t>(k)];
      std::vector<int> y(idx.size());
      for (std::size_t r = 0; r < idx.size(); ++r) {
        y[r] = labels[idx[r]].params()[static_cast<std::size_t>(k)] - accel::kParamMin[static_cast<std::size_t>(k)];
      }
      const std::vector<double> ones(static_cast<std::size_t>(w), 1.0);
      auto ce = tape.cross_entropy(tape.columns(logits, off, w), y, ones);
      total = k == 0 ? ce : tape.add(total, ce);
      off += w;
    }
    tape.backward(total);
    if (!std::isfinite(total.scalar())) {
      throw TrainingFailure("exhaustive generator loss became non-finite");
    }
    opt.step();
  });
  return HwGenNet(std::move(mlp));
}

HwGenNet perf_hwgen_train(const HwGenConfig& cfg, double lambda, const sur::PerfPredictor& predictor,
                          const sur::ValidNet& validnet) {
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) {
    throw RangeError("lambda must be >= 0");
  }
  const int nn_width = predictor.nn_width();
  auto mlp = make_generator(cfg, nn_width);
  auto pred = predictor;
  auto vnet = validnet;
  const auto archs = rl::sample_architectures(static_cast<std::size_t>(cfg.train_archs),
                                              static_cast<std::size_t>(nn_width / nn::kNumChoices), cfg.seed);
  const Matrix x = arch_matrix(archs);
  auto params = mlp.parameters();
  grad::Adam opt(params, grad::AdamConfig{.lr = cfg.lr});
  for_each_batch(archs.size(), cfg, [&](std::span<const std::size_t> idx) {
    grad::Tape tape;
    opt.zero_grad();
    const auto n = static_cast<double>(idx.size());
    auto xb = tape.constant(gather(x, idx));
    auto soft = tape.softmax(mlp.forward(tape, xb), kHwSegments);
    auto hw_loss = tape.scale(tape.sum(pred.forward(tape, tape.concat(xb, soft))), 1.0 / n);
    auto valid_loss = tape.l1_loss(vnet.forward(tape, soft), Matrix::Ones(static_cast<Eigen::Index>(idx.size()), 1));
    auto total = tape.add(hw_loss, tape.scale(valid_loss, lambda));
    tape.backward(total);
    if (!std::isfinite(total.scalar())) {
      throw TrainingFailure("performance generator loss became non-finite");
    }
    opt.step();
  });
  return HwGenNet(std::move(mlp));
}

std::vector<double> perf_hwgen_lambdas() {
  std::vector<double> l;
  for (int x = -4; x <= 2; ++x) {
    l.push_back(std::pow(10.0, x));
  }
  return l;
}

HwGenEval evaluate_hwgen(const HwGenNet& gen, std::span<const nn::Architecture> archs, const rl::Evaluator& eval) {
  const auto r = rl::optimality([&](const nn::Architecture& a) { return gen.generate(nn::encode_onehot(a)); },
                                archs, eval);
  return {r.percent, static_cast<double>(r.invalid) / static_cast<double>(archs.size())};
}

}  // namespace hwnas::cd
