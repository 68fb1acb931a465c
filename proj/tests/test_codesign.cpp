#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>
#include <sstream>

#include "hwnas/codesign.hpp"

using namespace hwnas;
using namespace hwnas::cd;

namespace {

constexpr std::size_t kLayers = 9;
constexpr int kNnWidth = 36;

const nn::SupernetSpec& cifar() { return nn::supernet(nn::Dataset::kCifar10); }

const CostTable& table() {
  static const CostTable t(cifar());
  return t;
}

// P = bias + sum of nn_w over the architecture columns + 0.01 * j over hw column j.
sur::PerfPredictor linear_predictor(const std::vector<double>& nn_w, double bias = 1.0) {
  grad::Mlp mlp({kNnWidth + accel::kOneHotSize, 1}, 1);
  auto params = mlp.parameters();
  params[0]->value.setZero();
  for (int j = 0; j < kNnWidth; ++j) params[0]->value(j, 0) = nn_w[static_cast<std::size_t>(j)];
  for (int j = 0; j < accel::kOneHotSize; ++j) params[0]->value(kNnWidth + j, 0) = 0.01 * j;
  params[1]->value(0, 0) = bias;
  return {mlp, grad::RobustScaler::identity(), accel::Metric::kCycles, sur::TargetTransform::kIdentity, kNnWidth};
}

sur::PerfPredictor flat_predictor() { return linear_predictor(std::vector<double>(kNnWidth, 0.0)); }

// Greedy rollout always lands on `target` (zero weights, one-hot output biases).
rl::HwOptAgent fixed_agent(const accel::HwConfig& target) {
  const int obs = rl::observation_width(rl::Setting::kComposite, kNnWidth);
  grad::Mlp mlp({obs, 4, accel::kOneHotSize}, 3);
  auto params = mlp.parameters();
  for (auto* p : params) p->value.setZero();
  const auto onehot = target.one_hot();
  for (int j = 0; j < accel::kOneHotSize; ++j) params.back()->value(0, j) = onehot[static_cast<std::size_t>(j)];
  return {rl::Setting::kComposite, rl::EnvConfig{}, mlp, kNnWidth};
}

// Generator emitting `target` for every input.
HwGenNet fixed_generator(const accel::HwConfig& target) {
  grad::Mlp mlp({kNnWidth, 8, accel::kOneHotSize}, 5);
  auto params = mlp.parameters();
  for (auto* p : params) p->value.setZero();
  const auto onehot = target.one_hot();
  for (int j = 0; j < accel::kOneHotSize; ++j) params.back()->value(0, j) = onehot[static_cast<std::size_t>(j)];
  return HwGenNet(mlp);
}

sur::ValidNet flat_validnet() {
  grad::Mlp mlp({accel::kOneHotSize, 2}, 1);
  for (auto* p : mlp.parameters()) p->value.setZero();
  return sur::ValidNet(mlp);
}

// Well separated base scores: block l prefers choice (l % 4) by a margin of 0.3.
std::vector<double> separated_base() {
  std::vector<double> b(kLayers * 4, 0.8);
  for (std::size_t l = 0; l < kLayers; ++l) b[l * 4 + l % 4] = 0.2;
  return b;
}

const accel::HwConfig kGood = accel::HwConfig::parse("[5,6,5,5,16,15,18]");
const accel::HwConfig kInvalid = accel::HwConfig::parse("[6,6,6,6,20,20,20]");

}  // namespace

TEST_CASE("task oracle coefficients") {
  const TaskOracle o(kLayers, 3);
  CHECK(o.layers() == kLayers);
  CHECK(o.kappa() == 0.5);
  const std::array<double, 4> q{0.0, 2.0 / 3.0, 1.0, 1.0 / 3.0};
  for (std::size_t l = 0; l < kLayers; ++l) {
    for (std::size_t c = 0; c < 4; ++c) {
      const auto id = static_cast<nn::ChoiceId>(c);
      CHECK(o.base(l, id) >= 0.0);
      CHECK(o.base(l, id) < 1.0);
      CHECK(o.coefficient(l, id) == o.base(l, id) - 0.5 * q[c]);
    }
  }
  const TaskOracle same(kLayers, 3), other(kLayers, 4);
  CHECK(same.coefficient(2, nn::ChoiceId::kC7) == o.coefficient(2, nn::ChoiceId::kC7));
  CHECK(other.base(0, nn::ChoiceId::kC3) != o.base(0, nn::ChoiceId::kC3));

  // kappa = 0 leaves the seeded base scores.
  const TaskOracle flat(kLayers, 3, 0.0);
  CHECK(flat.coefficient(4, nn::ChoiceId::kCX) == o.base(4, nn::ChoiceId::kCX));
  // With kappa > 1 the quality bonus dominates and every block picks C7.
  CHECK(TaskOracle(kLayers, 3, 1.5).best() == nn::Architecture::uniform(kLayers, nn::ChoiceId::kC7));

  CHECK_THROWS_AS(TaskOracle(0, 1), ValidationError);
  CHECK_THROWS_AS(TaskOracle(kLayers, 1, -0.1), RangeError);
  CHECK_THROWS_AS(TaskOracle(std::vector<double>(7, 0.0), 0.5), ValidationError);
}

TEST_CASE("task loss forms agree") {
  const TaskOracle o(kLayers, 8);
  std::mt19937_64 rng(1);
  for (int t = 0; t < 20; ++t) {
    const auto a = nn::random_architecture(kLayers, rng);
    double expect = 0.0;
    for (std::size_t l = 0; l < kLayers; ++l) expect += o.coefficient(l, a.choices[l]);
    CHECK(o.loss(a) == Catch::Approx(expect).epsilon(1e-14));
    const auto onehot = nn::encode_onehot(a);
    CHECK(o.loss(onehot) == Catch::Approx(expect).epsilon(1e-14));
  }

  // Differentiable form: value equals the span form, gradient equals the coefficients.
  std::uniform_real_distribution<double> u(0.0, 1.0);
  grad::Tensor probs(1, kNnWidth);
  for (int j = 0; j < kNnWidth; ++j) probs.value(0, j) = u(rng);
  grad::Tape tape;
  probs.grad.setZero();
  auto l = o.loss(tape, tape.param(probs));
  tape.backward(l);
  const auto pv = grad::to_vector(probs.value);
  CHECK(l.scalar() == Catch::Approx(o.loss(pv)).epsilon(1e-12));
  for (int j = 0; j < kNnWidth; ++j) {
    CHECK(probs.grad(0, j) ==
          Catch::Approx(o.coefficient(static_cast<std::size_t>(j / 4), static_cast<nn::ChoiceId>(j % 4))));
  }
  CHECK_THROWS_AS(o.loss(nn::Architecture::uniform(3, nn::ChoiceId::kC3)), ValidationError);
}

TEST_CASE("task oracle best is the brute-force minimum") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const TaskOracle o(3, seed);
    nn::Architecture best;
    double best_loss = 1e300;
    for (int code = 0; code < 64; ++code) {
      nn::Architecture a;
      for (int l = 0, c = code; l < 3; ++l, c /= 4) a.choices.push_back(static_cast<nn::ChoiceId>(c % 4));
      if (o.loss(a) < best_loss) {
        best_loss = o.loss(a);
        best = a;
      }
    }
    CHECK(o.best() == best);
  }
}

TEST_CASE("config validation") {
  CodesignConfig c;
  CHECK_NOTHROW(c.validate());
  c.lambda = -1.0;
  CHECK_THROWS_AS(c.validate(), RangeError);
  c = {};
  c.iterations = -1;
  CHECK_THROWS_AS(c.validate(), RangeError);
  c = {};
  c.lr = 0.0;
  CHECK_THROWS_AS(c.validate(), RangeError);
  c = {};
  c.h0 = kInvalid;
  CHECK_THROWS_AS(c.validate(), ValidationError);

  const TaskOracle small(5, 1);
  CHECK_THROWS_AS(hwaware_nas_run(CodesignConfig{}, flat_predictor(), small), ValidationError);
  const TaskOracle o(kLayers, 1);
  CHECK_THROWS_AS(dshwnas_run(CodesignConfig{}, -1.0, flat_predictor(), flat_validnet(), o), RangeError);
}

TEST_CASE("lambda 0 reduces every method to the task optimum") {
  const TaskOracle o(separated_base(), 0.0);
  CodesignConfig cfg;
  cfg.lambda = 0.0;
  cfg.seed = 4;
  const auto agent = fixed_agent(kGood);
  const auto p = flat_predictor();

  const auto rl = rl_codesign_run(cfg, agent, p, o);
  const auto hw = hwaware_nas_run(cfg, p, o);
  const auto seq = sequential_opt_run(cfg, agent, p, o);
  CHECK(rl.arch == o.best());
  CHECK(rl.loss_history == hw.loss_history);
  CHECK(rl.alpha == hw.alpha);
  CHECK(seq.alpha == hw.alpha);
  CHECK(seq.arch == hw.arch);
  CHECK(rl.loss_history.size() == 300);
  CHECK(rl.loss_history.back() < rl.loss_history.front());

  CHECK(rl.method == "rl-codesign");
  CHECK(hw.method == "hwnas");
  CHECK(seq.method == "sequential");
  CHECK(hw.hw == accel::kDefaultConfig);
  CHECK(rl.hw == kGood);
  CHECK(seq.hw == kGood);
  for (const auto* r : {&rl, &hw, &seq}) {
    CHECK(r->valid);
    CHECK(r->task_loss == o.loss(r->arch));
    CHECK(r->perf == accel::simulate(nn::workloads_of(r->arch, cifar()), r->hw));
  }
}

TEST_CASE("hardware loss steers the architecture") {
  // Task favours C7 everywhere (coefficient 0 vs 0.5 / 0.167 / 0.333);
  // the predictor charges 1.0 per C7 block.
  const TaskOracle o(std::vector<double>(kLayers * 4, 0.5), 0.5);
  std::vector<double> w(kNnWidth, 0.0);
  for (std::size_t l = 0; l < kLayers; ++l) w[l * 4 + 2] = 1.0;
  const auto p = linear_predictor(w);
  const auto agent = fixed_agent(kGood);

  CodesignConfig cfg;
  cfg.lambda = 0.0;
  CHECK(rl_codesign_run(cfg, agent, p, o).arch == nn::Architecture::uniform(kLayers, nn::ChoiceId::kC7));
  cfg.lambda = 1.0;
  const auto r = rl_codesign_run(cfg, agent, p, o);
  // Per block argmin of coefficient + lambda * w: C5 at 0.5 - 1/3.
  CHECK(r.arch == nn::Architecture::uniform(kLayers, nn::ChoiceId::kC5));
  CHECK(hwaware_nas_run(cfg, p, o).arch == r.arch);
  // The sequential baseline ignores lambda in its search.
  CHECK(sequential_opt_run(cfg, agent, p, o).arch == nn::Architecture::uniform(kLayers, nn::ChoiceId::kC7));
}

TEST_CASE("invalid agent proposals fall back to the template") {
  const TaskOracle o(kLayers, 2);
  CodesignConfig cfg;
  const auto r = rl_codesign_run(cfg, fixed_agent(kInvalid), flat_predictor(), o);
  CHECK(r.valid);
  CHECK(r.hw == cfg.h0);
  const auto s = sequential_opt_run(cfg, fixed_agent(kInvalid), flat_predictor(), o);
  CHECK(s.hw == cfg.h0);
}

TEST_CASE("co-design runs are deterministic per seed") {
  const TaskOracle o(kLayers, 5);
  CodesignConfig cfg;
  cfg.seed = 9;
  cfg.iterations = 50;
  const auto p = flat_predictor();
  const auto a = rl_codesign_run(cfg, fixed_agent(kGood), p, o);
  const auto b = rl_codesign_run(cfg, fixed_agent(kGood), p, o);
  CHECK(a.alpha == b.alpha);
  CHECK(a.loss_history == b.loss_history);
  cfg.seed = 10;
  CHECK(rl_codesign_run(cfg, fixed_agent(kGood), p, o).alpha != a.alpha);
}

TEST_CASE("evaluate_design reports the simulator") {
  const TaskOracle o(kLayers, 1);
  const CodesignConfig cfg;
  const auto arch = nn::Architecture::uniform(kLayers, nn::ChoiceId::kCX);
  const auto r = evaluate_design("x", cfg, arch, kGood, o);
  CHECK(r.valid);
  CHECK(r.perf == table().report(arch, kGood));
  const auto bad = evaluate_design("x", cfg, arch, kInvalid, o);
  CHECK_FALSE(bad.valid);
  CHECK(bad.perf == accel::PerfReport{});
  CHECK(bad.task_loss == o.loss(arch));
}

TEST_CASE("dshwnas") {
  const TaskOracle o(separated_base(), 0.0);
  CodesignConfig cfg;
  cfg.lambda = 0.0;
  cfg.seed = 2;
  const auto vn = flat_validnet();
  const auto r = dshwnas_run(cfg, 0.0, flat_predictor(), vn, o);
  CHECK(r.method == "dshwnas");
  REQUIRE(r.beta.has_value());
  CHECK(*r.beta == 0.0);
  CHECK(r.arch == o.best());
  CHECK(r.valid == accel::is_valid(r.hw).valid);
  CHECK(r.loss_history.size() == 300);
  const auto again = dshwnas_run(cfg, 0.0, flat_predictor(), vn, o);
  CHECK(again.hw == r.hw);
  CHECK(again.loss_history == r.loss_history);

  // With lambda > 0 the hardware logits follow the predictor: every head
  // drifts to its first (cheapest) option.
  cfg.lambda = 10.0;
  const auto cheap = dshwnas_run(cfg, 0.0, flat_predictor(), vn, o);
  CHECK(cheap.hw == accel::HwConfig::from_params(accel::kParamMin));
  CHECK(cheap.valid == accel::is_valid(cheap.hw).valid);
}

TEST_CASE("sweep grids") {
  const auto b = beta_sweep();
  REQUIRE(b.size() == 15);
  CHECK(b.front() == Catch::Approx(1e-7));
  CHECK(b[7] == 1.0);
  CHECK(b.back() == Catch::Approx(1e7));
  const auto l = perf_hwgen_lambdas();
  REQUIRE(l.size() == 7);
  CHECK(l.front() == Catch::Approx(1e-4));
  CHECK(l.back() == Catch::Approx(1e2));
}

TEST_CASE("results csv") {
  CHECK(results_csv_header() == "method,seed,lambda,beta,arch,hw,latency_s,edp_js,task_loss,valid");
  CodesignResult r;
  r.method = "dshwnas";
  r.seed = 3;
  r.lambda = 0.1;
  r.beta = 1e-5;
  r.arch = nn::Architecture::parse("35x735x73");
  r.hw = kGood;
  r.perf.latency_s = 0.00125;
  r.perf.edp_js = 2.5e-7;
  r.task_loss = -1.5;
  r.valid = true;
  CHECK(to_csv_row(r) == "dshwnas,3,0.1,1e-05,35x735x73,\"[5,6,5,5,16,15,18]\",0.00125,2.5e-07,-1.5,1");
  r.beta.reset();
  r.valid = false;
  CHECK(to_csv_row(r) == "dshwnas,3,0.1,,35x735x73,\"[5,6,5,5,16,15,18]\",0.00125,2.5e-07,-1.5,0");
  std::ostringstream os;
  const std::vector<CodesignResult> rows{r, r};
  write_results_csv(os, rows);
  CHECK(os.str() == results_csv_header() + "\n" + to_csv_row(r) + "\n" + to_csv_row(r) + "\n");
}

TEST_CASE("exhaustive labels match brute force") {
  std::mt19937_64 rng(12);
  for (int t = 0; t < 2; ++t) {
    const auto a = nn::random_architecture(kLayers, rng);
    const auto wl = nn::workloads_of(a, cifar());
    for (auto m : {accel::Metric::kCycles, accel::Metric::kEdp}) {
      accel::HwConfig best;
      double best_v = 1e300;
      for (const auto& h : accel::enumerate_space()) {
        if (!accel::is_valid(h).valid) continue;
        const double v = accel::metric_value(accel::simulate(wl, h), m);
        if (v < best_v) {
          best_v = v;
          best = h;
        }
      }
      const std::vector<nn::Architecture> one{a};
      CHECK(exhaustive_labels(table(), one, m).front() == best);
    }
  }
}

TEST_CASE("hardware generators") {
  SECTION("checkpoint round trip") {
    HwGenConfig cfg;
    cfg.train_archs = 64;
    cfg.epochs = 2;
    cfg.hidden = {32};
    auto g = exhaustive_hwgen_train(cfg, table());
    const auto back = HwGenNet::from_json(nlohmann::json::parse(g.to_json().dump()));
    std::mt19937_64 rng(3);
    for (int i = 0; i < 20; ++i) {
      const auto x = nn::encode_onehot(nn::random_architecture(kLayers, rng));
      CHECK(back.generate(x) == g.generate(x));
    }
    CHECK_THROWS_AS(HwGenNet::from_json({{"version", 1}, {"kind", "agent"}}), ValidationError);
    CHECK_THROWS_AS(HwGenNet(grad::Mlp({36, 35}, 1)), ValidationError);
    CHECK_THROWS_AS(g.generate(std::vector<double>(12, 0.0)), ValidationError);
  }

  SECTION("exhaustive generator fits its labels") {
    HwGenConfig cfg;
    cfg.train_archs = 200;
    cfg.epochs = 20;
    cfg.hidden = {64};
    const auto g = exhaustive_hwgen_train(cfg, table());
    const auto archs = rl::sample_architectures(200, kLayers, cfg.seed);
    const auto labels = exhaustive_labels(table(), archs, cfg.metric);
    int hits = 0;
    for (std::size_t i = 0; i < archs.size(); ++i) hits += g.generate(nn::encode_onehot(archs[i])) == labels[i];
    CHECK(hits >= 190);
    const auto again = exhaustive_hwgen_train(cfg, table());
    CHECK(again.generate(nn::encode_onehot(archs[0])) == g.generate(nn::encode_onehot(archs[0])));
  }

  SECTION("performance generator follows the predictor") {
    HwGenConfig cfg;
    cfg.train_archs = 128;
    cfg.epochs = 20;
    cfg.lr = 1e-2;
    cfg.hidden = {32};
    auto g = perf_hwgen_train(cfg, 0.0, flat_predictor(), flat_validnet());
    std::mt19937_64 rng(4);
    for (int i = 0; i < 10; ++i) {
      CHECK(g.generate(nn::encode_onehot(nn::random_architecture(kLayers, rng))) ==
            accel::HwConfig::from_params(accel::kParamMin));
    }
    CHECK_THROWS_AS(perf_hwgen_train(cfg, -1.0, flat_predictor(), flat_validnet()), RangeError);
  }

  SECTION("evaluation counts invalid outputs as zero") {
    const rl::SimulatorEvaluator eval(table(), accel::Metric::kCycles);
    const auto archs = rl::sample_architectures(5, kLayers, 1);
    const auto bad = evaluate_hwgen(fixed_generator(kInvalid), archs, eval);
    CHECK(bad.optimality == 0.0);
    CHECK(bad.invalid_fraction == 1.0);
    const auto good = evaluate_hwgen(fixed_generator(kGood), archs, eval);
    CHECK(good.invalid_fraction == 0.0);
    double expect = 0.0;
    for (const auto& a : archs) expect += table().grid_search(a, accel::Metric::kCycles).value / table().metric(a, *table().slot(kGood), accel::Metric::kCycles);
    CHECK(good.optimality == Catch::Approx(100.0 * expect / 5.0).epsilon(1e-12));
  }
}
