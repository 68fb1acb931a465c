#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <random>

#include "hwnas/rlopt.hpp"

using namespace hwnas;
using namespace hwnas::rl;
using grad::Matrix;

namespace {

constexpr int kNnWidth = 36;

// Linear predictor: P = bias + sum_j w_j x_j with w_j = 0.01 * j on the hw
// columns and 0 on the architecture columns. P(H) is computed independently below.
sur::PerfPredictor linear_predictor(double bias) {
  grad::Mlp mlp({kNnWidth + accel::kOneHotSize, 1}, 1);
  auto params = mlp.parameters();
  params[0]->value.setZero();
  for (int j = 0; j < accel::kOneHotSize; ++j) params[0]->value(kNnWidth + j, 0) = 0.01 * j;
  params[1]->value(0, 0) = bias;
  return {mlp, grad::RobustScaler::identity(), accel::Metric::kCycles, sur::TargetTransform::kIdentity, kNnWidth};
}

double linear_p(const accel::HwConfig& h, double bias) {
  double p = bias;
  const auto par = h.params();
  for (int i = 0; i < accel::kNumParams; ++i) p += 0.01 * (accel::kOneHotOffset[i] + par[i] - accel::kParamMin[i]);
  return p;
}

sur::PerfPredictor constant_predictor(double value) {
  grad::Mlp mlp({kNnWidth + accel::kOneHotSize, 1}, 1);
  auto params = mlp.parameters();
  params[0]->value.setZero();
  params[1]->value(0, 0) = value;
  return {mlp, grad::RobustScaler::identity(), accel::Metric::kCycles, sur::TargetTransform::kIdentity, kNnWidth};
}

std::vector<int> composite_action(const accel::HwConfig& h) {
  const auto p = h.params();
  std::vector<int> a(accel::kNumParams);
  for (int i = 0; i < accel::kNumParams; ++i) a[i] = p[i] - accel::kParamMin[i];
  return a;
}

// Agent whose greedy rollout always lands on `target` (zero weights, one-hot biases).
HwOptAgent fixed_agent(const accel::HwConfig& target) {
  const int obs = observation_width(Setting::kComposite, kNnWidth);
  grad::Mlp mlp({obs, 4, accel::kOneHotSize}, 3);
  auto params = mlp.parameters();
  for (auto* p : params) p->value.setZero();
  const auto onehot = target.one_hot();
  for (int j = 0; j < accel::kOneHotSize; ++j) params.back()->value(0, j) = onehot[static_cast<std::size_t>(j)];
  return {Setting::kComposite, EnvConfig{}, mlp, kNnWidth};
}

const CostTable& table() {
  static const CostTable t(nn::supernet(nn::Dataset::kCifar10));
  return t;
}

const std::vector<double> kArch = nn::encode_onehot(nn::Architecture::uniform(9, nn::ChoiceId::kC5));

double fd_max_rel_error(const std::function<double(const Matrix&)>& f, const Matrix& x, const Matrix& analytic) {
  double worst = 0.0;
  const double h = 1e-6;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    Matrix xp = x, xm = x;
    xp.data()[i] += h;
    xm.data()[i] -= h;
    const double num = (f(xp) - f(xm)) / (2 * h);
    const double a = analytic.data()[i];
    worst = std::max(worst, std::abs(a - num) / std::max({1.0, std::abs(a), std::abs(num)}));
  }
  return worst;
}

}  // namespace

TEST_CASE("composite rewards") {
  const auto p = constant_predictor(0.4);
  EnvConfig cfg;
  cfg.c_inv = 3.0;
  cfg.t_max = 1;
  Env env(Setting::kComposite, cfg, &p, kNnWidth);

  env.reset(kArch);
  const auto valid = accel::HwConfig::parse("[4,4,5,5,15,16,17]");
  REQUIRE(accel::is_valid(valid).valid);
  auto s = env.step(composite_action(valid));
  CHECK(s.done);
  CHECK(s.reward == Catch::Approx(-0.4).margin(1e-12));
  CHECK(env.config() == valid);

  env.reset(kArch);
  const auto invalid = accel::HwConfig::from_params(accel::kParamMax);
  s = env.step(composite_action(invalid));
  CHECK(s.reward == Catch::Approx(-0.4 - 3.0).margin(1e-12));

  CHECK_THROWS_AS(env.step(composite_action(valid)), ValidationError);
  env.reset(kArch);
  auto bad = composite_action(valid);
  bad[2] = 2;
  CHECK_THROWS_AS(env.step(bad), RangeError);
  CHECK_THROWS_AS(env.step(std::vector<int>{0, 0}), RangeError);
}

TEST_CASE("composite intermediate penalty") {
  const auto p = linear_predictor(0.2);
  EnvConfig cfg;
  cfg.c_inv = 1.5;
  cfg.b = 0.3;
  cfg.t_max = 3;
  Env env(Setting::kComposite, cfg, &p, kNnWidth);
  env.reset(kArch);
  REQUIRE(episode_length(Setting::kComposite, cfg) == 3);

  const auto worse = accel::HwConfig::parse("[5,5,5,5,15,18,17]");
  const auto better = accel::HwConfig::parse("[3,3,5,5,13,13,13]");
  REQUIRE(linear_p(worse, 0.2) > linear_p(accel::kDefaultConfig, 0.2));
  auto s = env.step(composite_action(worse));
  CHECK_FALSE(s.done);
  CHECK(s.reward == -0.3);
  s = env.step(composite_action(better));
  CHECK(s.reward == 0.0);
  s = env.step(composite_action(better));
  CHECK(s.done);
  CHECK(s.reward == Catch::Approx(-linear_p(better, 0.2)).margin(1e-12));
}

TEST_CASE("sequential episodes") {
  const auto p = linear_predictor(-0.1);
  EnvConfig cfg;
  cfg.c_inv = 2.5;
  cfg.t_max = 2;
  Env env(Setting::kSequential, cfg, &p, kNnWidth);
  REQUIRE(episode_length(Setting::kSequential, cfg) == 14);
  env.reset(kArch);
  CHECK(env.observation().size() == static_cast<std::size_t>(kNnWidth + 36 + 7));

  // Pass 1 sets every parameter to its minimum; action 7 wraps modulo the width.
  int steps = 0;
  Env::Step s;
  for (int k = 0; k < 7; ++k) {
    const auto obs = env.observation();
    CHECK(obs[static_cast<std::size_t>(kNnWidth + 36 + k)] == 1.0);
    const int a = accel::kParamWidth[k] == 2 ? 7 : 0;  // 7 % 2 == 1
    s = env.step(std::vector<int>{a});
    ++steps;
    CHECK(s.reward == 0.0);
    CHECK_FALSE(s.done);
  }
  CHECK(env.config() == accel::HwConfig::parse("[3,3,6,6,13,13,13]"));
  for (int k = 0; k < 7; ++k) {
    s = env.step(std::vector<int>{accel::kParamWidth[k] - 1});
    ++steps;
    if (k < 6) CHECK(s.reward == 0.0);
  }
  CHECK(steps == 14);
  CHECK(s.done);
  const auto all_max = accel::HwConfig::from_params(accel::kParamMax);
  CHECK(env.config() == all_max);
  CHECK(s.reward == Catch::Approx(-linear_p(all_max, -0.1) - 2.5).margin(1e-12));
  CHECK_THROWS_AS(env.step(std::vector<int>{0}), ValidationError);
  env.reset(kArch);
  CHECK_THROWS_AS(env.step(std::vector<int>{8}), RangeError);
}

TEST_CASE("env config validation") {
  EnvConfig c;
  c.t_max = 0;
  CHECK_THROWS_AS(c.validate(), RangeError);
  c.t_max = 1;
  c.c_inv = -1.0;
  CHECK_THROWS_AS(c.validate(), RangeError);
  c.c_inv = 1.0;
  CHECK(EnvConfig::from_json(c.to_json()).c_inv == 1.0);
  CHECK_THROWS_AS(parse_setting("flat"), ValidationError);
}

TEST_CASE("reward normalizer") {
  RewardNormalizer n;
  std::mt19937_64 rng(4);
  std::normal_distribution<double> g(2.0, 3.0);
  std::vector<double> xs;
  for (int i = 0; i < 500; ++i) {
    const auto before = n.count();
    xs.push_back(g(rng));
    n.update(xs.back());
    CHECK(n.count() == before + 1);
  }
  double mean = 0.0;
  for (double x : xs) mean += x / xs.size();
  double var = 0.0;
  for (double x : xs) var += (x - mean) * (x - mean) / (xs.size() - 1);
  CHECK(n.mean() == Catch::Approx(mean).epsilon(1e-12));
  CHECK(n.variance() == Catch::Approx(var).epsilon(1e-10));
  for (int i = 0; i + 1 < 500; ++i) {
    CHECK((xs[i] < xs[i + 1]) == (n.normalize(xs[i]) < n.normalize(xs[i + 1])));
    CHECK((xs[i] < 0) == (n.normalize(xs[i]) < 0));
  }
}

TEST_CASE("ppo policy loss") {
  const std::vector<int> heads{2};
  grad::Tape tape;
  auto z = tape.input(Matrix::Zero(1, 2));
  const double ent = 0.01;
  auto loss = ppo_policy_loss(tape, z, heads, {{1}}, std::vector{std::log(0.5)}, std::vector{1.0}, 0.2, ent);
  CHECK(loss.scalar() == Catch::Approx(-1.0 - ent * std::log(2.0)).margin(1e-12));

  // Finite differences over random logits, actions, advantages, inside and outside the clip range.
  std::mt19937_64 rng(8);
  std::normal_distribution<double> g;
  const std::vector<int> fh{4, 4, 2, 2, 8, 8, 8};
  for (int trial = 0; trial < 20; ++trial) {
    const int n = 5;
    Matrix x(n, 36);
    for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = g(rng);
    std::vector<std::vector<int>> acts(n);
    std::vector<double> old(n), adv(n);
    for (int r = 0; r < n; ++r) {
      for (int w : fh) acts[r].push_back(std::uniform_int_distribution<int>(0, w - 1)(rng));
      old[r] = -8.0 + 2.0 * g(rng);
      adv[r] = g(rng);
    }
    auto f = [&](const Matrix& m) {
      grad::Tape t;
      return ppo_policy_loss(t, t.constant(m), fh, acts, old, adv, 0.2, 0.05).scalar();
    };
    grad::Tape t;
    auto in = t.input(x);
    t.backward(ppo_policy_loss(t, in, fh, acts, old, adv, 0.2, 0.05));
    CHECK(fd_max_rel_error(f, x, in.grad()) < 1e-4);
  }
}

TEST_CASE("value and huber losses") {
  std::mt19937_64 rng(9);
  std::normal_distribution<double> g(0.0, 2.0);
  Matrix x(6, 1), q(6, 8);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = g(rng);
  for (Eigen::Index i = 0; i < q.size(); ++i) q.data()[i] = g(rng);
  std::vector<double> t(6);
  std::vector<int> a(6);
  for (int i = 0; i < 6; ++i) {
    t[i] = g(rng);
    a[i] = i % 8;
  }
  {
    grad::Tape tape;
    auto in = tape.input(x);
    auto l = mse_loss(tape, in, t);
    double expect = 0.0;
    for (int i = 0; i < 6; ++i) expect += 0.5 * (x(i, 0) - t[i]) * (x(i, 0) - t[i]) / 6;
    CHECK(l.scalar() == Catch::Approx(expect).epsilon(1e-12));
    tape.backward(l);
    auto f = [&](const Matrix& m) {
      grad::Tape tt;
      return mse_loss(tt, tt.constant(m), t).scalar();
    };
    CHECK(fd_max_rel_error(f, x, in.grad()) < 1e-4);
  }
  {
    grad::Tape tape;
    auto in = tape.input(q);
    tape.backward(q_huber_loss(tape, in, a, t));
    auto f = [&](const Matrix& m) {
      grad::Tape tt;
      return q_huber_loss(tt, tt.constant(m), a, t).scalar();
    };
    CHECK(fd_max_rel_error(f, q, in.grad()) < 1e-4);
    grad::Tape t2;
    Matrix one = Matrix::Zero(1, 8);
    CHECK(q_huber_loss(t2, t2.constant(one), std::vector{0}, std::vector{3.0}).scalar() == 2.5);
  }
}

TEST_CASE("hwopt never returns an invalid configuration") {
  const int obs = observation_width(Setting::kComposite, kNnWidth);
  std::mt19937_64 rng(10);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  int fallbacks = 0;
  for (int agent_id = 0; agent_id < 20; ++agent_id) {
    const auto setting = agent_id % 2 == 0 ? Setting::kComposite : Setting::kSequential;
    int outs = 0;
    for (int h : action_heads(setting)) outs += h;
    EnvConfig cfg;
    cfg.t_max = 1 + agent_id % 3;
    HwOptAgent agent(setting, cfg, grad::Mlp({observation_width(setting, kNnWidth), 16, outs}, agent_id), kNnWidth);
    for (int k = 0; k < 500; ++k) {
      std::vector<double> v(kNnWidth);
      for (auto& x : v) x = u(rng);  // soft inputs are accepted
      const auto h0 = accel::valid_configs()[k % accel::valid_configs().size()];
      const auto raw = agent.rollout(v, h0);
      const auto h = agent.hwopt(v, h0);
      REQUIRE(accel::is_valid(h).valid);
      if (!accel::is_valid(raw).valid) {
        ++fallbacks;
        CHECK(h == h0);
      } else {
        CHECK(h == raw);
      }
      CHECK(agent.hwopt(v, h0) == h);
    }
  }
  CHECK(fallbacks > 0);
  (void)obs;

  const auto to_max = fixed_agent(accel::HwConfig::from_params(accel::kParamMax));
  CHECK(to_max.hwopt(kArch) == accel::kDefaultConfig);
  const auto h1 = accel::HwConfig::parse("[4,4,5,5,15,16,17]");
  CHECK(to_max.hwopt(kArch, h1) == h1);
}

TEST_CASE("agent checkpoint round trip") {
  HwOptAgent a(Setting::kSequential, EnvConfig{},
               grad::Mlp({observation_width(Setting::kSequential, kNnWidth), 8, 8}, 2), kNnWidth);
  const auto b = HwOptAgent::from_json(a.to_json());
  CHECK(b.setting() == Setting::kSequential);
  CHECK(b.rollout(kArch) == a.rollout(kArch));
  auto j = a.to_json();
  j["heads"] = std::vector<int>{4};
  CHECK_THROWS_AS(HwOptAgent::from_json(j), ValidationError);
  CHECK_THROWS_AS(HwOptAgent(Setting::kComposite, EnvConfig{}, grad::Mlp({10, 8}, 1), kNnWidth), ValidationError);
}

TEST_CASE("optimality") {
  const SimulatorEvaluator eval(table(), accel::Metric::kCycles);
  const auto archs = sample_architectures(12, 9, 21);

  const auto best = optimality([&](const nn::Architecture& a) { return table().grid_search(a, accel::Metric::kCycles).config; },
                               archs, eval);
  CHECK(best.percent == 100.0);
  CHECK(best.invalid == 0);

  const auto h0 = optimality(fixed_agent(accel::kDefaultConfig), archs, eval);
  double expect = 0.0;
  for (const auto& a : archs) {
    double opt = std::numeric_limits<double>::infinity();
    for (std::size_t s = 0; s < table().num_configs(); ++s) opt = std::min(opt, table().metric(a, s, accel::Metric::kCycles));
    expect += 100.0 * opt / accel::simulate(nn::workloads_of(a, table().spec()), accel::kDefaultConfig).total_cycles;
  }
  expect /= archs.size();
  CHECK(h0.percent == Catch::Approx(expect).epsilon(1e-12));
  CHECK(h0.percent < 100.0);

  // Multiplying every performance value by a constant leaves O unchanged.
  struct Scaled : Evaluator {
    const Evaluator& base;
    explicit Scaled(const Evaluator& b) : base(b) {}
    double perf(const nn::Architecture& a, const accel::HwConfig& h) const override { return 7.25 * base.perf(a, h); }
    double optimum(const nn::Architecture& a) const override { return 7.25 * base.optimum(a); }
  } scaled(eval);
  CHECK(optimality(fixed_agent(accel::kDefaultConfig), archs, scaled).percent == Catch::Approx(h0.percent).epsilon(1e-12));

  // Never above 100 in simulator mode; invalid outputs count as zero.
  std::mt19937_64 rng(5);
  const auto random_gen = [&](const nn::Architecture&) {
    return accel::HwConfig::from_index(std::uniform_int_distribution<int>(0, accel::kSpaceSize - 1)(rng));
  };
  const auto r = optimality(random_gen, archs, eval);
  CHECK(r.percent <= 100.0);
  CHECK(r.invalid > 0);
  for (double x : r.ratios) CHECK(x <= 1.0);
  CHECK_THROWS_AS(optimality(random_gen, std::span<const nn::Architecture>{}, eval), ValidationError);
}

TEST_CASE("dqn rejects the composite setting") {
  const auto p = constant_predictor(0.0);
  CHECK_THROWS_AS(dqn_train(Setting::kComposite, EnvConfig{}, DqnConfig{}, p), UnsupportedSetting);
}

TEST_CASE("training is deterministic") {
  const auto p = linear_predictor(0.0);
  PpoConfig pc;
  pc.total_steps = 2048;
  pc.steps_per_update = 512;
  pc.seed = 4;
  const auto a = ppo_train(Setting::kComposite, EnvConfig{}, pc, p);
  const auto b = ppo_train(Setting::kComposite, EnvConfig{}, pc, p);
  CHECK(a.agent.to_json().dump() == b.agent.to_json().dump());
  CHECK(a.log.size() == 4);

  DqnConfig dc;
  dc.total_steps = 3000;
  dc.learning_starts = 500;
  dc.seed = 4;
  const auto c = dqn_train(Setting::kSequential, EnvConfig{}, dc, p);
  const auto d = dqn_train(Setting::kSequential, EnvConfig{}, dc, p);
  CHECK(c.agent.to_json().dump() == d.agent.to_json().dump());
}

TEST_CASE("ppo learns to minimize a predictor") {
  // With the linear predictor the best valid configuration is the all-minimum one.
  const auto p = linear_predictor(0.0);
  PpoConfig pc;
  pc.total_steps = 20000;
  pc.steps_per_update = 512;
  pc.seed = 1;
  pc.lr = 3e-3;
  const auto untrained = [&] {
    auto z = pc;
    z.total_steps = 0;
    return ppo_train(Setting::kComposite, EnvConfig{}, z, p).agent;
  }();
  const auto trained = ppo_train(Setting::kComposite, EnvConfig{}, pc, p).agent;
  CHECK(trained.rollout(kArch) == accel::HwConfig::from_params(accel::kParamMin));
  const auto archs = sample_architectures(10, 9, 2);
  const PredictorEvaluator eval(p);
  CHECK(optimality(untrained, archs, eval).percent < optimality(trained, archs, eval).percent);
}

TEST_CASE("random search") {
  const auto t0 = draw_trial(3, 0, Algo::kPpo, accel::Metric::kCycles);
  CHECK(t0.env.c_inv == EnvConfig{}.c_inv);
  CHECK(t0.lr == PpoConfig{}.lr);
  CHECK(t0.steps_per_update == PpoConfig{}.steps_per_update);
  const auto d0 = draw_trial(3, 0, Algo::kDqn, accel::Metric::kEdp);
  CHECK(d0.lr == DqnConfig{}.lr);
  CHECK(d0.steps_per_update == DqnConfig{}.target_sync);
  CHECK(d0.env.metric == accel::Metric::kEdp);
  // Later trials do not depend on the algorithm.
  CHECK(draw_trial(3, 5, Algo::kPpo, accel::Metric::kCycles).to_json() ==
        draw_trial(3, 5, Algo::kDqn, accel::Metric::kCycles).to_json());
  for (int i = 1; i < 200; ++i) {
    const auto t = draw_trial(3, i, Algo::kPpo, accel::Metric::kCycles);
    CHECK(t.env.c_inv >= 0.5);
    CHECK(t.env.c_inv <= 8.0);
    CHECK(t.env.b >= 0.0);
    CHECK(t.env.b <= 1.0);
    CHECK(t.env.t_max >= 1);
    CHECK(t.env.t_max <= 8);
    CHECK(t.lr >= 1e-4);
    CHECK(t.lr <= 1e-2);
    CHECK(t.gamma >= 0.9);
    CHECK(t.gamma <= 0.999);
    CHECK(std::has_single_bit(static_cast<unsigned>(t.steps_per_update)));
    CHECK(t.steps_per_update >= 128);
    CHECK(t.steps_per_update <= 2048);
    CHECK(t.to_json() == draw_trial(3, i, Algo::kPpo, accel::Metric::kCycles).to_json());
  }
  CHECK(draw_trial(3, 1, Algo::kPpo, accel::Metric::kCycles).to_json() != draw_trial(4, 1, Algo::kPpo, accel::Metric::kCycles).to_json());

  const auto p = linear_predictor(0.0);
  const PredictorEvaluator eval(p);
  const Validation val{&eval, sample_architectures(3, 9, 1), 0};
  HpoConfig cfg;
  cfg.budget = 1;
  cfg.steps_per_trial = 512;
  std::vector<HpoTrial> seen;
  const auto one = hpo_random_search(cfg, p, val, [&](const HpoTrial& t) { seen.push_back(t); });
  REQUIRE(one.trials.size() == 1);
  CHECK(seen.size() == 1);
  CHECK(one.best.to_json() == one.trials[0].to_json());

  cfg.budget = 3;
  const auto three = hpo_random_search(cfg, p, val);
  const auto again = hpo_random_search(cfg, p, val);
  double best = -1.0;
  for (std::size_t i = 0; i < three.trials.size(); ++i) {
    best = std::max(best, three.trials[i].objective);
    CHECK(three.trials[i].to_json() == again.trials[i].to_json());
  }
  CHECK(three.best.objective == best);
  CHECK(three.best.objective >= three.trials[0].objective);
  cfg.budget = 0;
  CHECK_THROWS_AS(hpo_random_search(cfg, p, val), RangeError);
}
