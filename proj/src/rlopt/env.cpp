#include <algorithm>
#include <cmath>
#include <iomanip>
#include <ostream>

#include "hwnas/rlopt.hpp"

namespace hwnas::rl {

Setting parse_setting(std::string_view text) {
  if (text == "composite") {
    return Setting::kComposite;
  }
  if (text == "sequential") {
    return Setting::kSequential;
  }
  throw ValidationError("unknown RL setting '" + std::string(text) + "' (composite|sequential)");
}

std::string_view to_string(Setting s) { return s == Setting::kComposite ? "composite" : "sequential"; }

Algo parse_algo(std::string_view text) {
  if (text == "ppo") {
    return Algo::kPpo;
  }
  if (text == "dqn") {
    return Algo::kDqn;
  }
  throw ValidationError("unknown RL algorithm '" + std::string(text) + "' (ppo|dqn)");
}

std::string_view to_string(Algo a) { return a == Algo::kPpo ? "ppo" : "dqn"; }

void EnvConfig::validate() const {
  if (!(c_inv >= 0.0) || !std::isfinite(c_inv)) {
    throw RangeError("c_inv must be >= 0");
  }
  if (!(b >= 0.0) || !std::isfinite(b)) {
    throw RangeError("b must be >= 0");
  }
  if (t_max < 1) {
    throw RangeError("t_max must be >= 1");
  }
}

nlohmann::json EnvConfig::to_json() const {
  return {{"c_inv", c_inv}, {"b", b}, {"t_max", t_max}, {"metric", std::string(accel::to_string(metric))}};
}

EnvConfig EnvConfig::from_json(const nlohmann::json& j) {
  EnvConfig c;
  try {
    c.c_inv = j.at("c_inv").get<double>();
    c.b = j.at("b").get<double>();
    c.t_max = j.at("t_max").get<int>();
    c.metric = accel::parse_metric(j.at("metric").get<std::string>());
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("bad env config: ") + e.what());
  }
  c.validate();
  return c;
}

std::vector<int> action_heads(Setting s) {
  if (s == Setting::kSequential) {
    return {kSequentialActions};
  }
  return {accel::kParamWidth.begin(), accel::kParamWidth.end()};
}

int observation_width(Setting s, int nn_width) {
  return nn_width + accel::kOneHotSize + (s == Setting::kSequential ? kStepIndicator : 0);
}

int episode_length(Setting s, const EnvConfig& cfg) {
  return s == Setting::kComposite ? cfg.t_max : accel::kNumParams * cfg.t_max;
}

Env::Env(Setting setting, EnvConfig cfg, const sur::PerfPredictor* predictor, int nn_width)
    : setting_(setting), cfg_(cfg), predictor_(predictor), nn_width_(nn_width) {
  cfg_.validate();
  if (predictor_ != nullptr && predictor_->nn_width() != nn_width_) {
    throw ValidationError("predictor and environment disagree on the architecture width");
  }
}

void Env::reset(std::span<const double> nn_vec, const accel::HwConfig& h0) {
  if (static_cast<int>(nn_vec.size()) != nn_width_) {
    throw ValidationError("architecture vector has " + std::to_string(nn_vec.size()) + " entries, expected " +
                          std::to_string(nn_width_));
  }
  h0.check_range();
  nn_.assign(nn_vec.begin(), nn_vec.end());
  hw_ = h0;
  t_ = 0;
  last_p_ = setting_ == Setting::kComposite && cfg_.t_max > 1 ? predicted(hw_) : 0.0;
}

double Env::predicted(const accel::HwConfig& h) const {
  if (predictor_ == nullptr) {
    return 0.0;
  }
  return predictor_->predict_scaled(nn_, h.one_hot());
}

double Env::terminal_reward() const {
  return -predicted(hw_) - (accel::is_valid(hw_).valid ? 0.0 : cfg_.c_inv);
}

Env::Step Env::step(std::span<const int> action) {
  if (done()) {
    throw ValidationError("episode already finished; call reset()");
  }
  const auto heads = action_heads(setting_);
  if (action.size() != heads.size()) {
    throw RangeError("expected " + std::to_string(heads.size()) + " action components");
  }
  for (std::size_t k = 0; k < heads.size(); ++k) {
    if (action[k] < 0 || action[k] >= heads[k]) {
      throw RangeError("action " + std::to_string(action[k]) + " outside [0, " + std::to_string(heads[k]) + ")");
    }
  }
  auto p = hw_.params();
  if (setting_ == Setting::kComposite) {
    for (int i = 0; i < accel::kNumParams; ++i) {
      p[i] = accel::kParamMin[i] + action[i];
    }
  } else {
    const int i = t_ % accel::kNumParams;
    p[i] = accel::kParamMin[i] + action[0] % accel::kParamWidth[i];
  }
  hw_ = accel::HwConfig::from_params(p);
  ++t_;

  Step s;
  s.done = done();
  if (s.done) {
    s.reward = terminal_reward();
  } else if (setting_ == Setting::kComposite) {
    const double now = predicted(hw_);
    s.reward = now > last_p_ ? -cfg_.b : 0.0;
    last_p_ = now;
  }
  return s;
}

std::vector<double> Env::observation() const {
  std::vector<double> o(nn_);
  const auto hw = hw_.one_hot();
  o.insert(o.end(), hw.begin(), hw.end());
  if (setting_ == Setting::kSequential) {
    std::vector<double> ind(kStepIndicator, 0.0);
    ind[static_cast<std::size_t>(t_ % accel::kNumParams)] = 1.0;
    o.insert(o.end(), ind.begin(), ind.end());
  }
  return o;
}

void RewardNormalizer::update(double x) {
  ++n_;
  const double d = x - mean_;
  mean_ += d / static_cast<double>(n_);
  m2_ += d * (x - mean_);
}

double RewardNormalizer::normalize(double x) const { return x / std::sqrt(variance() + 1e-8); }

HwOptAgent::HwOptAgent(Setting setting, EnvConfig cfg, grad::Mlp net, int nn_width)
    : setting_(setting), cfg_(cfg), net_(std::move(net)), nn_width_(nn_width) {
  cfg_.validate();
  const auto heads = action_heads(setting_);
  int outs = 0;
  for (int h : heads) {
    outs += h;
  }
  if (net_.input_width() != observation_width(setting_, nn_width_) || net_.output_width() != outs) {
    throw ValidationError("agent network shape does not match the " + std::string(to_string(setting_)) +
                          " setting");
  }
}

accel::HwConfig HwOptAgent::rollout(std::span<const double> nn_vec, const accel::HwConfig& h0) const {
  Env env(setting_, cfg_, nullptr, nn_width_);
  env.reset(nn_vec, h0);
  const auto heads = action_heads(setting_);
  std::vector<int> action(heads.size());
  while (!env.done()) {
    const auto out = net_.predict(grad::row(env.observation()));
    int off = 0;
    for (std::size_t k = 0; k < heads.size(); ++k) {
      Eigen::Index best = 0;
      out.row(0).segment(off, heads[k]).maxCoeff(&best);
      action[k] = static_cast<int>(best);
      off += heads[k];
    }
    (void)env.step(action);
  }
  return env.config();
}

accel::HwConfig HwOptAgent::hwopt(std::span<const double> nn_vec, const accel::HwConfig& h0) const {
  const auto h = rollout(nn_vec, h0);
  return accel::is_valid(h).valid ? h : h0;
}

nlohmann::json HwOptAgent::to_json() const {
  return {{"version", grad::kCheckpointVersion},
          {"kind", "hwopt_agent"},
          {"setting", std::string(to_string(setting_))},
          {"heads", action_heads(setting_)},
          {"env", cfg_.to_json()},
          {"nn_width", nn_width_},
          {"net", net_.to_json()}};
}

HwOptAgent HwOptAgent::from_json(const nlohmann::json& j) {
  if (j.value("version", -1) != grad::kCheckpointVersion || j.value("kind", "") != "hwopt_agent") {
    throw ValidationError("not an agent checkpoint");
  }
  try {
    const auto setting = parse_setting(j.at("setting").get<std::string>());
    if (j.at("heads").get<std::vector<int>>() != action_heads(setting)) {
      throw ValidationError("agent checkpoint has an unexpected action decoding");
    }
    return {setting, EnvConfig::from_json(j.at("env")), grad::Mlp::from_json(j.at("net")),
            j.at("nn_width").get<int>()};
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("bad agent checkpoint: ") + e.what());
  }
}

double SimulatorEvaluator::perf(const nn::Architecture& a, const accel::HwConfig& h) const {
  return accel::metric_value(table_.report(a, h), metric_);
}

double SimulatorEvaluator::optimum(const nn::Architecture& a) const { return table_.grid_search(a, metric_).value; }

double PredictorEvaluator::perf(const nn::Architecture& a, const accel::HwConfig& h) const {
  return p_.predict(nn::encode_onehot(a), h.one_hot());
}

double PredictorEvaluator::optimum(const nn::Architecture& a) const {
  const auto& configs = accel::valid_configs();
  const auto nn_vec = nn::encode_onehot(a);
  grad::Matrix x = grad::Matrix::Zero(static_cast<Eigen::Index>(configs.size()), p_.input_width());
  for (std::size_t r = 0; r < configs.size(); ++r) {
    const auto row = static_cast<Eigen::Index>(r);
    for (std::size_t c = 0; c < nn_vec.size(); ++c) {
      x(row, static_cast<Eigen::Index>(c)) = nn_vec[c];
    }
    const auto hw = configs[r].one_hot();
    for (std::size_t c = 0; c < hw.size(); ++c) {
      x(row, static_cast<Eigen::Index>(nn_vec.size() + c)) = hw[c];
    }
  }
  return p_.to_metric(p_.predict_scaled(x).minCoeff());
}

OptimalityResult optimality(const HwGenerator& gen, std::span<const nn::Architecture> archs,
                            const Evaluator& eval) {
  if (archs.empty()) {
    throw ValidationError("optimality needs at least one architecture");
  }
  OptimalityResult r;
  for (const auto& a : archs) {
    const auto h = gen(a);
    if (!accel::is_valid(h).valid) {
      ++r.invalid;
      r.ratios.push_back(0.0);
      continue;
    }
    r.ratios.push_back(eval.optimum(a) / eval.perf(a, h));
  }
  double sum = 0.0;
  for (double x : r.ratios) {
    sum += x;
  }
  r.percent = 100.0 * sum / static_cast<double>(r.ratios.size());
  return r;
}

OptimalityResult optimality(const HwOptAgent& agent, std::span<const nn::Architecture> archs,
                            const Evaluator& eval) {
  return optimality([&](const nn::Architecture& a) { return agent.rollout(nn::encode_onehot(a)); }, archs, eval);
}

std::vector<nn::Architecture> sample_architectures(std::size_t count, std::size_t layers, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<nn::Architecture> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    out.push_back(nn::random_architecture(layers, rng));
  }
  return out;
}

void write_train_log(std::ostream& os, std::span<const TrainLogRow> rows) {
  os << "step,mean_return,optimality\n";
  os << std::setprecision(17);
  for (const auto& r : rows) {
    os << r.step << ',' << r.mean_return << ',';
    if (r.optimality >= 0.0) {
      os << r.optimality;
    }
    os << '\n';
  }
}

}  // namespace hwnas::rl
