#pragma once

// Hardware-optimization environments (composite and sequential), PPO and DQN
// agents, the greedy HWOpt rollout, optimality scoring and a random-search
// tuner for the environment and agent hyperparameters.

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "hwnas/accel.hpp"
#include "hwnas/cost_table.hpp"
#include "hwnas/grad.hpp"
#include "hwnas/surrogates.hpp"

namespace hwnas::rl {

/// Composite: every step emits a whole configuration through seven factored
/// heads. Sequential: every step sets one parameter (8-way, wrapped modulo).
enum class Setting { kComposite, kSequential };
[[nodiscard]] Setting parse_setting(std::string_view text);
[[nodiscard]] std::string_view to_string(Setting s);

struct EnvConfig {
  double c_inv = 2.0;  // invalidity penalty
  double b = 0.1;      // penalty for an intermediate step that got worse
  int t_max = 1;       // steps (composite) or passes (sequential)
  accel::Metric metric = accel::Metric::kCycles;

  void validate() const;
  [[nodiscard]] nlohmann::json to_json() const;
  static EnvConfig from_json(const nlohmann::json& j);
};

inline constexpr int kStepIndicator = accel::kNumParams;
inline constexpr int kSequentialActions = 8;

/// Sizes of the categorical heads: (4,4,2,2,8,8,8) or (8).
[[nodiscard]] std::vector<int> action_heads(Setting s);
[[nodiscard]] int observation_width(Setting s, int nn_width);
[[nodiscard]] int episode_length(Setting s, const EnvConfig& cfg);

/// Single environment instance. The predictor supplies P(N, H) in scaled
/// units; it may be null when only transitions are needed (greedy rollout).
class Env {
 public:
  Env(Setting setting, EnvConfig cfg, const sur::PerfPredictor* predictor, int nn_width);

  /// Starts an episode for the (one-hot or soft) architecture vector.
  void reset(std::span<const double> nn_vec, const accel::HwConfig& h0 = accel::kDefaultConfig);

  struct Step {
    double reward = 0.0;
    bool done = false;
  };
  /// One action index per head. Throws RangeError for out-of-range actions.
  Step step(std::span<const int> action);

  [[nodiscard]] std::vector<double> observation() const;
  [[nodiscard]] const accel::HwConfig& config() const { return hw_; }
  [[nodiscard]] int t() const { return t_; }
  [[nodiscard]] bool done() const { return t_ >= episode_length(setting_, cfg_); }
  [[nodiscard]] Setting setting() const { return setting_; }
  [[nodiscard]] const EnvConfig& env_config() const { return cfg_; }

 private:
  [[nodiscard]] double predicted(const accel::HwConfig& h) const;
  [[nodiscard]] double terminal_reward() const;

  Setting setting_;
  EnvConfig cfg_;
  const sur::PerfPredictor* predictor_;
  int nn_width_;
  std::vector<double> nn_;
  accel::HwConfig hw_;
  int t_ = 0;
  double last_p_ = 0.0;
};

/// Running count/mean/variance (Welford). Rewards are divided by the running
/// standard deviation, which preserves their order at a fixed state.
class RewardNormalizer {
 public:
  void update(double x);
  [[nodiscard]] double normalize(double x) const;
  [[nodiscard]] std::int64_t count() const { return n_; }
  [[nodiscard]] double mean() const { return mean_; }
  [[nodiscard]] double variance() const { return n_ > 1 ? m2_ / static_cast<double>(n_ - 1) : 1.0; }

 private:
  std::int64_t n_ = 0;
  double mean_ = 0.0;
  double m2_ = 0.0;
};

/// Frozen decision network plus decoding spec. Greedy actions are per-head
/// argmaxes of the network output (policy logits or Q-values).
class HwOptAgent {
 public:
  HwOptAgent() = default;
  HwOptAgent(Setting setting, EnvConfig cfg, grad::Mlp net, int nn_width);

  /// Greedy rollout; may return an invalid configuration.
  [[nodiscard]] accel::HwConfig rollout(std::span<const double> nn_vec,
                                        const accel::HwConfig& h0 = accel::kDefaultConfig) const;
  /// Greedy rollout with fallback to h0 when the result is invalid.
  [[nodiscard]] accel::HwConfig hwopt(std::span<const double> nn_vec,
                                      const accel::HwConfig& h0 = accel::kDefaultConfig) const;

  [[nodiscard]] Setting setting() const { return setting_; }
  [[nodiscard]] const EnvConfig& env_config() const { return cfg_; }
  [[nodiscard]] int nn_width() const { return nn_width_; }
  [[nodiscard]] const grad::Mlp& net() const { return net_; }

  [[nodiscard]] nlohmann::json to_json() const;
  static HwOptAgent from_json(const nlohmann::json& j);

 private:
  Setting setting_ = Setting::kComposite;
  EnvConfig cfg_;
  grad::Mlp net_;
  int nn_width_ = 0;
};

/// Performance of an architecture on a configuration plus the grid-search
/// optimum under the same evaluator.
class Evaluator {
 public:
  virtual ~Evaluator() = default;
  [[nodiscard]] virtual double perf(const nn::Architecture& a, const accel::HwConfig& h) const = 0;
  [[nodiscard]] virtual double optimum(const nn::Architecture& a) const = 0;
};

/// Analytical simulator through a cost table (exact).
class SimulatorEvaluator : public Evaluator {
 public:
  SimulatorEvaluator(const CostTable& table, accel::Metric metric) : table_(table), metric_(metric) {}
  [[nodiscard]] double perf(const nn::Architecture& a, const accel::HwConfig& h) const override;
  [[nodiscard]] double optimum(const nn::Architecture& a) const override;

 private:
  const CostTable& table_;
  accel::Metric metric_;
};

/// Predictor in metric units; the optimum is a grid search over its outputs.
class PredictorEvaluator : public Evaluator {
 public:
  explicit PredictorEvaluator(const sur::PerfPredictor& p) : p_(p) {}
  [[nodiscard]] double perf(const nn::Architecture& a, const accel::HwConfig& h) const override;
  [[nodiscard]] double optimum(const nn::Architecture& a) const override;

 private:
  const sur::PerfPredictor& p_;
};

using HwGenerator = std::function<accel::HwConfig(const nn::Architecture&)>;

struct OptimalityResult {
  double percent = 0.0;
  int invalid = 0;             // generator outputs that failed is_valid
  std::vector<double> ratios;  // optimum / achieved, 0 for invalid outputs
};

/// O = 100 / |T| * sum(optimum(Z) / perf(Z, gen(Z))). Invalid outputs score 0.
[[nodiscard]] OptimalityResult optimality(const HwGenerator& gen, std::span<const nn::Architecture> archs,
                                          const Evaluator& eval);
/// Agent variant: the raw greedy rollout is scored (fallback disabled), so
/// invalid counts what hwopt would have had to replace.
[[nodiscard]] OptimalityResult optimality(const HwOptAgent& agent, std::span<const nn::Architecture> archs,
                                          const Evaluator& eval);

/// Seeded uniform architectures.
[[nodiscard]] std::vector<nn::Architecture> sample_architectures(std::size_t count, std::size_t layers,
                                                                 std::uint64_t seed);

struct TrainLogRow {
  std::int64_t step = 0;
  double mean_return = 0.0;   // raw (unnormalized) episode return
  double optimality = -1.0;   // on the validation set; -1 when not evaluated
};
void write_train_log(std::ostream& os, std::span<const TrainLogRow> rows);

/// Optional progress evaluation during training.
struct Validation {
  const Evaluator* evaluator = nullptr;
  std::vector<nn::Architecture> archs;
  int every_updates = 10;
};

struct PpoConfig {
  std::int64_t total_steps = 300000;
  int steps_per_update = 1024;
  int epochs = 4;
  int minibatch = 64;
  double lr = 3e-4;
  double gamma = 0.99;
  double gae_lambda = 0.95;
  double clip = 0.2;
  double ent_coef = 0.01;
  double vf_coef = 0.5;
  double max_grad_norm = 0.5;
  std::vector<int> hidden{64, 64};
  bool normalize_rewards = true;
  std::uint64_t seed = 0;

  [[nodiscard]] nlohmann::json to_json() const;
};

struct TrainResult {
  HwOptAgent agent;
  std::vector<TrainLogRow> log;
};

[[nodiscard]] TrainResult ppo_train(Setting setting, const EnvConfig& env, const PpoConfig& cfg,
                                    const sur::PerfPredictor& predictor, const Validation& val = {});

struct DqnConfig {
  std::int64_t total_steps = 300000;
  int buffer_size = 50000;
  int batch_size = 64;
  double lr = 5e-4;
  double gamma = 0.99;
  double eps_start = 1.0;
  double eps_end = 0.05;
  double eps_fraction = 0.3;  // share of training over which epsilon decays
  int target_sync = 1000;
  int learning_starts = 1000;
  int train_every = 1;
  std::vector<int> hidden{64, 64};
  std::uint64_t seed = 0;

  [[nodiscard]] nlohmann::json to_json() const;
};

/// Sequential setting only; the composite setting throws UnsupportedSetting.
[[nodiscard]] TrainResult dqn_train(Setting setting, const EnvConfig& env, const DqnConfig& cfg,
                                    const sur::PerfPredictor& predictor, const Validation& val = {});

/// Clipped-surrogate policy loss plus entropy bonus over factored heads,
/// as one differentiable node on the logits.
[[nodiscard]] grad::Var ppo_policy_loss(grad::Tape& tape, grad::Var logits, std::span<const int> heads,
                                        const std::vector<std::vector<int>>& actions,
                                        std::span<const double> old_logp, std::span<const double> advantages,
                                        double clip, double ent_coef);
/// 0.5 * mean((pred - target)^2).
[[nodiscard]] grad::Var mse_loss(grad::Tape& tape, grad::Var pred, std::span<const double> target);
/// Huber loss on Q(s, a) against targets, one selected column per row.
[[nodiscard]] grad::Var q_huber_loss(grad::Tape& tape, grad::Var q, std::span<const int> actions,
                                     std::span<const double> targets);

enum class Algo { kPpo, kDqn };
[[nodiscard]] Algo parse_algo(std::string_view text);
[[nodiscard]] std::string_view to_string(Algo a);

struct HpoTrial {
  int index = 0;
  EnvConfig env;
  double lr = 0.0;
  double gamma = 0.0;
  int steps_per_update = 0;  // PPO rollout length, or DQN target-sync interval
  double objective = 0.0;    // validation optimality (%)

  [[nodiscard]] nlohmann::json to_json() const;
};

struct HpoConfig {
  Setting setting = Setting::kComposite;
  Algo algo = Algo::kPpo;
  int budget = 40;
  std::int64_t steps_per_trial = 60000;
  std::uint64_t seed = 0;
  accel::Metric metric = accel::Metric::kCycles;
};

struct HpoResult {
  HpoTrial best;
  std::vector<HpoTrial> trials;
};

/// Draws trial `index` of the search (independent of training outcomes).
[[nodiscard]] HpoTrial draw_trial(std::uint64_t seed, int index, Algo algo, accel::Metric metric);

/// Seeded random search. Objective: optimality on `val.archs` under
/// `val.evaluator` (both required). Each finished trial is passed to on_trial.
[[nodiscard]] HpoResult hpo_random_search(const HpoConfig& cfg, const sur::PerfPredictor& predictor,
                                          const Validation& val,
                                          const std::function<void(const HpoTrial&)>& on_trial = {});

/// Tuned constants shipped with the library.
[[nodiscard]] EnvConfig tuned_env(Setting s, accel::Metric metric = accel::Metric::kCycles);
[[nodiscard]] PpoConfig tuned_ppo();
[[nodiscard]] DqnConfig tuned_dqn();

}  // namespace hwnas::rl
