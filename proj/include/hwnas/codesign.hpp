#pragma once

// Joint architecture/hardware search: the synthetic task oracle, the
// RL-guided co-design loop, and the baselines it is compared against.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "hwnas/accel.hpp"
#include "hwnas/cost_table.hpp"
#include "hwnas/grad.hpp"
#include "hwnas/nnspace.hpp"
#include "hwnas/rlopt.hpp"
#include "hwnas/surrogates.hpp"

namespace hwnas::cd {

/// Stand-in for supernet training loss. Per block and choice a seeded base
/// score s in [0, 1], minus kappa times a kernel-quality bonus
/// q(C3) < q(CX) < q(C5) < q(C7). Linear in the choice probabilities.
class TaskOracle {
 public:
  static constexpr double kDefaultKappa = 0.5;
  static constexpr std::array<double, nn::kNumChoices> kQuality{0.0, 2.0 / 3.0, 1.0, 1.0 / 3.0};  // C3 C5 C7 CX

  TaskOracle(std::size_t layers, std::uint64_t seed, double kappa = kDefaultKappa);
  /// Explicit base scores (L x 4, row-major).
  TaskOracle(std::vector<double> base, double kappa);

  [[nodiscard]] std::size_t layers() const { return base_.size() / nn::kNumChoices; }
  [[nodiscard]] double kappa() const { return kappa_; }
  [[nodiscard]] double base(std::size_t layer, nn::ChoiceId c) const;
  /// Per-entry coefficient s - kappa * q.
  [[nodiscard]] double coefficient(std::size_t layer, nn::ChoiceId c) const;

  [[nodiscard]] double loss(const nn::Architecture& a) const;
  /// Expected loss under a (L x 4 row-major) probability matrix.
  [[nodiscard]] double loss(std::span<const double> probs) const;
  /// Differentiable form; probs is 1 x 4L.
  [[nodiscard]] grad::Var loss(grad::Tape& tape, grad::Var probs) const;
  /// Per-block argmin of the coefficients.
  [[nodiscard]] nn::Architecture best() const;

 private:
  std::vector<double> base_;
  double kappa_;
};

struct CodesignConfig {
  nn::Dataset dataset = nn::Dataset::kCifar10;
  double lambda = 1.0;
  int iterations = 300;
  double lr = 0.05;  // Adam on the architecture logits
  std::uint64_t seed = 0;
  accel::HwConfig h0 = accel::kDefaultConfig;

  void validate() const;
  [[nodiscard]] nlohmann::json to_json() const;
};

struct CodesignResult {
  std::string method;
  std::uint64_t seed = 0;
  double lambda = 0.0;
  std::optional<double> beta;
  nn::Architecture arch;
  accel::HwConfig hw;
  bool valid = true;
  accel::PerfReport perf;  // simulator; zero when hw is invalid
  double task_loss = 0.0;
  std::vector<double> alpha;         // final logits
  std::vector<double> loss_history;  // total loss per iteration
};

[[nodiscard]] std::string results_csv_header();
[[nodiscard]] std::string to_csv_row(const CodesignResult& r);
void write_results_csv(std::ostream& os, std::span<const CodesignResult> rows);

/// Simulator evaluation of a final design (never the predictor).
[[nodiscard]] CodesignResult evaluate_design(std::string method, const CodesignConfig& cfg,
                                             const nn::Architecture& arch, const accel::HwConfig& hw,
                                             const TaskOracle& oracle);

/// Co-design loop: task(sigma(a)) + lambda * P(sigma(a), HWOpt(sigma(a), H0)),
/// Adam on the logits only, then argmax and a final HWOpt on the one-hot.
[[nodiscard]] CodesignResult rl_codesign_run(const CodesignConfig& cfg, const rl::HwOptAgent& agent,
                                             const sur::PerfPredictor& predictor, const TaskOracle& oracle);

/// Same objective with the hardware pinned to H0.
[[nodiscard]] CodesignResult hwaware_nas_run(const CodesignConfig& cfg, const sur::PerfPredictor& predictor,
                                             const TaskOracle& oracle);

/// Task-only search (lambda = 0), then HWOpt on the resulting architecture.
[[nodiscard]] CodesignResult sequential_opt_run(const CodesignConfig& cfg, const rl::HwOptAgent& agent,
                                                const sur::PerfPredictor& predictor, const TaskOracle& oracle);

/// Joint relaxation of architecture and hardware:
/// task + lambda * P(sigma(a), sigma(g)) + beta * |ValidNet(sigma(g)) - 1|.
/// The hardware is the row-wise argmax of g and may be invalid.
[[nodiscard]] CodesignResult dshwnas_run(const CodesignConfig& cfg, double beta, const sur::PerfPredictor& predictor,
                                         const sur::ValidNet& validnet, const TaskOracle& oracle);

/// 10^x for x = -7..7.
[[nodiscard]] std::vector<double> beta_sweep();

// ---------------------------------------------------------------------------
// MLP hardware generators: architecture one-hot -> seven categorical heads.

struct HwGenConfig {
  int train_archs = 1000;
  int epochs = 20;
  int batch_size = 64;
  double lr = 1e-3;
  std::vector<int> hidden{512, 512};
  accel::Metric metric = accel::Metric::kCycles;
  std::uint64_t seed = 0;

  [[nodiscard]] nlohmann::json to_json() const;
};

class HwGenNet {
 public:
  HwGenNet() = default;
  explicit HwGenNet(grad::Mlp mlp);

  [[nodiscard]] accel::HwConfig generate(std::span<const double> nn_vec) const;
  [[nodiscard]] grad::Mlp& mlp() { return mlp_; }
  [[nodiscard]] nlohmann::json to_json() const;
  static HwGenNet from_json(const nlohmann::json& j);

 private:
  grad::Mlp mlp_;
};

/// Grid-search argmin labels (first slot on ties).
[[nodiscard]] std::vector<accel::HwConfig> exhaustive_labels(const CostTable& table,
                                                             std::span<const nn::Architecture> archs,
                                                             accel::Metric metric);

/// Cross-entropy of every head against the grid-search optimum.
[[nodiscard]] HwGenNet exhaustive_hwgen_train(const HwGenConfig& cfg, const CostTable& table);

/// Softmax-relaxed heads fed to the predictor and ValidNet:
/// P(nn, sigma(h)) + lambda * |ValidNet(sigma(h)) - 1|.
[[nodiscard]] HwGenNet perf_hwgen_train(const HwGenConfig& cfg, double lambda,
                                           const sur::PerfPredictor& predictor, const sur::ValidNet& validnet);

/// 10^x for x = -4..2.
[[nodiscard]] std::vector<double> perf_hwgen_lambdas();

struct HwGenEval {
  double optimality = 0.0;  // invalid outputs count as 0
  double invalid_fraction = 0.0;
};
[[nodiscard]] HwGenEval evaluate_hwgen(const HwGenNet& gen, std::span<const nn::Architecture> archs,
                                       const rl::Evaluator& eval);

}  // namespace hwnas::cd
