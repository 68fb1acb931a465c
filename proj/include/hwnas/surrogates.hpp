#pragma once

// Simulator-labelled datasets, the performance predictor, ValidNet, and the
// interpolation studies built on them.

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "hwnas/accel.hpp"
#include "hwnas/cost_table.hpp"
#include "hwnas/grad.hpp"
#include "hwnas/nnspace.hpp"

namespace hwnas::sur {

struct SampleRecord {
  nn::Architecture arch;
  accel::HwConfig hw;
  accel::PerfReport perf;
  std::int64_t macs = 0;
};

struct PerfDataset {
  nn::Dataset supernet = nn::Dataset::kCifar10;
  std::vector<SampleRecord> records;

  [[nodiscard]] std::size_t size() const { return records.size(); }
  [[nodiscard]] std::size_t nn_width() const;
  void write_csv(std::ostream& os) const;
  /// Inverse of write_csv; the supernet is inferred from the nn_ column count.
  static PerfDataset read_csv(std::istream& is);
};

/// n uniform random architectures paired with uniform random valid configs,
/// labelled by the simulator. A cost table, when given, must be built for the
/// same supernet and is used instead of re-simulating.
[[nodiscard]] PerfDataset gen_dataset(std::size_t n, std::uint64_t seed, const nn::SupernetSpec& spec,
                                      const CostTable* table = nullptr, int jobs = 1);

struct ValidityRecord {
  accel::HwConfig hw;
  bool valid = false;
};

/// Configs drawn uniformly from the whole space, labelled by is_valid.
[[nodiscard]] std::vector<ValidityRecord> gen_validity_dataset(std::size_t n, std::uint64_t seed);
void write_validity_csv(std::ostream& os, std::span<const ValidityRecord> records);
[[nodiscard]] std::vector<ValidityRecord> read_validity_csv(std::istream& is);

/// tau-a: (concordant - discordant) / (n(n-1)/2), ties count as neither.
[[nodiscard]] double kendall_tau(std::span<const double> a, std::span<const double> b);

enum class TargetTransform { kIdentity, kLog };

struct PredictorTrainConfig {
  accel::Metric metric = accel::Metric::kCycles;
  int epochs = 80;
  double lr = 1e-3;
  std::vector<int> decay_epochs{40, 60};
  double decay_factor = 0.1;
  int batch_size = 128;
  double test_fraction = 0.2;
  std::vector<int> hidden{512, 512};
  TargetTransform transform = TargetTransform::kIdentity;
  bool scale_targets = true;
  std::uint64_t seed = 0;
};

struct EpochLog {
  int epoch = 0;
  double train_loss = 0.0;
  double test_loss = 0.0;
};

/// MLP over (nn vector ++ hw one-hot) predicting a robust-scaled metric.
class PerfPredictor {
 public:
  PerfPredictor() = default;
  PerfPredictor(grad::Mlp mlp, grad::RobustScaler scaler, accel::Metric metric, TargetTransform transform,
                int nn_width);

  [[nodiscard]] int nn_width() const { return nn_width_; }
  [[nodiscard]] int input_width() const { return nn_width_ + accel::kOneHotSize; }
  [[nodiscard]] accel::Metric metric() const { return metric_; }
  [[nodiscard]] TargetTransform transform() const { return transform_; }
  [[nodiscard]] const grad::RobustScaler& scaler() const { return scaler_; }
  [[nodiscard]] grad::Mlp& mlp() { return mlp_; }

  /// Scaled output for each row of [nn | hw].
  [[nodiscard]] grad::Matrix predict_scaled(const grad::Matrix& inputs) const;
  [[nodiscard]] double predict_scaled(std::span<const double> nn_vec, std::span<const double> hw_vec) const;
  /// Back in metric units (cycles or J*s).
  [[nodiscard]] double predict(std::span<const double> nn_vec, std::span<const double> hw_vec) const;
  [[nodiscard]] double to_metric(double scaled) const;
  [[nodiscard]] double to_scaled(double metric_value) const;

  /// Differentiable scaled prediction; x holds [nn | hw] rows.
  [[nodiscard]] grad::Var forward(grad::Tape& tape, grad::Var x);

  [[nodiscard]] nlohmann::json to_json() const;
  static PerfPredictor from_json(const nlohmann::json& j);

 private:
  grad::Mlp mlp_;
  grad::RobustScaler scaler_;
  accel::Metric metric_ = accel::Metric::kCycles;
  TargetTransform transform_ = TargetTransform::kIdentity;
  int nn_width_ = 0;
};

struct PredictorResult {
  PerfPredictor predictor;
  double test_tau = 0.0;
  std::vector<EpochLog> log;
};

[[nodiscard]] grad::Matrix feature_matrix(const PerfDataset& data);
[[nodiscard]] double metric_of(const SampleRecord& r, accel::Metric m);

/// Seeded 80/20 split, L1 loss on scaled targets, Adam with step decay.
[[nodiscard]] PredictorResult train_predictor(const PerfDataset& data, const PredictorTrainConfig& cfg);

/// Seeded permutation split; returns (train indices, test indices).
[[nodiscard]] std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_indices(std::size_t n,
                                                                                          double test_fraction,
                                                                                          std::uint64_t seed);

struct ValidNetTrainConfig {
  int epochs = 150;
  double lr = 1e-3;
  int batch_size = 128;
  double test_fraction = 0.2;
  std::vector<int> hidden{128, 128};
  /// Weights of the (valid, invalid) classes.
  std::array<double, 2> class_weights{0.05, 0.95};
  std::uint64_t seed = 0;
};

/// Two-way classifier over the 36-wide hw encoding. Class 0 is "valid".
class ValidNet {
 public:
  ValidNet() = default;
  explicit ValidNet(grad::Mlp mlp);

  [[nodiscard]] double valid_probability(std::span<const double> hw_vec) const;
  [[nodiscard]] grad::Matrix valid_probability(const grad::Matrix& hw_rows) const;
  /// Differentiable valid-probability column (n x 1).
  [[nodiscard]] grad::Var forward(grad::Tape& tape, grad::Var hw);
  [[nodiscard]] grad::Mlp& mlp() { return mlp_; }

  [[nodiscard]] nlohmann::json to_json() const;
  static ValidNet from_json(const nlohmann::json& j);

 private:
  grad::Mlp mlp_;
};

struct ValidNetResult {
  ValidNet net;
  double test_accuracy = 0.0;
  std::vector<EpochLog> log;
};

[[nodiscard]] ValidNetResult train_validnet(std::span<const ValidityRecord> data, const ValidNetTrainConfig& cfg);

struct InterpolationRatio {
  double ratio = 0.0;
  double continuous = 0.0;  // predictor on the probability vector
  double expected = 0.0;    // Monte-Carlo mean over sampled one-hot architectures
};

/// probs is the L x 4 row-major sigma(alpha).
[[nodiscard]] InterpolationRatio predictor_interpolation_ratio(const PerfPredictor& p, std::span<const double> probs,
                                                               const accel::HwConfig& h0, int samples,
                                                               std::uint64_t seed);

struct InterpolationSummary {
  double mean = 0.0;
  double variance = 0.0;
  std::vector<double> ratios;
};

/// Ratios over `distributions` random logit matrices with N(0, 1) entries.
[[nodiscard]] InterpolationSummary interpolation_study(const PerfPredictor& p, std::size_t layers,
                                                       int distributions, int samples, std::uint64_t seed);

/// Gradient magnitudes |d L1(p_valid(g), 1) / d g_j| along the path v -> r -> i.
/// Row k corresponds to phi = 2k / steps.
[[nodiscard]] grad::Matrix gradient_interpolation(ValidNet& net, std::span<const double> v, std::span<const double> r,
                                                  std::span<const double> i, int steps);

[[nodiscard]] std::vector<double> interpolation_path_point(std::span<const double> v, std::span<const double> r,
                                                           std::span<const double> i, double phi);

struct GradientStudy {
  grad::Matrix mean_heatmap;  // steps x 36, averaged over triples
  double near_valid = 0.0;    // mean magnitude over phi in [0, 0.25]
  double near_invalid = 0.0;  // mean magnitude over phi in [1.5, 2)
  [[nodiscard]] double contrast() const { return near_valid / near_invalid; }
};

/// Random (v valid, r uniform in [0,1]^36, i invalid) triples.
[[nodiscard]] GradientStudy gradient_interpolation_study(ValidNet& net, int triples, int steps, std::uint64_t seed);

void write_matrix_csv(std::ostream& os, const grad::Matrix& m, std::string_view column_prefix);

}  // namespace hwnas::sur
