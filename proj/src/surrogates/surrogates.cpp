#include "hwnas/surrogates.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <map>
#include <numeric>
#include <istream>
#include <ostream>
#include <random>
#include <sstream>
#include <thread>

namespace hwnas::sur {

using grad::Matrix;

namespace {

constexpr std::uint64_t kShuffleSalt = 0x5bd1e995ULL;

grad::Matrix gather_rows(const Matrix& m, std::span<const std::size_t> idx) {
  Matrix out(static_cast<Eigen::Index>(idx.size()), m.cols());
  for (std::size_t r = 0; r < idx.size(); ++r) {
    out.row(static_cast<Eigen::Index>(r)) = m.row(static_cast<Eigen::Index>(idx[r]));
  }
  return out;
}

double lr_at(const std::vector<int>& decay_epochs, double base, double factor, int epoch) {
  double lr = base;
  for (int e : decay_epochs) {
    if (epoch >= e) {
      lr *= factor;
    }
  }
  return lr;
}

void check_finite(double loss, std::span<grad::Tensor* const> params, const char* what, int epoch) {
  if (!std::isfinite(loss) || !grad::all_finite(params)) {
    throw TrainingFailure(std::string(what) + " diverged at epoch " + std::to_string(epoch) + " (loss " +
                          std::to_string(loss) + ")");
  }
}

Matrix softmax2(const Matrix& logits) {
  Matrix p(logits.rows(), logits.cols());
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    const double mx = logits.row(r).maxCoeff();
    p.row(r) = (logits.row(r).array() - mx).exp().matrix();
    p.row(r) /= p.row(r).sum();
  }
  return p;
}

}  // namespace

std::size_t PerfDataset::nn_width() const {
  return static_cast<std::size_t>(nn::supernet(supernet).num_choice_blocks()) * nn::kNumChoices;
}

void PerfDataset::write_csv(std::ostream& os) const {
  const std::size_t nw = nn_width();
  for (std::size_t i = 0; i < nw; ++i) {
    os << "nn_" << i << ',';
  }
  for (int i = 0; i < accel::kOneHotSize; ++i) {
    os << "hw_" << i << ',';
  }
  os << accel::perf_csv_header() << ",compute_cycles,macs\n";
  for (const auto& r : records) {
    for (double x : nn::encode_onehot(r.arch)) {
      os << static_cast<int>(x) << ',';
    }
    for (double x : r.hw.one_hot()) {
      os << static_cast<int>(x) << ',';
    }
    os << accel::to_csv_row(r.perf) << ',' << r.perf.compute_cycles << ',' << r.macs << '\n';
  }
}

namespace {

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) {
    out.push_back(cell);
  }
  if (!line.empty() && line.back() == ',') {
    out.emplace_back();
  }
  return out;
}

template <class T>
T cell_as(const std::string& text, std::size_t line_no) {
  std::istringstream ss(text);
  T v{};
  ss >> v;
  if (ss.fail() || !ss.eof()) {
    throw ValidationError("line " + std::to_string(line_no) + ": cannot parse '" + text + "'");
  }
  return v;
}

std::vector<double> slice(const std::vector<std::string>& cells, std::size_t from, std::size_t n,
                          std::size_t line_no) {
  std::vector<double> v(n);
  for (std::size_t i = 0; i < n; ++i) {
    v[i] = cell_as<double>(cells[from + i], line_no);
  }
  return v;
}

}  // namespace

PerfDataset PerfDataset::read_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) {
    throw ValidationError("dataset file is empty");
  }
  const auto header = split_csv(line);
  std::size_t nw = 0;
  while (nw < header.size() && header[nw].rfind("nn_", 0) == 0) {
    ++nw;
  }
  PerfDataset d;
  bool matched = false;
  for (auto ds : {nn::Dataset::kCifar10, nn::Dataset::kImageNet}) {
    if (static_cast<std::size_t>(nn::supernet(ds).num_choice_blocks()) * nn::kNumChoices == nw) {
      d.supernet = ds;
      matched = true;
    }
  }
  const std::size_t cols = nw + accel::kOneHotSize + 10;
  if (!matched || header.size() != cols) {
    throw ValidationError("dataset header does not match any supernet layout");
  }
  std::size_t line_no = 1;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) {
      continue;
    }
    const auto cells = split_csv(line);
    if (cells.size() != cols) {
      throw ValidationError("line " + std::to_string(line_no) + ": expected " + std::to_string(cols) + " columns");
    }
    SampleRecord r;
    r.arch = nn::Architecture::from_scores(slice(cells, 0, nw, line_no));
    r.hw = accel::HwConfig::from_scores(slice(cells, nw, accel::kOneHotSize, line_no));
    std::size_t c = nw + accel::kOneHotSize;
    r.perf.total_cycles = cell_as<std::int64_t>(cells[c++], line_no);
    r.perf.bytes_inp = cell_as<std::int64_t>(cells[c++], line_no);
    r.perf.bytes_wgt = cell_as<std::int64_t>(cells[c++], line_no);
    r.perf.bytes_acc = cell_as<std::int64_t>(cells[c++], line_no);
    r.perf.bytes_uop = cell_as<std::int64_t>(cells[c++], line_no);
    r.perf.latency_s = cell_as<double>(cells[c++], line_no);
    r.perf.energy_j = cell_as<double>(cells[c++], line_no);
    r.perf.edp_js = cell_as<double>(cells[c++], line_no);
    r.perf.compute_cycles = cell_as<std::int64_t>(cells[c++], line_no);
    r.macs = cell_as<std::int64_t>(cells[c++], line_no);
    d.records.push_back(std::move(r));
  }
  if (d.records.empty()) {
    throw ValidationError("dataset file has no records");
  }
  return d;
}

PerfDataset gen_dataset(std::size_t n, std::uint64_t seed, const nn::SupernetSpec& spec, const CostTable* table,
                        int jobs) {
  if (n == 0) {
    throw ValidationError("dataset size must be >= 1");
  }
  if (table != nullptr && &table->spec() != &spec && table->spec().dataset != spec.dataset) {
    throw ValidationError("cost table was built for a different supernet");
  }
  const auto& configs = accel::valid_configs();
  const auto layers = static_cast<std::size_t>(spec.num_choice_blocks());
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, configs.size() - 1);

  PerfDataset data;
  data.supernet = spec.dataset;
  data.records.resize(n);
  for (auto& r : data.records) {
    r.arch = nn::random_architecture(layers, rng);
    r.hw = configs[pick(rng)];
  }
  auto label = [&](std::size_t begin, std::size_t step) {
    for (std::size_t k = begin; k < n; k += step) {
      auto& r = data.records[k];
      const auto ws = nn::workloads_of(r.arch, spec);
      r.perf = table != nullptr ? table->report(r.arch, r.hw) : accel::simulate(ws, r.hw);
      r.macs = 0;
      for (const auto& w : ws) {
        r.macs += w.macs();
      }
    }
  };
  if (jobs <= 1) {
    label(0, 1);
  } else {
    std::vector<std::jthread> pool;
    for (int t = 0; t < jobs; ++t) {
      pool.emplace_back(label, static_cast<std::size_t>(t), static_cast<std::size_t>(jobs));
    }
  }
  return data;
}

std::vector<ValidityRecord> gen_validity_dataset(std::size_t n, std::uint64_t seed) {
  if (n == 0) {
    throw ValidationError("dataset size must be >= 1");
  }
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> pick(0, accel::kSpaceSize - 1);
  std::vector<ValidityRecord> out(n);
  for (auto& r : out) {
    r.hw = accel::HwConfig::from_index(pick(rng));
    r.valid = accel::is_valid(r.hw).valid;
  }
  return out;
}

void write_validity_csv(std::ostream& os, std::span<const ValidityRecord> records) {
  for (int i = 0; i < accel::kOneHotSize; ++i) {
    os << "hw_" << i << ',';
  }
  os << "valid\n";
  for (const auto& r : records) {
    for (double x : r.hw.one_hot()) {
      os << static_cast<int>(x) << ',';
    }
    os << (r.valid ? 1 : 0) << '\n';
  }
}

std::vector<ValidityRecord> read_validity_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || split_csv(line).size() != accel::kOneHotSize + 1) {
    throw ValidationError("validity file header does not match the hardware encoding");
  }
  std::vector<ValidityRecord> out;
  std::size_t line_no = 1;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) {
      continue;
    }
    const auto cells = split_csv(line);
    if (cells.size() != accel::kOneHotSize + 1) {
      throw ValidationError("line " + std::to_string(line_no) + ": expected " +
                            std::to_string(accel::kOneHotSize + 1) + " columns");
    }
    ValidityRecord r;
    r.hw = accel::HwConfig::from_scores(slice(cells, 0, accel::kOneHotSize, line_no));
    r.valid = cell_as<int>(cells.back(), line_no) != 0;
    out.push_back(r);
  }
  if (out.empty()) {
    throw ValidationError("validity file has no records");
  }
  return out;
}

double kendall_tau(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw ValidationError("kendall_tau needs equal-length inputs");
  }
  if (a.size() < 2) {
    throw ValidationError("kendall_tau needs at least two values");
  }
  const std::size_t n = a.size();
  std::int64_t concordant = 0;
  std::int64_t discordant = 0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double s = (a[i] - a[j]) * (b[i] - b[j]);
      concordant += s > 0.0;
      discordant += s < 0.0;
    }
  }
  const double pairs = static_cast<double>(n) * static_cast<double>(n - 1) / 2.0;
  return static_cast<double>(concordant - discordant) / pairs;
}

PerfPredictor::PerfPredictor(grad::Mlp mlp, grad::RobustScaler scaler, accel::Metric metric,
                             TargetTransform transform, int nn_width)
    : mlp_(std::move(mlp)), scaler_(scaler), metric_(metric), transform_(transform), nn_width_(nn_width) {
  if (mlp_.input_width() != input_width() || mlp_.output_width() != 1) {
    throw ValidationError("predictor network must map " + std::to_string(input_width()) + " inputs to 1 output");
  }
}

Matrix PerfPredictor::predict_scaled(const Matrix& inputs) const { return mlp_.predict(inputs); }

double PerfPredictor::predict_scaled(std::span<const double> nn_vec, std::span<const double> hw_vec) const {
  if (static_cast<int>(nn_vec.size()) != nn_width_ || hw_vec.size() != accel::kOneHotSize) {
    throw ValidationError("predictor input has the wrong width");
  }
  Matrix x(1, input_width());
  std::copy(nn_vec.begin(), nn_vec.end(), x.data());
  std::copy(hw_vec.begin(), hw_vec.end(), x.data() + nn_vec.size());
  return mlp_.predict(x)(0, 0);
}

double PerfPredictor::to_metric(double scaled) const {
  const double t = scaler_.inverse_transform(scaled);
  return transform_ == TargetTransform::kLog ? std::exp(t) : t;
}

double PerfPredictor::to_scaled(double metric_value) const {
  return scaler_.transform(transform_ == TargetTransform::kLog ? std::log(metric_value) : metric_value);
}

double PerfPredictor::predict(std::span<const double> nn_vec, std::span<const double> hw_vec) const {
  return to_metric(predict_scaled(nn_vec, hw_vec));
}

grad::Var PerfPredictor::forward(grad::Tape& tape, grad::Var x) { return mlp_.forward(tape, x); }

nlohmann::json PerfPredictor::to_json() const {
  return {{"version", grad::kCheckpointVersion},
          {"kind", "perf_predictor"},
          {"metric", std::string(accel::to_string(metric_))},
          {"transform", transform_ == TargetTransform::kLog ? "log" : "identity"},
          {"nn_width", nn_width_},
          {"scaler", scaler_.to_json()},
          {"mlp", mlp_.to_json()}};
}

PerfPredictor PerfPredictor::from_json(const nlohmann::json& j) {
  if (j.value("version", -1) != grad::kCheckpointVersion || j.value("kind", "") != "perf_predictor") {
    throw ValidationError("not a performance predictor checkpoint");
  }
  const auto transform = j.at("transform").get<std::string>() == "log" ? TargetTransform::kLog
                                                                        : TargetTransform::kIdentity;
  return PerfPredictor(grad::Mlp::from_json(j.at("mlp")), grad::RobustScaler::from_json(j.at("scaler")),
                       accel::parse_metric(j.at("metric").get<std::string>()), transform,
                       j.at("nn_width").get<int>());
}

Matrix feature_matrix(const PerfDataset& data) {
  const auto nw = static_cast<Eigen::Index>(data.nn_width());
  Matrix x(static_cast<Eigen::Index>(data.size()), nw + accel::kOneHotSize);
  for (std::size_t r = 0; r < data.size(); ++r) {
    const auto& rec = data.records[r];
    const auto nn_vec = nn::encode_onehot(rec.arch);
    const auto hw_vec = rec.hw.one_hot();
    const auto row = static_cast<Eigen::Index>(r);
    for (Eigen::Index c = 0; c < nw; ++c) {
      x(row, c) = nn_vec[static_cast<std::size_t>(c)];
    }
    for (int c = 0; c < accel::kOneHotSize; ++c) {
      x(row, nw + c) = hw_vec[static_cast<std::size_t>(c)];
    }
  }
  return x;
}

double metric_of(const SampleRecord& r, accel::Metric m) { return accel::metric_value(r.perf, m); }

std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_indices(std::size_t n, double test_fraction,
                                                                            std::uint64_t seed) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
    throw RangeError("test fraction must be in (0, 1)");
  }
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  std::shuffle(idx.begin(), idx.end(), rng);
  const auto n_test = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(test_fraction * n)));
  if (n_test >= n) {
    throw ValidationError("dataset too small to split");
  }
  std::vector<std::size_t> test(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_test));
  std::vector<std::size_t> train(idx.begin() + static_cast<std::ptrdiff_t>(n_test), idx.end());
  return {std::move(train), std::move(test)};
}

PredictorResult train_predictor(const PerfDataset& data, const PredictorTrainConfig& cfg) {
  if (data.size() < 4) {
    throw ValidationError("predictor training needs at least 4 samples");
  }
  if (cfg.epochs < 0 || cfg.batch_size < 1) {
    throw RangeError("epochs must be >= 0 and batch size >= 1");
  }
  const auto [train, test] = split_indices(data.size(), cfg.test_fraction, cfg.seed);
  const Matrix x = feature_matrix(data);

  std::vector<double> target(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    const double v = metric_of(data.records[i], cfg.metric);
    target[i] = cfg.transform == TargetTransform::kLog ? std::log(v) : v;
  }
  auto scaler = grad::RobustScaler::identity();
  if (cfg.scale_targets) {
    std::vector<double> train_targets;
    for (auto i : train) {
      train_targets.push_back(target[i]);
    }
    scaler.fit(train_targets);
  }
  Matrix y(static_cast<Eigen::Index>(data.size()), 1);
  for (std::size_t i = 0; i < data.size(); ++i) {
    y(static_cast<Eigen::Index>(i), 0) = scaler.transform(target[i]);
  }

  std::vector<int> widths{static_cast<int>(x.cols())};
  widths.insert(widths.end(), cfg.hidden.begin(), cfg.hidden.end());
  widths.push_back(1);
  PredictorResult res;
  res.predictor = PerfPredictor(grad::Mlp(widths, cfg.seed), scaler, cfg.metric, cfg.transform,
                                static_cast<int>(data.nn_width()));
  auto& mlp = res.predictor.mlp();
  auto params = mlp.parameters();
  grad::Adam opt(params, grad::AdamConfig{.lr = cfg.lr});

  const Matrix x_test = gather_rows(x, test);
  const Matrix y_test = gather_rows(y, test);
  std::mt19937_64 rng(cfg.seed ^ kShuffleSalt);
  std::vector<std::size_t> order = train;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    opt.set_lr(lr_at(cfg.decay_epochs, cfg.lr, cfg.decay_factor, epoch));
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    for (std::size_t b = 0; b < order.size(); b += static_cast<std::size_t>(cfg.batch_size)) {
      const auto len = std::min(order.size() - b, static_cast<std::size_t>(cfg.batch_size));
      const std::span<const std::size_t> idx(order.data() + b, len);
      grad::Tape tape;
      opt.zero_grad();
      auto loss = tape.l1_loss(mlp.forward(tape, tape.constant(gather_rows(x, idx))), gather_rows(y, idx));
      tape.backward(loss);
      opt.step();
      loss_sum += loss.scalar() * static_cast<double>(len);
    }
    const double train_loss = loss_sum / static_cast<double>(order.size());
    check_finite(train_loss, params, "predictor", epoch);
    const double test_loss = (mlp.predict(x_test) - y_test).cwiseAbs().mean();
    res.log.push_back({epoch + 1, train_loss, test_loss});
  }

  const Matrix pred = mlp.predict(x_test);
  std::vector<double> p(test.size()), t(test.size());
  for (std::size_t k = 0; k < test.size(); ++k) {
    p[k] = pred(static_cast<Eigen::Index>(k), 0);
    t[k] = metric_of(data.records[test[k]], cfg.metric);
  }
  res.test_tau = kendall_tau(p, t);
  return res;
}

ValidNet::ValidNet(grad::Mlp mlp) : mlp_(std::move(mlp)) {
  if (mlp_.input_width() != accel::kOneHotSize || mlp_.output_width() != 2) {
    throw ValidationError("ValidNet must map 36 inputs to 2 classes");
  }
}

double ValidNet::valid_probability(std::span<const double> hw_vec) const {
  if (hw_vec.size() != accel::kOneHotSize) {
    throw ValidationError("ValidNet input must have 36 entries");
  }
  return valid_probability(grad::row(hw_vec))(0, 0);
}

Matrix ValidNet::valid_probability(const Matrix& hw_rows) const { return softmax2(mlp_.predict(hw_rows)).col(0); }

grad::Var ValidNet::forward(grad::Tape& tape, grad::Var hw) {
  return tape.columns(tape.softmax(mlp_.forward(tape, hw)), 0, 1);
}

nlohmann::json ValidNet::to_json() const {
  return {{"version", grad::kCheckpointVersion}, {"kind", "validnet"}, {"mlp", mlp_.to_json()}};
}

ValidNet ValidNet::from_json(const nlohmann::json& j) {
  if (j.value("version", -1) != grad::kCheckpointVersion || j.value("kind", "") != "validnet") {
    throw ValidationError("not a ValidNet checkpoint");
  }
  return ValidNet(grad::Mlp::from_json(j.at("mlp")));
}

ValidNetResult train_validnet(std::span<const ValidityRecord> data, const ValidNetTrainConfig& cfg) {
  const auto n_valid = std::count_if(data.begin(), data.end(), [](const ValidityRecord& r) { return r.valid; });
  if (n_valid == 0 || n_valid == static_cast<std::ptrdiff_t>(data.size())) {
    throw ValidationError("validity dataset must contain both classes");
  }
  const auto [train, test] = split_indices(data.size(), cfg.test_fraction, cfg.seed);
  Matrix x(static_cast<Eigen::Index>(data.size()), accel::kOneHotSize);
  std::vector<int> labels(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    x.row(static_cast<Eigen::Index>(i)) = grad::row(data[i].hw.one_hot());
    labels[i] = data[i].valid ? 0 : 1;
  }

  std::vector<int> widths{accel::kOneHotSize};
  widths.insert(widths.end(), cfg.hidden.begin(), cfg.hidden.end());
  widths.push_back(2);
  ValidNetResult res;
  res.net = ValidNet(grad::Mlp(widths, cfg.seed));
  auto& mlp = res.net.mlp();
  auto params = mlp.parameters();
  grad::Adam opt(params, grad::AdamConfig{.lr = cfg.lr});

  const Matrix x_test = gather_rows(x, test);
  std::vector<int> y_test;
  for (auto i : test) {
    y_test.push_back(labels[i]);
  }
  auto accuracy = [&] {
    const Matrix p = res.net.valid_probability(x_test);
    std::size_t correct = 0;
    for (std::size_t k = 0; k < test.size(); ++k) {
      const int pred = p(static_cast<Eigen::Index>(k), 0) > 0.5 ? 0 : 1;
      correct += pred == y_test[k];
    }
    return static_cast<double>(correct) / static_cast<double>(test.size());
  };

  std::mt19937_64 rng(cfg.seed ^ kShuffleSalt);
  std::vector<std::size_t> order = train;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    for (std::size_t b = 0; b < order.size(); b += static_cast<std::size_t>(cfg.batch_size)) {
      const auto len = std::min(order.size() - b, static_cast<std::size_t>(cfg.batch_size));
      const std::span<const std::size_t> idx(order.data() + b, len);
      std::vector<int> yb(len);
      for (std::size_t k = 0; k < len; ++k) {
        yb[k] = labels[idx[k]];
      }
      grad::Tape tape;
      opt.zero_grad();
      auto loss = tape.cross_entropy(mlp.forward(tape, tape.constant(gather_rows(x, idx))), yb, cfg.class_weights);
      tape.backward(loss);
      opt.step();
      loss_sum += loss.scalar() * static_cast<double>(len);
    }
    const double train_loss = loss_sum / static_cast<double>(order.size());
    check_finite(train_loss, params, "ValidNet", epoch);
    grad::Tape tape;
    const double test_loss = tape.cross_entropy(tape.constant(mlp.predict(x_test)), y_test, cfg.class_weights).scalar();
    res.log.push_back({epoch + 1, train_loss, test_loss});
  }
  res.test_accuracy = accuracy();
  return res;
}

InterpolationRatio predictor_interpolation_ratio(const PerfPredictor& p, std::span<const double> probs,
                                                 const accel::HwConfig& h0, int samples, std::uint64_t seed) {
  if (samples < 1) {
    throw RangeError("sample count must be >= 1");
  }
  if (static_cast<int>(probs.size()) != p.nn_width()) {
    throw ValidationError("distribution width does not match the predictor");
  }
  const auto hw = h0.one_hot();
  InterpolationRatio out;
  out.continuous = p.predict(probs, hw);

  // Group identical draws so a degenerate distribution reproduces the
  // continuous prediction bit for bit.
  std::mt19937_64 rng(seed);
  std::map<std::string, std::pair<int, nn::Architecture>> draws;
  for (int s = 0; s < samples; ++s) {
    auto a = nn::sample_from_probabilities(probs, rng);
    auto& slot = draws[a.to_string()];
    slot.first += 1;
    slot.second = std::move(a);
  }
  for (const auto& [key, entry] : draws) {
    const double weight = static_cast<double>(entry.first) / samples;
    out.expected += weight * p.predict(nn::encode_onehot(entry.second), hw);
  }
  out.ratio = out.continuous / out.expected;
  return out;
}

InterpolationSummary interpolation_study(const PerfPredictor& p, std::size_t layers, int distributions, int samples,
                                         std::uint64_t seed) {
  if (distributions < 1) {
    throw RangeError("need at least one distribution");
  }
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  InterpolationSummary s;
  for (int d = 0; d < distributions; ++d) {
    std::vector<double> logits(layers * nn::kNumChoices);
    for (auto& l : logits) {
      l = normal(rng);
    }
    const auto probs = nn::softmax_rows(logits);
    s.ratios.push_back(predictor_interpolation_ratio(p, probs, accel::kDefaultConfig, samples, rng()).ratio);
  }
  const double n = static_cast<double>(s.ratios.size());
  s.mean = std::accumulate(s.ratios.begin(), s.ratios.end(), 0.0) / n;
  for (double r : s.ratios) {
    s.variance += (r - s.mean) * (r - s.mean) / n;
  }
  return s;
}

std::vector<double> interpolation_path_point(std::span<const double> v, std::span<const double> r,
                                             std::span<const double> i, double phi) {
  std::vector<double> g(v.size());
  for (std::size_t j = 0; j < v.size(); ++j) {
    g[j] = phi < 1.0 ? (1.0 - phi) * v[j] + phi * r[j] : (2.0 - phi) * r[j] + (phi - 1.0) * i[j];
  }
  return g;
}

Matrix gradient_interpolation(ValidNet& net, std::span<const double> v, std::span<const double> r,
                              std::span<const double> i, int steps) {
  if (steps < 1) {
    throw RangeError("steps must be >= 1");
  }
  if (v.size() != accel::kOneHotSize || r.size() != accel::kOneHotSize || i.size() != accel::kOneHotSize) {
    throw ValidationError("interpolation endpoints must have 36 entries");
  }
  if (!accel::is_valid(accel::HwConfig::from_scores(v)).valid) {
    throw ValidationError("start point v must be a valid configuration");
  }
  if (accel::is_valid(accel::HwConfig::from_scores(i)).valid) {
    throw ValidationError("end point i must be an invalid configuration");
  }
  Matrix out(steps, accel::kOneHotSize);
  for (int k = 0; k < steps; ++k) {
    const double phi = 2.0 * k / steps;
    grad::Tape tape;
    auto x = tape.input(grad::row(interpolation_path_point(v, r, i, phi)));
    tape.backward(tape.l1_loss(net.forward(tape, x), Matrix::Ones(1, 1)));
    out.row(k) = x.grad().cwiseAbs();
  }
  return out;
}

GradientStudy gradient_interpolation_study(ValidNet& net, int triples, int steps, std::uint64_t seed) {
  if (triples < 1) {
    throw RangeError("need at least one triple");
  }
  const auto& valid = accel::valid_configs();
  std::vector<accel::HwConfig> invalid;
  for (const auto& h : accel::enumerate_space()) {
    if (!accel::is_valid(h).valid) {
      invalid.push_back(h);
    }
  }
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  GradientStudy s;
  s.mean_heatmap = Matrix::Zero(steps, accel::kOneHotSize);
  for (int t = 0; t < triples; ++t) {
    const auto v = valid[std::uniform_int_distribution<std::size_t>(0, valid.size() - 1)(rng)].one_hot();
    const auto i = invalid[std::uniform_int_distribution<std::size_t>(0, invalid.size() - 1)(rng)].one_hot();
    std::vector<double> r(accel::kOneHotSize);
    for (auto& x : r) {
      x = unit(rng);
    }
    s.mean_heatmap += gradient_interpolation(net, v, r, i, steps) / triples;
  }
  double lo_sum = 0.0, hi_sum = 0.0;
  int lo_n = 0, hi_n = 0;
  for (int k = 0; k < steps; ++k) {
    const double phi = 2.0 * k / steps;
    if (phi <= 0.25) {
      lo_sum += s.mean_heatmap.row(k).mean();
      ++lo_n;
    } else if (phi >= 1.5) {
      hi_sum += s.mean_heatmap.row(k).mean();
      ++hi_n;
    }
  }
  s.near_valid = lo_n > 0 ? lo_sum / lo_n : 0.0;
  s.near_invalid = hi_n > 0 ? hi_sum / hi_n : 0.0;
  return s;
}

void write_matrix_csv(std::ostream& os, const Matrix& m, std::string_view column_prefix) {
  for (Eigen::Index c = 0; c < m.cols(); ++c) {
    os << (c ? "," : "") << column_prefix << c;
  }
  os << '\n' << std::setprecision(17);
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      os << (c ? "," : "") << m(r, c);
    }
    os << '\n';
  }
}

}  // namespace hwnas::sur
