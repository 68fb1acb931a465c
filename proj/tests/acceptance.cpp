// End-to-end acceptance run. Trains every artifact once at full budget,
// evaluates the twelve acceptance criteria and prints one PASS/FAIL line per
// criterion with the measured values. Thresholds live in the `tol` namespace.
//
// Exit status is 0 once every criterion has been evaluated, whatever the
// verdicts; pass --strict to exit 1 when any criterion fails. The verdict
// lines are also written to acceptance_results.txt in the working directory.

#include <algorithm>
#include <chrono>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <limits>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "hwnas/codesign.hpp"
#include "hwnas/error.hpp"
#include "oracles.hpp"

using namespace hwnas;

namespace tol {
constexpr int kSpaceSize = 32768;
constexpr double kValidFractionLo = 0.05;
constexpr double kValidFractionHi = 0.60;
constexpr double kSpaceSeconds = 1.0;

constexpr int kGradGraphs = 100;
constexpr double kGradRelError = 1e-4;
constexpr double kGradSeconds = 60.0;

constexpr int kTilingPairs = 100;
constexpr int kMonotonePairs = 100;
constexpr double kTilingSeconds = 300.0;

constexpr std::size_t kPredictorSamples = 20000;
constexpr double kPredictorTau = 0.95;
constexpr double kPredictorSeconds = 1800.0;

constexpr std::size_t kValiditySamples = 10240;
constexpr double kValidNetAccuracy = 0.99;  // strict
constexpr double kValidNetSeconds = 300.0;

constexpr int kInterpDistributions = 100;
constexpr int kInterpSamples = 1000;
constexpr double kInterpMeanLo = 0.95;
constexpr double kInterpMeanHi = 1.05;
constexpr double kInterpVariance = 0.01;  // strict
constexpr double kInterpSeconds = 120.0;

constexpr std::int64_t kRlSteps = 300000;
constexpr std::size_t kHeldOutArchs = 50;
constexpr std::uint64_t kHeldOutSeed = 4242;
constexpr double kPpoOptimality = 95.0;
constexpr int kPpoInvalid = 0;
constexpr double kDqnOptimality = 90.0;
constexpr double kPpoSeconds = 7200.0;

constexpr double kExhaustiveOptimality = 98.0;
constexpr double kExhaustiveInvalid = 0.02;
constexpr double kPerfHwgenValid = 0.05;
constexpr double kHwgenSeconds = 3600.0;

constexpr int kGradTriples = 20;
constexpr int kGradSteps = 40;
constexpr double kGradContrast = 5.0;
constexpr double kGradStudySeconds = 300.0;

constexpr double kDshwnasSeconds = 3600.0;

constexpr double kLatencyFactor = 1.5;
constexpr double kCodesignSeconds = 7200.0;
}  // namespace tol

namespace {

const std::vector<std::uint64_t> kSeeds{1, 2, 3};

using Clock = std::chrono::steady_clock;

double since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string num(double v, int precision = 6) {
  std::ostringstream s;
  s << std::setprecision(precision) << v;
  return s.str();
}

struct Verdict {
  int id;
  std::string name;
  bool pass;
  std::string detail;
};

std::vector<Verdict> verdicts;

void report(int id, std::string name, bool pass, std::string detail) {
  std::cout << (pass ? "PASS" : "FAIL") << "  criterion " << std::setw(2) << id << "  " << name << ": " << detail
            << std::endl;
  verdicts.push_back({id, std::move(name), pass, std::move(detail)});
}

void progress(const std::string& what) { std::cerr << "[acceptance] " << what << std::endl; }

// ---------------------------------------------------------------------------

void design_space() {
  const auto t0 = Clock::now();
  auto count = [] {
    const auto all = accel::enumerate_space();
    std::int64_t valid = 0;
    for (const auto& h : all) {
      valid += accel::is_valid(h).valid ? 1 : 0;
    }
    return std::pair{static_cast<int>(all.size()), valid};
  };
  const auto first = count();
  const auto second = count();
  const double secs = since(t0) / 2.0;
  const double frac = static_cast<double>(first.second) / first.first;
  const bool pass = first.first == tol::kSpaceSize && first == second && frac > tol::kValidFractionLo &&
                    frac < tol::kValidFractionHi && secs < tol::kSpaceSeconds;
  report(1, "design space", pass,
         std::to_string(first.first) + " configs, " + std::to_string(first.second) + " valid (fraction " + num(frac) +
             "), repeat " + (first == second ? "identical" : "DIFFERENT") + ", " + num(secs, 3) + " s per enumeration");
}

void autodiff() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(20240);
  double worst = 0.0;
  for (int trial = 0; trial < tol::kGradGraphs; ++trial) {
    const auto g = oracle::op_graph(trial, rng);
    worst = std::max(worst, oracle::fd_error(g, oracle::uniform(3, 6, rng)));
  }
  const double secs = since(t0);
  report(2, "autodiff vs finite differences", worst < tol::kGradRelError && secs < tol::kGradSeconds,
         std::to_string(tol::kGradGraphs) + " graphs, max relative error " + num(worst, 3) + ", " + num(secs, 3) + " s");
}

void tiling() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(31337);
  int equal = 0, pairs = 0;
  while (pairs < tol::kTilingPairs) {
    const auto w = oracle::random_workload(rng);
    const auto h = oracle::random_valid(rng);
    const auto bf = oracle::brute_force(w, h);
    if (!bf) {
      continue;  // no tiling fits; not a comparable pair
    }
    ++pairs;
    equal += accel::optimal_tiling(w, h) == *bf ? 1 : 0;
  }
  int monotone = 0, enlargements = 0;
  while (enlargements < tol::kMonotonePairs) {
    const auto w = oracle::random_workload(rng);
    const auto h = oracle::random_valid(rng);
    const int p = std::uniform_int_distribution<int>(3, 6)(rng);  // one of the four buffers
    auto params = h.params();
    const auto pi = static_cast<std::size_t>(p);
    if (params[pi] == accel::kParamMax[pi]) continue;
    ++params[pi];
    const auto bigger = accel::HwConfig::from_params(params);
    if (!accel::is_valid(bigger).valid) continue;
    const auto small_t = oracle::brute_force(w, h);
    if (!small_t) continue;
    ++enlargements;
    const auto big_t = accel::optimal_tiling(w, bigger);
    monotone += accel::dram_traffic(w, bigger, big_t).total() <= accel::dram_traffic(w, h, *small_t).total() ? 1 : 0;
  }
  const double secs = since(t0);
  report(3, "tiling oracle", equal == pairs && monotone == enlargements && secs < tol::kTilingSeconds,
         "optimal_tiling equals brute force on " + std::to_string(equal) + "/" + std::to_string(pairs) +
             " pairs, buffer monotonicity on " + std::to_string(monotone) + "/" + std::to_string(enlargements) +
             " enlargements, " + num(secs, 3) + " s");
}

// ---------------------------------------------------------------------------
// Shared artifacts.

struct Artifacts {
  const nn::SupernetSpec& spec = nn::supernet(nn::Dataset::kCifar10);
  CostTable table{spec};
  sur::PerfPredictor cycles, edp;
  sur::ValidNet validnet;
  rl::HwOptAgent ppo;
  std::vector<nn::Architecture> held_out;
};

void predictors(Artifacts& a) {
  const auto t0 = Clock::now();
  progress("generating the predictor dataset");
  const auto data = sur::gen_dataset(tol::kPredictorSamples, 0, a.spec, &a.table);
  std::map<accel::Metric, double> tau;
  for (auto m : {accel::Metric::kCycles, accel::Metric::kEdp}) {
    progress("training the " + std::string(accel::to_string(m)) + " predictor");
    sur::PredictorTrainConfig cfg;
    cfg.metric = m;
    auto r = sur::train_predictor(data, cfg);
    tau[m] = r.test_tau;
    (m == accel::Metric::kCycles ? a.cycles : a.edp) = std::move(r.predictor);
  }
  const double secs = since(t0);
  const double t_c = tau[accel::Metric::kCycles], t_e = tau[accel::Metric::kEdp];
  report(4, "predictor quality", t_c >= tol::kPredictorTau && t_e >= tol::kPredictorTau && secs < tol::kPredictorSeconds,
         "held-out Kendall tau cycles " + num(t_c, 4) + ", EDP " + num(t_e, 4) + " on " +
             std::to_string(tol::kPredictorSamples) + " samples, " + num(secs / 60.0, 3) + " min");
}

void validnet(Artifacts& a) {
  const auto t0 = Clock::now();
  progress("training ValidNet");
  const auto data = sur::gen_validity_dataset(tol::kValiditySamples, 0);
  auto r = sur::train_validnet(data, sur::ValidNetTrainConfig{});
  a.validnet = std::move(r.net);
  const double secs = since(t0);
  report(5, "ValidNet accuracy", r.test_accuracy > tol::kValidNetAccuracy && secs < tol::kValidNetSeconds,
         "held-out accuracy " + num(r.test_accuracy, 5) + " on " + std::to_string(tol::kValiditySamples) + " samples, " +
             num(secs, 3) + " s");
}

void predictor_interpolation(const Artifacts& a) {
  const auto t0 = Clock::now();
  progress("predictor interpolation study");
  const auto st = sur::interpolation_study(a.cycles, a.table.layers(), tol::kInterpDistributions, tol::kInterpSamples, 0);
  const double secs = since(t0);
  report(6, "predictor interpolation",
         st.mean >= tol::kInterpMeanLo && st.mean <= tol::kInterpMeanHi && st.variance < tol::kInterpVariance &&
             secs < tol::kInterpSeconds,
         "mean ratio " + num(st.mean, 5) + ", variance " + num(st.variance, 3) + " over " +
             std::to_string(st.ratios.size()) + " distributions, " + num(secs, 3) + " s");
}

void rl_optimality(Artifacts& a) {
  const rl::SimulatorEvaluator eval(a.table, accel::Metric::kCycles);
  a.held_out = rl::sample_architectures(tol::kHeldOutArchs, a.table.layers(), tol::kHeldOutSeed);

  progress("training composite PPO");
  const auto t0 = Clock::now();
  auto ppo_cfg = rl::tuned_ppo();
  ppo_cfg.total_steps = tol::kRlSteps;
  a.ppo = rl::ppo_train(rl::Setting::kComposite, rl::tuned_env(rl::Setting::kComposite), ppo_cfg, a.cycles).agent;
  const double ppo_secs = since(t0);
  const auto ppo = rl::optimality(a.ppo, a.held_out, eval);

  progress("training sequential DQN");
  auto dqn_cfg = rl::tuned_dqn();
  dqn_cfg.total_steps = tol::kRlSteps;
  const auto dqn_agent =
      rl::dqn_train(rl::Setting::kSequential, rl::tuned_env(rl::Setting::kSequential), dqn_cfg, a.cycles).agent;
  const auto dqn = rl::optimality(dqn_agent, a.held_out, eval);

  bool rejected = false;
  try {
    auto c = rl::tuned_dqn();
    c.total_steps = 1000;
    (void)rl::dqn_train(rl::Setting::kComposite, rl::tuned_env(rl::Setting::kComposite), c, a.cycles);
  } catch (const UnsupportedSetting&) {
    rejected = true;
  }
  report(7, "RL optimality",
         ppo.percent >= tol::kPpoOptimality && ppo.invalid == tol::kPpoInvalid && dqn.percent >= tol::kDqnOptimality &&
             rejected && ppo_secs < tol::kPpoSeconds,
         "composite PPO " + num(ppo.percent, 5) + "% with " + std::to_string(ppo.invalid) + " invalid, sequential DQN " +
             num(dqn.percent, 5) + "% with " + std::to_string(dqn.invalid) + " invalid, on " +
             std::to_string(a.held_out.size()) + " held-out architectures; composite DQN " +
             (rejected ? "rejected" : "NOT rejected") + "; PPO training " + num(ppo_secs / 60.0, 3) + " min");
}

void hwgen(const Artifacts& a) {
  const auto t0 = Clock::now();
  const rl::SimulatorEvaluator eval(a.table, accel::Metric::kCycles);
  progress("training Exhaustive-HWGEN");
  const auto ex = cd::evaluate_hwgen(cd::exhaustive_hwgen_train(cd::HwGenConfig{}, a.table), a.held_out, eval);
  std::string perf_detail;
  double worst_valid = 0.0;
  for (double lambda : cd::perf_hwgen_lambdas()) {
    progress("training Perf-HWGEN, lambda " + num(lambda));
    const auto e = cd::evaluate_hwgen(cd::perf_hwgen_train(cd::HwGenConfig{}, lambda, a.cycles, a.validnet), a.held_out, eval);
    const double valid = 1.0 - e.invalid_fraction;
    worst_valid = std::max(worst_valid, valid);
    perf_detail += (perf_detail.empty() ? "" : ", ") + num(lambda) + ":" + num(valid, 3);
  }
  const double secs = since(t0);
  report(8, "HWGEN ablation",
         ex.optimality >= tol::kExhaustiveOptimality && ex.invalid_fraction <= tol::kExhaustiveInvalid &&
             worst_valid <= tol::kPerfHwgenValid && secs < tol::kHwgenSeconds,
         "Exhaustive-HWGEN " + num(ex.optimality, 5) + "% with invalid fraction " + num(ex.invalid_fraction, 3) +
             "; Perf-HWGEN valid fraction per lambda {" + perf_detail + "}, max " + num(worst_valid, 3) + "; " +
             num(secs / 60.0, 3) + " min");
}

void gradient_study(Artifacts& a) {
  const auto t0 = Clock::now();
  progress("gradient interpolation study");
  const auto st = sur::gradient_interpolation_study(a.validnet, tol::kGradTriples, tol::kGradSteps, 0);
  const double secs = since(t0);
  report(9, "ValidNet gradient interpolation", st.contrast() >= tol::kGradContrast && secs < tol::kGradStudySeconds,
         "mean |grad| near valid " + num(st.near_valid, 4) + ", near invalid " + num(st.near_invalid, 4) + ", ratio " +
             num(st.contrast(), 4) + " over " + std::to_string(tol::kGradTriples) + " triples, " + num(secs, 3) + " s");
}

void dshwnas(const Artifacts& a) {
  const auto t0 = Clock::now();
  progress("DSHWNAS sweep");
  int invalid = 0, runs = 0;
  for (double beta : cd::beta_sweep()) {
    for (auto seed : kSeeds) {
      cd::CodesignConfig cfg;
      cfg.seed = seed;
      const cd::TaskOracle oracle(a.table.layers(), seed);
      invalid += cd::dshwnas_run(cfg, beta, a.cycles, a.validnet, oracle).valid ? 0 : 1;
      ++runs;
    }
  }
  const double secs = since(t0);
  report(10, "DSHWNAS failure", 2 * invalid > runs && secs < tol::kDshwnasSeconds,
         std::to_string(invalid) + " of " + std::to_string(runs) + " (beta, seed) runs end on an invalid design, " +
             num(secs, 3) + " s");
}

std::string codesign_csv(const Artifacts& a, double lambda_override, bool with_reference, std::vector<double>* lat) {
  std::vector<cd::CodesignResult> rows;
  for (auto seed : kSeeds) {
    cd::CodesignConfig cfg;
    cfg.seed = seed;
    if (lambda_override >= 0.0) cfg.lambda = lambda_override;
    const cd::TaskOracle oracle(a.table.layers(), seed);
    rows.push_back(cd::rl_codesign_run(cfg, a.ppo, a.cycles, oracle));
    rows.push_back(cd::sequential_opt_run(cfg, a.ppo, a.cycles, oracle));
    rows.push_back(cd::hwaware_nas_run(cfg, a.cycles, oracle));
    if (with_reference) {
      cfg.lambda = 0.0;
      rows.push_back(cd::hwaware_nas_run(cfg, a.cycles, oracle));
    }
  }
  if (lat) {
    for (const auto& r : rows) lat->push_back(r.valid ? r.perf.latency_s : std::numeric_limits<double>::infinity());
  }
  std::ostringstream s;
  cd::write_results_csv(s, rows);
  return s.str();
}

void end_to_end(const Artifacts& a) {
  const auto t0 = Clock::now();
  progress("co-design runs");
  std::vector<double> lat;
  (void)codesign_csv(a, -1.0, true, &lat);
  const double secs = since(t0);
  int ordered = 0;
  bool factor_ok = true;
  std::string detail;
  for (std::size_t i = 0; i < kSeeds.size(); ++i) {
    const double rl = lat[4 * i], seq = lat[4 * i + 1], hw = lat[4 * i + 2], ref = lat[4 * i + 3];
    ordered += rl <= seq && seq <= hw ? 1 : 0;
    factor_ok = factor_ok && ref / rl >= tol::kLatencyFactor;
    detail += "seed " + std::to_string(kSeeds[i]) + ": " + num(rl * 1e3, 4) + " / " + num(seq * 1e3, 4) + " / " +
              num(hw * 1e3, 4) + " ms, " + num(ref / rl, 3) + "x vs lambda=0 on H0; ";
  }
  report(11, "end-to-end ordering",
         2 * ordered > static_cast<int>(kSeeds.size()) && factor_ok && secs < tol::kCodesignSeconds,
         detail + "ordering on " + std::to_string(ordered) + "/" + std::to_string(kSeeds.size()) + " seeds, " +
             num(secs, 3) + " s");
}

// ---------------------------------------------------------------------------
// Every stage twice with identical seeds; outputs compared as bytes. Training
// stages run at reduced budgets; the co-design stage reruns at full budget.

std::string log_csv(const std::vector<sur::EpochLog>& log) {
  std::ostringstream s;
  s << std::setprecision(17);
  for (const auto& e : log) s << e.epoch << ',' << e.train_loss << ',' << e.test_loss << '\n';
  return s.str();
}

std::map<std::string, std::string> stage_outputs(const Artifacts& a) {
  std::map<std::string, std::string> out;
  const auto data = sur::gen_dataset(400, 7, a.spec, &a.table);
  std::ostringstream d;
  data.write_csv(d);
  out["dataset.csv"] = d.str();
  const auto vdata = sur::gen_validity_dataset(400, 7);
  std::ostringstream v;
  sur::write_validity_csv(v, vdata);
  out["validity.csv"] = v.str();

  sur::PredictorTrainConfig pc;
  pc.epochs = 3;
  pc.seed = 7;
  const auto p = sur::train_predictor(data, pc);
  out["predictor"] = p.predictor.to_json().dump() + log_csv(p.log) + num(p.test_tau, 17);
  sur::ValidNetTrainConfig vc;
  vc.epochs = 3;
  vc.seed = 7;
  const auto vn = sur::train_validnet(vdata, vc);
  out["validnet"] = vn.net.to_json().dump() + log_csv(vn.log) + num(vn.test_accuracy, 17);

  auto ppo_cfg = rl::tuned_ppo();
  ppo_cfg.total_steps = 4096;
  ppo_cfg.seed = 7;
  const auto ppo = rl::ppo_train(rl::Setting::kComposite, rl::tuned_env(rl::Setting::kComposite), ppo_cfg, a.cycles);
  std::ostringstream pl;
  rl::write_train_log(pl, ppo.log);
  out["ppo"] = ppo.agent.to_json().dump() + pl.str();
  auto dqn_cfg = rl::tuned_dqn();
  dqn_cfg.total_steps = 4096;
  dqn_cfg.seed = 7;
  const auto dqn = rl::dqn_train(rl::Setting::kSequential, rl::tuned_env(rl::Setting::kSequential), dqn_cfg, a.cycles);
  std::ostringstream dl;
  rl::write_train_log(dl, dqn.log);
  out["dqn"] = dqn.agent.to_json().dump() + dl.str();

  const rl::SimulatorEvaluator eval(a.table, accel::Metric::kCycles);
  const auto archs = rl::sample_architectures(10, a.table.layers(), 7);
  const auto opt = rl::optimality(a.ppo, archs, eval);
  out["optimality"] = num(opt.percent, 17) + "," + std::to_string(opt.invalid);

  out["codesign.csv"] = codesign_csv(a, -1.0, true, nullptr);
  std::vector<cd::CodesignResult> ds;
  for (double beta : {1e-3, 1.0, 1e3}) {
    cd::CodesignConfig cfg;
    cfg.seed = 7;
    cfg.iterations = 50;
    ds.push_back(cd::dshwnas_run(cfg, beta, a.cycles, a.validnet, cd::TaskOracle(a.table.layers(), 7)));
  }
  std::ostringstream dss;
  cd::write_results_csv(dss, ds);
  out["dshwnas.csv"] = dss.str();

  cd::HwGenConfig hc;
  hc.train_archs = 60;
  hc.epochs = 2;
  hc.seed = 7;
  const auto ex = cd::exhaustive_hwgen_train(hc, a.table);
  const auto pf = cd::perf_hwgen_train(hc, 0.1, a.cycles, a.validnet);
  const auto ee = cd::evaluate_hwgen(ex, archs, eval), pe = cd::evaluate_hwgen(pf, archs, eval);
  out["hwgen"] = ex.to_json().dump() + pf.to_json().dump() + num(ee.optimality, 17) + num(pe.invalid_fraction, 17);

  auto net = a.validnet;
  const auto gs = sur::gradient_interpolation_study(net, 2, 10, 7);
  std::ostringstream hm;
  sur::write_matrix_csv(hm, gs.mean_heatmap, "hw_");
  out["heatmap.csv"] = hm.str();
  const auto is = sur::interpolation_study(a.cycles, a.table.layers(), 5, 100, 7);
  std::ostringstream ir;
  ir << std::setprecision(17);
  for (double r : is.ratios) ir << r << '\n';
  out["pred_interp.csv"] = ir.str();
  return out;
}

void reproducibility(const Artifacts& a) {
  progress("reproducibility reruns");
  const auto first = stage_outputs(a);
  const auto second = stage_outputs(a);
  std::vector<std::string> differ;
  for (const auto& [name, bytes] : first) {
    if (second.at(name) != bytes) differ.push_back(name);
  }
  std::string detail = std::to_string(first.size() - differ.size()) + "/" + std::to_string(first.size()) +
                       " stage outputs byte-identical on rerun";
  for (const auto& n : differ) detail += "; differs: " + n;
  report(12, "reproducibility", differ.empty(), detail);
}

}  // namespace

int main(int argc, char** argv) {
  const bool strict = argc > 1 && std::strcmp(argv[1], "--strict") == 0;
  const auto t0 = Clock::now();
  try {
    design_space();
    autodiff();
    tiling();
    Artifacts a;
    predictors(a);
    validnet(a);
    predictor_interpolation(a);
    rl_optimality(a);
    hwgen(a);
    gradient_study(a);
    dshwnas(a);
    end_to_end(a);
    reproducibility(a);
  } catch (const std::exception& e) {
    std::cout << "acceptance run aborted: " << e.what() << std::endl;
    return 2;
  }
  const auto passed = std::count_if(verdicts.begin(), verdicts.end(), [](const Verdict& v) { return v.pass; });
  std::cout << "\nsummary: " << passed << "/" << verdicts.size() << " criteria pass (" << num(since(t0) / 60.0, 3)
            << " min)\n";
  std::ofstream file("acceptance_results.txt");
  for (const auto& v : verdicts) {
    std::cout << "  " << std::setw(2) << v.id << "  " << (v.pass ? "PASS" : "FAIL") << "  " << v.name << '\n';
    file << (v.pass ? "PASS" : "FAIL") << "  criterion " << v.id << "  " << v.name << ": " << v.detail << '\n';
  }
  return strict && passed != static_cast<long>(verdicts.size()) ? 1 : 0;
}
