#include "commands.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <sstream>

#include "hwnas/codesign.hpp"
#include "plot.hpp"

namespace hwnas::cli {

namespace fs = std::filesystem;

namespace {

std::string fmt(double v) {
  std::ostringstream s;
  s << std::setprecision(12) << v;
  return s.str();
}

const nn::SupernetSpec& spec_of(const std::string& dataset) { return nn::supernet(nn::parse_dataset(dataset)); }

std::size_t layers_of(const nn::SupernetSpec& s) { return static_cast<std::size_t>(s.num_choice_blocks()); }

nn::Dataset dataset_for_width(int nn_width) {
  for (auto d : {nn::Dataset::kCifar10, nn::Dataset::kImageNet}) {
    if (nn::supernet(d).num_choice_blocks() * nn::kNumChoices == nn_width) {
      return d;
    }
  }
  throw ValidationError("checkpoint encodes " + std::to_string(nn_width) + " architecture inputs; no supernet matches");
}

void require_positive(int v, const char* name) {
  if (v < 1) {
    throw RangeError(std::string(name) + " must be >= 1");
  }
}

sur::PerfPredictor load_predictor(Run& run, const std::string& file) {
  return sur::PerfPredictor::from_json(run.input("predictor", file));
}

sur::ValidNet load_validnet(Run& run, const std::string& file) {
  return sur::ValidNet::from_json(run.input("validnet", file));
}

rl::HwOptAgent load_agent(Run& run, const std::string& file) {
  return rl::HwOptAgent::from_json(run.input("agent", file));
}

std::string log_csv(const std::vector<sur::EpochLog>& log) {
  std::ostringstream s;
  s << "epoch,train_loss,test_loss\n" << std::setprecision(17);
  for (const auto& e : log) {
    s << e.epoch << ',' << e.train_loss << ',' << e.test_loss << '\n';
  }
  return s.str();
}

std::string results_csv(const std::vector<cd::CodesignResult>& rows) {
  std::ostringstream s;
  cd::write_results_csv(s, rows);
  return s.str();
}

std::vector<std::uint64_t> seeds_of(const Globals& g, const CodesignOpts& o) {
  return o.seeds.empty() ? std::vector<std::uint64_t>{g.seed} : o.seeds;
}

cd::CodesignConfig codesign_config(const CodesignOpts& o, nn::Dataset d, std::uint64_t seed) {
  cd::CodesignConfig c;
  c.dataset = d;
  c.lambda = o.lambda;
  c.iterations = o.iterations;
  c.lr = o.lr;
  c.seed = seed;
  c.h0 = accel::HwConfig::parse(o.h0);
  c.validate();
  return c;
}

void record_codesign(Run& run, const CodesignOpts& o, const std::vector<std::uint64_t>& seeds) {
  run.params()["lambda"] = o.lambda;
  run.params()["iterations"] = o.iterations;
  run.params()["lr"] = o.lr;
  run.params()["kappa"] = o.kappa;
  run.params()["h0"] = o.h0;
  run.params()["seeds"] = seeds;
}

void print_rows(const std::vector<cd::CodesignResult>& rows) {
  std::cout << cd::results_csv_header() << '\n';
  for (const auto& r : rows) {
    std::cout << cd::to_csv_row(r) << '\n';
  }
}

// Splits one CSV line, honouring double quotes.
std::vector<std::string> split_quoted(const std::string& line) {
  std::vector<std::string> out(1);
  bool quoted = false;
  for (char c : line) {
    if (c == '"') {
      quoted = !quoted;
    } else if (c == ',' && !quoted) {
      out.emplace_back();
    } else {
      out.back() += c;
    }
  }
  return out;
}

double to_double(const std::string& s, const std::string& where) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used == s.size()) {
      return v;
    }
  } catch (const std::exception&) {
  }
  throw ValidationError(where + ": not a number: '" + s + "'");
}

}  // namespace

void space_stats(const Globals& g) {
  Run run(g, "space-stats");
  const auto all = accel::enumerate_space();
  std::size_t valid = 0, isa = 0, sram = 0;
  for (const auto& h : all) {
    switch (accel::is_valid(h).reason) {
      case accel::Validity::kValid: ++valid; break;
      case accel::Validity::kIsaWidth: ++isa; break;
      case accel::Validity::kSramBudget: ++sram; break;
    }
  }
  const double frac = static_cast<double>(valid) / static_cast<double>(all.size());
  std::ostringstream csv;
  csv << "total,valid,valid_fraction,invalid_isa_width,invalid_sram_budget\n"
      << all.size() << ',' << valid << ',' << fmt(frac) << ',' << isa << ',' << sram << '\n';
  run.write("results.csv", csv.str());
  std::cout << "total " << all.size() << "\nvalid " << valid << "\nvalid_fraction " << fmt(frac) << '\n';
  run.finish();
}

void simulate(const Globals& g, const SimulateOpts& o) {
  Run run(g, "simulate");
  const auto& s = spec_of(o.dataset);
  const auto arch = nn::Architecture::parse(o.arch);
  if (arch.size() != layers_of(s)) {
    throw ValidationError("architecture has " + std::to_string(arch.size()) + " blocks; " + o.dataset +
                          " supernet has " + std::to_string(layers_of(s)));
  }
  const auto hw = accel::HwConfig::parse(o.hw);
  const auto v = accel::is_valid(hw);
  if (!v.valid) {
    throw ValidationError("configuration " + hw.to_string() + " is invalid (" + std::string(accel::to_string(v.reason)) +
                          ")");
  }
  run.params() = {{"arch", arch.to_string()}, {"hw", hw.to_string()}, {"dataset", o.dataset}};
  const auto text = accel::perf_csv_header() + "\n" + accel::to_csv_row(accel::simulate(nn::workloads_of(arch, s), hw)) + "\n";
  run.write("results.csv", text);
  std::cout << text;
  run.finish();
}

void gen_data(const Globals& g, const GenDataOpts& o) {
  require_positive(o.samples, "samples");
  require_positive(o.validity_samples, "validity-samples");
  Run run(g, "gen-data");
  run.params() = {{"dataset", o.dataset}, {"samples", o.samples}, {"validity_samples", o.validity_samples}};
  const auto& s = spec_of(o.dataset);
  const CostTable table(s, g.jobs);
  const auto data = sur::gen_dataset(static_cast<std::size_t>(o.samples), g.seed, s, &table, g.jobs);
  std::ostringstream d;
  data.write_csv(d);
  run.write("dataset.csv", d.str());
  const auto val = sur::gen_validity_dataset(static_cast<std::size_t>(o.validity_samples), g.seed);
  std::ostringstream v;
  sur::write_validity_csv(v, val);
  run.write("validity.csv", v.str());
  const auto n_valid = std::count_if(val.begin(), val.end(), [](const auto& r) { return r.valid; });
  std::ostringstream csv;
  csv << "file,rows,valid_fraction\n"
      << "dataset.csv," << data.size() << ",1\n"
      << "validity.csv," << val.size() << ',' << fmt(static_cast<double>(n_valid) / static_cast<double>(val.size()))
      << '\n';
  run.write("results.csv", csv.str());
  std::cout << csv.str();
  run.finish();
}

void train_pred(const Globals& g, const TrainPredOpts& o) {
  Run run(g, "train-pred");
  sur::PredictorTrainConfig cfg;
  cfg.metric = accel::parse_metric(o.metric);
  if (o.transform != "identity" && o.transform != "log") {
    throw ValidationError("unknown transform '" + o.transform + "' (identity|log)");
  }
  cfg.transform = o.transform == "log" ? sur::TargetTransform::kLog : sur::TargetTransform::kIdentity;
  cfg.epochs = o.epochs;
  cfg.lr = o.lr;
  cfg.batch_size = o.batch_size;
  cfg.seed = g.seed;
  require_positive(o.batch_size, "batch-size");

  sur::PerfDataset data;
  if (!o.data.empty()) {
    std::istringstream in(read_file(o.data, "dataset"));
    data = sur::PerfDataset::read_csv(in);
  } else {
    require_positive(o.samples, "samples");
    const auto& s = spec_of(o.dataset);
    const CostTable table(s, g.jobs);
    data = sur::gen_dataset(static_cast<std::size_t>(o.samples), g.seed, s, &table, g.jobs);
  }
  run.params() = {{"data", o.data},         {"dataset", std::string(nn::to_string(data.supernet))},
                  {"samples", data.size()}, {"metric", o.metric},
                  {"transform", o.transform}, {"epochs", o.epochs},
                  {"lr", o.lr},             {"batch_size", o.batch_size},
                  {"hidden", cfg.hidden},   {"decay_epochs", cfg.decay_epochs},
                  {"test_fraction", cfg.test_fraction}};
  const auto res = sur::train_predictor(data, cfg);
  run.checkpoint("predictor.json", res.predictor.to_json());
  run.write("train_log.csv", log_csv(res.log));
  const auto csv = "metric,samples,test_kendall_tau\n" + o.metric + "," + std::to_string(data.size()) + "," +
                   fmt(res.test_tau) + "\n";
  run.write("results.csv", csv);
  std::cout << csv;
  run.finish();
}

void train_validnet(const Globals& g, const TrainValidOpts& o) {
  Run run(g, "train-validnet");
  std::vector<sur::ValidityRecord> data;
  if (!o.data.empty()) {
    std::istringstream in(read_file(o.data, "validity dataset"));
    data = sur::read_validity_csv(in);
  } else {
    require_positive(o.samples, "samples");
    data = sur::gen_validity_dataset(static_cast<std::size_t>(o.samples), g.seed);
  }
  require_positive(o.batch_size, "batch-size");
  sur::ValidNetTrainConfig cfg;
  cfg.epochs = o.epochs;
  cfg.lr = o.lr;
  cfg.batch_size = o.batch_size;
  cfg.seed = g.seed;
  run.params() = {{"data", o.data},     {"samples", data.size()},         {"epochs", o.epochs},
                  {"lr", o.lr},         {"batch_size", o.batch_size},     {"hidden", cfg.hidden},
                  {"class_weights", cfg.class_weights}, {"test_fraction", cfg.test_fraction}};
  const auto res = sur::train_validnet(data, cfg);
  run.checkpoint("validnet.json", res.net.to_json());
  run.write("train_log.csv", log_csv(res.log));
  const auto csv = "samples,test_accuracy\n" + std::to_string(data.size()) + "," + fmt(res.test_accuracy) + "\n";
  run.write("results.csv", csv);
  std::cout << csv;
  run.finish();
}

void train_rl(const Globals& g, const TrainRlOpts& o) {
  Run run(g, "train-rl");
  const auto setting = rl::parse_setting(o.setting);
  const auto algo = rl::parse_algo(o.algo);
  if (algo == rl::Algo::kDqn && setting == rl::Setting::kComposite) {
    throw UnsupportedSetting("DQN cannot drive the composite setting (its action space is a product of 7 heads)");
  }
  if (o.steps < 1) {
    throw RangeError("steps must be >= 1");
  }
  require_positive(o.val_archs, "val-archs");
  const auto predictor = load_predictor(run, o.predictor);
  const auto& spec = nn::supernet(dataset_for_width(predictor.nn_width()));
  const CostTable table(spec, g.jobs);
  const rl::SimulatorEvaluator eval(table, predictor.metric());
  rl::Validation val{&eval, rl::sample_architectures(static_cast<std::size_t>(o.val_archs), layers_of(spec), g.seed + 1),
                     o.val_every};

  auto env = rl::tuned_env(setting, predictor.metric());
  double lr = algo == rl::Algo::kPpo ? rl::tuned_ppo().lr : rl::tuned_dqn().lr;
  double gamma = algo == rl::Algo::kPpo ? rl::tuned_ppo().gamma : rl::tuned_dqn().gamma;
  int rollout = algo == rl::Algo::kPpo ? rl::tuned_ppo().steps_per_update : rl::tuned_dqn().target_sync;

  if (o.hpo) {
    rl::HpoConfig h{setting, algo, o.budget, o.steps_per_trial, g.seed, predictor.metric()};
    std::ostringstream trials;
    trials << "trial,c_inv,b,t_max,lr,gamma,steps_per_update,objective\n";
    const auto res = rl::hpo_random_search(h, predictor, val, [&](const rl::HpoTrial& t) {
      trials << t.index << ',' << fmt(t.env.c_inv) << ',' << fmt(t.env.b) << ',' << t.env.t_max << ',' << fmt(t.lr)
             << ',' << fmt(t.gamma) << ',' << t.steps_per_update << ',' << fmt(t.objective) << '\n';
      std::cerr << "trial " << t.index << " objective " << fmt(t.objective) << '\n';
    });
    run.write("hpo_trials.csv", trials.str());
    env = res.best.env;
    lr = res.best.lr;
    gamma = res.best.gamma;
    rollout = res.best.steps_per_update;
    run.params()["hpo"] = {{"budget", o.budget}, {"steps_per_trial", o.steps_per_trial}, {"best", res.best.to_json()}};
  }
  if (o.c_inv) env.c_inv = *o.c_inv;
  if (o.b) env.b = *o.b;
  if (o.t_max) env.t_max = *o.t_max;
  if (o.lr) lr = *o.lr;
  if (o.gamma) gamma = *o.gamma;
  env.validate();

  rl::TrainResult res;
  if (algo == rl::Algo::kPpo) {
    auto c = rl::tuned_ppo();
    c.total_steps = o.steps;
    c.lr = lr;
    c.gamma = gamma;
    c.steps_per_update = rollout;
    c.seed = g.seed;
    run.params()["ppo"] = {{"total_steps", c.total_steps}, {"steps_per_update", c.steps_per_update},
                           {"epochs", c.epochs},           {"minibatch", c.minibatch},
                           {"lr", c.lr},                   {"gamma", c.gamma},
                           {"gae_lambda", c.gae_lambda},   {"clip", c.clip},
                           {"ent_coef", c.ent_coef},       {"vf_coef", c.vf_coef},
                           {"max_grad_norm", c.max_grad_norm}, {"hidden", c.hidden}};
    res = rl::ppo_train(setting, env, c, predictor, val);
  } else {
    auto c = rl::tuned_dqn();
    c.total_steps = o.steps;
    c.lr = lr;
    c.gamma = gamma;
    c.target_sync = rollout;
    c.seed = g.seed;
    run.params()["dqn"] = {{"total_steps", c.total_steps}, {"buffer_size", c.buffer_size},
                           {"batch_size", c.batch_size},   {"lr", c.lr},
                           {"gamma", c.gamma},             {"eps_start", c.eps_start},
                           {"eps_end", c.eps_end},         {"eps_fraction", c.eps_fraction},
                           {"target_sync", c.target_sync}, {"learning_starts", c.learning_starts},
                           {"hidden", c.hidden}};
    res = rl::dqn_train(setting, env, c, predictor, val);
  }
  run.params()["setting"] = o.setting;
  run.params()["algo"] = o.algo;
  run.params()["env"] = env.to_json();
  run.params()["val_archs"] = o.val_archs;
  run.checkpoint("agent.json", res.agent.to_json());
  std::ostringstream log;
  rl::write_train_log(log, res.log);
  run.write("train_log.csv", log.str());
  const auto r = rl::optimality(res.agent, val.archs, eval);
  const auto csv = "setting,algo,steps,val_optimality,val_invalid\n" + o.setting + "," + o.algo + "," +
                   std::to_string(o.steps) + "," + fmt(r.percent) + "," + std::to_string(r.invalid) + "\n";
  run.write("results.csv", csv);
  std::cout << csv;
  run.finish();
}

void eval_rl(const Globals& g, const EvalRlOpts& o) {
  require_positive(o.archs, "archs");
  Run run(g, "eval-rl");
  const auto agent = load_agent(run, o.agent);
  const auto& spec = nn::supernet(dataset_for_width(agent.nn_width()));
  const CostTable table(spec, g.jobs);
  const rl::SimulatorEvaluator eval(table, agent.env_config().metric);
  const auto archs = rl::sample_architectures(static_cast<std::size_t>(o.archs), layers_of(spec), o.arch_seed);
  const auto r = rl::optimality(agent, archs, eval);
  run.params() = {{"archs", o.archs}, {"arch_seed", o.arch_seed}, {"setting", rl::to_string(agent.setting())}};

  std::ostringstream rows;
  rows << "arch,hw,valid,ratio\n";
  for (std::size_t i = 0; i < archs.size(); ++i) {
    const auto h = agent.rollout(nn::encode_onehot(archs[i]));
    rows << archs[i].to_string() << ",\"" << h.to_string() << "\"," << (accel::is_valid(h).valid ? 1 : 0) << ','
         << fmt(r.ratios[i]) << '\n';
  }
  run.write("results.csv", rows.str());
  const auto summary = "setting,metric,archs,optimality,invalid\n" + std::string(rl::to_string(agent.setting())) + "," +
                       std::string(accel::to_string(agent.env_config().metric)) + "," + std::to_string(o.archs) + "," +
                       fmt(r.percent) + "," + std::to_string(r.invalid) + "\n";
  run.write("summary.csv", summary);
  std::cout << summary;
  run.finish();
}

void codesign(const Globals& g, const CodesignOpts& o) {
  Run run(g, "codesign");
  const auto predictor = load_predictor(run, o.predictor);
  const auto agent = load_agent(run, o.agent);
  const auto d = dataset_for_width(predictor.nn_width());
  const auto seeds = seeds_of(g, o);
  record_codesign(run, o, seeds);
  const auto per_seed = parallel_map<std::vector<cd::CodesignResult>>(seeds.size(), g.jobs, [&](std::size_t i) {
    const auto cfg = codesign_config(o, d, seeds[i]);
    const cd::TaskOracle oracle(layers_of(nn::supernet(d)), seeds[i], o.kappa);
    return std::vector<cd::CodesignResult>{cd::rl_codesign_run(cfg, agent, predictor, oracle),
                                           cd::sequential_opt_run(cfg, agent, predictor, oracle),
                                           cd::hwaware_nas_run(cfg, predictor, oracle)};
  });
  std::vector<cd::CodesignResult> rows;
  for (const auto& v : per_seed) {
    rows.insert(rows.end(), v.begin(), v.end());
  }
  run.write("results.csv", results_csv(rows));
  print_rows(rows);
  run.finish();
}

void baseline_hwnas(const Globals& g, const CodesignOpts& o) {
  Run run(g, "baseline hwnas");
  const auto predictor = load_predictor(run, o.predictor);
  const auto d = dataset_for_width(predictor.nn_width());
  const auto seeds = seeds_of(g, o);
  record_codesign(run, o, seeds);
  const auto rows = parallel_map<cd::CodesignResult>(seeds.size(), g.jobs, [&](std::size_t i) {
    const cd::TaskOracle oracle(layers_of(nn::supernet(d)), seeds[i], o.kappa);
    return cd::hwaware_nas_run(codesign_config(o, d, seeds[i]), predictor, oracle);
  });
  run.write("results.csv", results_csv(rows));
  print_rows(rows);
  run.finish();
}

void baseline_seq(const Globals& g, const CodesignOpts& o) {
  Run run(g, "baseline seq");
  const auto predictor = load_predictor(run, o.predictor);
  const auto agent = load_agent(run, o.agent);
  const auto d = dataset_for_width(predictor.nn_width());
  const auto seeds = seeds_of(g, o);
  record_codesign(run, o, seeds);
  const auto rows = parallel_map<cd::CodesignResult>(seeds.size(), g.jobs, [&](std::size_t i) {
    const cd::TaskOracle oracle(layers_of(nn::supernet(d)), seeds[i], o.kappa);
    return cd::sequential_opt_run(codesign_config(o, d, seeds[i]), agent, predictor, oracle);
  });
  run.write("results.csv", results_csv(rows));
  print_rows(rows);
  run.finish();
}

void baseline_dshwnas(const Globals& g, const CodesignOpts& o) {
  Run run(g, "baseline dshwnas");
  const auto predictor = load_predictor(run, o.predictor);
  const auto validnet = load_validnet(run, o.validnet);
  const auto d = dataset_for_width(predictor.nn_width());
  const auto seeds = seeds_of(g, o);
  const auto betas = o.betas.empty() ? cd::beta_sweep() : o.betas;
  record_codesign(run, o, seeds);
  run.params()["betas"] = betas;
  const auto rows = parallel_map<cd::CodesignResult>(betas.size() * seeds.size(), g.jobs, [&](std::size_t i) {
    const auto seed = seeds[i % seeds.size()];
    const cd::TaskOracle oracle(layers_of(nn::supernet(d)), seed, o.kappa);
    return cd::dshwnas_run(codesign_config(o, d, seed), betas[i / seeds.size()], predictor, validnet, oracle);
  });
  run.write("results.csv", results_csv(rows));
  print_rows(rows);
  const auto valid = std::count_if(rows.begin(), rows.end(), [](const auto& r) { return r.valid; });
  std::cout << "valid designs: " << valid << " of " << rows.size() << '\n';
  run.finish();
}

namespace {

cd::HwGenConfig hwgen_config(const Globals& g, const HwGenOpts& o, accel::Metric metric) {
  require_positive(o.test_archs, "test-archs");
  cd::HwGenConfig c;
  c.train_archs = o.train_archs;
  c.epochs = o.epochs;
  c.batch_size = o.batch_size;
  c.lr = o.lr;
  c.metric = metric;
  c.seed = g.seed;
  return c;
}

std::string hwgen_row(const std::string& method, const std::string& lambda, const cd::HwGenEval& e) {
  return method + "," + lambda + "," + fmt(e.optimality) + "," + fmt(e.invalid_fraction) + "\n";
}

constexpr const char* kHwGenHeader = "method,lambda,optimality,invalid_fraction\n";

}  // namespace

void baseline_exhaustive_hwgen(const Globals& g, const HwGenOpts& o) {
  Run run(g, "baseline exhaustive-hwgen");
  const auto cfg = hwgen_config(g, o, accel::parse_metric(o.metric));
  run.params() = cfg.to_json();
  run.params()["test_archs"] = o.test_archs;
  run.params()["arch_seed"] = o.arch_seed;
  const auto& spec = nn::supernet(nn::Dataset::kCifar10);
  const CostTable table(spec, g.jobs);
  const auto gen = cd::exhaustive_hwgen_train(cfg, table);
  run.checkpoint("hwgen.json", gen.to_json());
  const rl::SimulatorEvaluator eval(table, cfg.metric);
  const auto test = rl::sample_architectures(static_cast<std::size_t>(o.test_archs), table.layers(), o.arch_seed);
  const auto csv = kHwGenHeader + hwgen_row("exhaustive-hwgen", "", cd::evaluate_hwgen(gen, test, eval));
  run.write("results.csv", csv);
  std::cout << csv;
  run.finish();
}

void baseline_perf_hwgen(const Globals& g, const HwGenOpts& o) {
  Run run(g, "baseline perf-hwgen");
  const auto predictor = load_predictor(run, o.predictor);
  const auto validnet = load_validnet(run, o.validnet);
  const auto cfg = hwgen_config(g, o, predictor.metric());
  const auto lambdas = o.lambdas.empty() ? cd::perf_hwgen_lambdas() : o.lambdas;
  run.params() = cfg.to_json();
  run.params()["lambdas"] = lambdas;
  run.params()["test_archs"] = o.test_archs;
  run.params()["arch_seed"] = o.arch_seed;
  const auto& spec = nn::supernet(dataset_for_width(predictor.nn_width()));
  const CostTable table(spec, g.jobs);
  const rl::SimulatorEvaluator eval(table, cfg.metric);
  const auto test = rl::sample_architectures(static_cast<std::size_t>(o.test_archs), table.layers(), o.arch_seed);
  const auto gens = parallel_map<cd::HwGenNet>(lambdas.size(), g.jobs, [&](std::size_t i) {
    return cd::perf_hwgen_train(cfg, lambdas[i], predictor, validnet);
  });
  std::string csv = kHwGenHeader;
  for (std::size_t i = 0; i < lambdas.size(); ++i) {
    run.checkpoint("hwgen_" + std::to_string(i) + ".json", gens[i].to_json());
    csv += hwgen_row("perf-hwgen", fmt(lambdas[i]), cd::evaluate_hwgen(gens[i], test, eval));
  }
  run.write("results.csv", csv);
  std::cout << csv;
  run.finish();
}

void study_grad_interp(const Globals& g, const StudyOpts& o) {
  require_positive(o.triples, "triples");
  require_positive(o.steps, "steps");
  Run run(g, "study grad-interp");
  auto net = load_validnet(run, o.validnet);
  run.params() = {{"triples", o.triples}, {"steps", o.steps}};
  const auto st = sur::gradient_interpolation_study(net, o.triples, o.steps, g.seed);
  std::ostringstream hm;
  sur::write_matrix_csv(hm, st.mean_heatmap, "hw_");
  run.write("heatmap.csv", hm.str());
  std::vector<std::vector<double>> cells(static_cast<std::size_t>(st.mean_heatmap.rows()));
  for (Eigen::Index r = 0; r < st.mean_heatmap.rows(); ++r) {
    for (Eigen::Index c = 0; c < st.mean_heatmap.cols(); ++c) {
      cells[static_cast<std::size_t>(r)].push_back(st.mean_heatmap(r, c));
    }
  }
  run.write("heatmap.svg", heatmap_svg(cells, "ValidNet gradient magnitude", "hardware input", "phi (valid to invalid)"));
  const auto csv = "triples,steps,near_valid,near_invalid,contrast\n" + std::to_string(o.triples) + "," +
                   std::to_string(o.steps) + "," + fmt(st.near_valid) + "," + fmt(st.near_invalid) + "," +
                   fmt(st.contrast()) + "\n";
  run.write("results.csv", csv);
  std::cout << csv;
  run.finish();
}

void study_pred_interp(const Globals& g, const StudyOpts& o) {
  require_positive(o.distributions, "distributions");
  require_positive(o.samples, "samples");
  Run run(g, "study pred-interp");
  const auto p = load_predictor(run, o.predictor);
  run.params() = {{"distributions", o.distributions}, {"samples", o.samples}};
  const auto layers = static_cast<std::size_t>(p.nn_width() / nn::kNumChoices);
  const auto st = sur::interpolation_study(p, layers, o.distributions, o.samples, g.seed);
  std::ostringstream rows;
  rows << "distribution,ratio\n";
  for (std::size_t i = 0; i < st.ratios.size(); ++i) {
    rows << i << ',' << fmt(st.ratios[i]) << '\n';
  }
  run.write("results.csv", rows.str());
  const auto summary = "distributions,samples,mean,variance\n" + std::to_string(o.distributions) + "," +
                       std::to_string(o.samples) + "," + fmt(st.mean) + "," + fmt(st.variance) + "\n";
  run.write("summary.csv", summary);
  std::cout << summary;
  run.finish();
}

void report(const Globals& g, const ReportOpts& o) {
  if (o.runs.empty()) {
    throw ValidationError("report needs at least one run directory");
  }
  struct Row {
    std::string run, method, seed, lambda, beta, latency, task_loss, valid;
  };
  std::vector<Row> rows;
  std::vector<std::pair<std::string, std::vector<std::vector<double>>>> heatmaps;
  for (const auto& dir : o.runs) {
    if (!fs::is_directory(dir)) {
      throw ValidationError("run directory " + dir + " does not exist");
    }
    const auto results = fs::path(dir) / "results.csv";
    if (fs::exists(results)) {
      std::istringstream in(read_file(results, "results file"));
      std::string line;
      std::getline(in, line);
      if (line == cd::results_csv_header()) {
        int n = 1;
        while (std::getline(in, line)) {
          ++n;
          if (line.empty()) continue;
          const auto c = split_quoted(line);
          if (c.size() != 10) {
            throw ValidationError(results.string() + ":" + std::to_string(n) + ": expected 10 columns");
          }
          to_double(c[6], results.string());
          to_double(c[8], results.string());
          rows.push_back({dir, c[0], c[1], c[2], c[3], c[6], c[8], c[9]});
        }
      }
    }
    const auto hm = fs::path(dir) / "heatmap.csv";
    if (fs::exists(hm)) {
      std::istringstream in(read_file(hm, "heatmap"));
      std::string line;
      std::getline(in, line);
      std::vector<std::vector<double>> cells;
      while (std::getline(in, line)) {
        if (line.empty()) continue;
        cells.emplace_back();
        for (const auto& cell : split_quoted(line)) {
          cells.back().push_back(to_double(cell, hm.string()));
        }
      }
      heatmaps.emplace_back(dir, std::move(cells));
    }
  }
  if (rows.empty() && heatmaps.empty()) {
    throw ValidationError("no co-design results or gradient heatmaps found in the given run directories");
  }

  Run run(g, "report");
  run.params() = {{"runs", o.runs}};
  std::ostringstream csv;
  csv << "run,method,seed,lambda,beta,latency_s,task_loss,valid\n";
  std::vector<Point> pts;
  for (const auto& r : rows) {
    csv << r.run << ',' << r.method << ',' << r.seed << ',' << r.lambda << ',' << r.beta << ',' << r.latency << ','
        << r.task_loss << ',' << r.valid << '\n';
    if (r.valid == "1") {
      pts.push_back({r.method, to_double(r.task_loss, "task_loss"), 1e3 * to_double(r.latency, "latency")});
    }
  }
  run.write("results.csv", csv.str());
  if (!rows.empty()) {
    run.write("scatter.svg", scatter_svg(pts, "Latency vs task loss", "task loss", "latency (ms)"));
  }

  // Per-seed ordering of the three co-design methods (first row per method wins).
  std::map<std::string, std::map<std::string, double>> by_seed;
  for (const auto& r : rows) {
    if (r.valid == "1") {
      by_seed[r.seed].emplace(r.method, to_double(r.latency, "latency"));
    }
  }
  std::ostringstream ord;
  ord << "seed,rl-codesign,sequential,hwnas,ordering_holds\n";
  int complete = 0, holds = 0;
  for (const auto& [seed, m] : by_seed) {
    if (!m.count("rl-codesign") || !m.count("sequential") || !m.count("hwnas")) continue;
    const double a = m.at("rl-codesign"), b = m.at("sequential"), c = m.at("hwnas");
    const bool ok = a <= b && b <= c;
    ++complete;
    holds += ok;
    ord << seed << ',' << fmt(a) << ',' << fmt(b) << ',' << fmt(c) << ',' << (ok ? 1 : 0) << '\n';
  }
  if (complete > 0) {
    run.write("ordering.csv", ord.str());
    std::cout << "latency_s per seed (rl-codesign <= sequential <= hwnas):\n" << ord.str();
    std::cout << "ordering holds on " << holds << " of " << complete << " seeds\n";
  }
  for (std::size_t i = 0; i < heatmaps.size(); ++i) {
    const auto name = i == 0 ? std::string("heatmap.svg") : "heatmap_" + std::to_string(i + 1) + ".svg";
    run.write(name, heatmap_svg(heatmaps[i].second, "ValidNet gradient magnitude (" + heatmaps[i].first + ")",
                                "hardware input", "phi (valid to invalid)"));
    std::cout << name << ": " << heatmaps[i].second.size() << " x "
              << (heatmaps[i].second.empty() ? 0 : heatmaps[i].second.front().size()) << '\n';
  }
  std::cout << rows.size() << " result rows, " << pts.size() << " plotted\n";
  run.finish();
}

}  // namespace hwnas::cli
