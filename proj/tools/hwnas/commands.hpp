#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "run.hpp"

namespace hwnas::cli {

struct SimulateOpts {
  std::string arch;
  std::string hw = "default";
  std::string dataset = "cifar10";
};

struct GenDataOpts {
  std::string dataset = "cifar10";
  int samples = 20000;
  int validity_samples = 10240;
};

struct TrainPredOpts {
  std::string data;  // empty: generate `samples` records from --seed
  std::string dataset = "cifar10";
  int samples = 20000;
  std::string metric = "cycles";
  std::string transform = "identity";
  int epochs = 80;
  double lr = 1e-3;
  int batch_size = 128;
};

struct TrainValidOpts {
  std::string data;
  int samples = 10240;
  int epochs = 150;
  double lr = 1e-3;
  int batch_size = 128;
};

struct TrainRlOpts {
  std::string predictor;
  std::string setting = "composite";
  std::string algo = "ppo";
  std::int64_t steps = 300000;
  int val_archs = 20;
  int val_every = 10;
  std::optional<double> c_inv, b, lr, gamma;
  std::optional<int> t_max;
  bool hpo = false;
  int budget = 40;
  std::int64_t steps_per_trial = 60000;
};

struct EvalRlOpts {
  std::string agent;
  std::string dataset = "cifar10";
  int archs = 50;
  std::uint64_t arch_seed = 4242;
};

struct CodesignOpts {
  std::string predictor, agent, validnet;
  double lambda = 1.0;
  int iterations = 300;
  double lr = 0.05;
  double kappa = 0.5;
  std::string h0 = "default";
  std::vector<std::uint64_t> seeds;  // empty: just --seed
  std::vector<double> betas;         // dshwnas; empty: full sweep
};

struct HwGenOpts {
  std::string predictor, validnet;
  std::string metric = "cycles";
  int train_archs = 1000;
  int epochs = 20;
  int batch_size = 64;
  double lr = 1e-3;
  int test_archs = 50;
  std::uint64_t arch_seed = 4242;
  std::vector<double> lambdas;  // perf-hwgen; empty: full sweep
};

struct StudyOpts {
  std::string predictor, validnet;
  int triples = 20;
  int steps = 40;
  int distributions = 100;
  int samples = 1000;
};

struct ReportOpts {
  std::vector<std::string> runs;
};

void space_stats(const Globals& g);
void simulate(const Globals& g, const SimulateOpts& o);
void gen_data(const Globals& g, const GenDataOpts& o);
void train_pred(const Globals& g, const TrainPredOpts& o);
void train_validnet(const Globals& g, const TrainValidOpts& o);
void train_rl(const Globals& g, const TrainRlOpts& o);
void eval_rl(const Globals& g, const EvalRlOpts& o);
void codesign(const Globals& g, const CodesignOpts& o);
void baseline_hwnas(const Globals& g, const CodesignOpts& o);
void baseline_seq(const Globals& g, const CodesignOpts& o);
void baseline_dshwnas(const Globals& g, const CodesignOpts& o);
void baseline_exhaustive_hwgen(const Globals& g, const HwGenOpts& o);
void baseline_perf_hwgen(const Globals& g, const HwGenOpts& o);
void study_grad_interp(const Globals& g, const StudyOpts& o);
void study_pred_interp(const Globals& g, const StudyOpts& o);
void report(const Globals& g, const ReportOpts& o);

}  // namespace hwnas::cli
