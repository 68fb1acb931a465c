// hwnas: staged pipeline for accelerator/architecture co-design experiments.
//
// Exit codes: 0 success, 2 bad input (flags, config, checkpoints, ranges),
// 3 training failure, 1 anything else.

#include <CLI11.hpp>

#include <iostream>

#include "commands.hpp"
#include "hwnas/error.hpp"

using namespace hwnas::cli;

namespace {

void add_codesign_opts(CLI::App* c, CodesignOpts& o, bool agent, bool validnet) {
  c->add_option("--predictor", o.predictor, "Performance predictor checkpoint")->required();
  if (agent) {
    c->add_option("--agent", o.agent, "HW optimizer agent checkpoint")->required();
  }
  if (validnet) {
    c->add_option("--validnet", o.validnet, "ValidNet checkpoint")->required();
  }
  c->add_option("--lambda", o.lambda, "Weight of the hardware loss")->capture_default_str();
  c->add_option("--iterations", o.iterations, "Adam iterations on the architecture logits")->capture_default_str();
  c->add_option("--lr", o.lr, "Learning rate for the logits")->capture_default_str();
  c->add_option("--kappa", o.kappa, "Task-oracle kernel-quality weight")->capture_default_str();
  c->add_option("--h0", o.h0, "Template configuration, e.g. [4,4,5,5,15,18,17] or 'default'")->capture_default_str();
  c->add_option("--seeds", o.seeds, "Seeds to sweep (default: --seed)")->delimiter(',');
}

void add_hwgen_opts(CLI::App* c, HwGenOpts& o) {
  c->add_option("--train-archs", o.train_archs, "Training architectures")->capture_default_str();
  c->add_option("--epochs", o.epochs)->capture_default_str();
  c->add_option("--batch-size", o.batch_size)->capture_default_str();
  c->add_option("--lr", o.lr)->capture_default_str();
  c->add_option("--test-archs", o.test_archs, "Held-out architectures for the optimality score")->capture_default_str();
  c->add_option("--arch-seed", o.arch_seed, "Seed of the held-out architectures")->capture_default_str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Hardware/architecture co-design pipeline"};
  app.require_subcommand(1);
  app.fallthrough();
  app.allow_config_extras(CLI::config_extras_mode::error);

  Globals g;
  for (int i = 0; i < argc; ++i) {
    g.command += (i ? " " : "") + std::string(argv[i]);
  }
  app.add_option("--seed", g.seed, "Random seed")->capture_default_str();
  app.add_option("--out-dir", g.out_dir, "Output directory")->capture_default_str();
  app.add_option("--jobs", g.jobs, "Worker threads for parallel stages")->capture_default_str()->check(CLI::PositiveNumber);
  auto* cfg = app.set_config("--config", "", "INI file; [section] per subcommand, e.g. [train-rl] or [baseline.dshwnas]");

  auto* stats = app.add_subcommand("space-stats", "Enumerate the hardware space and count valid configurations");

  SimulateOpts sim;
  auto* simulate_cmd = app.add_subcommand("simulate", "Simulate one architecture on one configuration");
  simulate_cmd->add_option("--arch", sim.arch, "Architecture string, one of 3/5/7/x per block")->required();
  simulate_cmd->add_option("--hw", sim.hw, "Configuration, e.g. [4,4,5,5,15,18,17] or 'default'")->capture_default_str();
  simulate_cmd->add_option("--dataset", sim.dataset, "cifar10 | imagenet")->capture_default_str();

  GenDataOpts gd;
  auto* gen = app.add_subcommand("gen-data", "Generate simulator-labelled and validity datasets");
  gen->add_option("--dataset", gd.dataset)->capture_default_str();
  gen->add_option("--samples", gd.samples)->capture_default_str();
  gen->add_option("--validity-samples", gd.validity_samples)->capture_default_str();

  TrainPredOpts tp;
  auto* pred = app.add_subcommand("train-pred", "Train the performance predictor");
  pred->add_option("--data", tp.data, "dataset.csv from gen-data (default: generate from --seed)");
  pred->add_option("--dataset", tp.dataset)->capture_default_str();
  pred->add_option("--samples", tp.samples)->capture_default_str();
  pred->add_option("--metric", tp.metric, "cycles | edp")->capture_default_str();
  pred->add_option("--transform", tp.transform, "identity | log")->capture_default_str();
  pred->add_option("--epochs", tp.epochs)->capture_default_str();
  pred->add_option("--lr", tp.lr)->capture_default_str();
  pred->add_option("--batch-size", tp.batch_size)->capture_default_str();

  TrainValidOpts tv;
  auto* vnet = app.add_subcommand("train-validnet", "Train the validity classifier");
  vnet->add_option("--data", tv.data, "validity.csv from gen-data (default: generate from --seed)");
  vnet->add_option("--samples", tv.samples)->capture_default_str();
  vnet->add_option("--epochs", tv.epochs)->capture_default_str();
  vnet->add_option("--lr", tv.lr)->capture_default_str();
  vnet->add_option("--batch-size", tv.batch_size)->capture_default_str();

  TrainRlOpts tr;
  auto* trl = app.add_subcommand("train-rl", "Train the RL hardware optimizer");
  trl->add_option("--predictor", tr.predictor, "Performance predictor checkpoint")->required();
  trl->add_option("--setting", tr.setting, "composite | sequential")->capture_default_str();
  trl->add_option("--algo", tr.algo, "ppo | dqn")->capture_default_str();
  trl->add_option("--steps", tr.steps, "Environment steps")->capture_default_str();
  trl->add_option("--val-archs", tr.val_archs)->capture_default_str();
  trl->add_option("--val-every", tr.val_every, "Validate every N updates (0: never)")->capture_default_str();
  trl->add_option("--c-inv", tr.c_inv, "Invalid-design penalty");
  trl->add_option("--b", tr.b, "Penalty for a worse intermediate step");
  trl->add_option("--t-max", tr.t_max, "Passes per episode");
  trl->add_option("--lr", tr.lr);
  trl->add_option("--gamma", tr.gamma);
  trl->add_flag("--hpo", tr.hpo, "Random-search the environment and optimizer settings first");
  trl->add_option("--budget", tr.budget, "HPO trials")->capture_default_str();
  trl->add_option("--steps-per-trial", tr.steps_per_trial)->capture_default_str();

  EvalRlOpts er;
  auto* erl = app.add_subcommand("eval-rl", "Score an agent against grid search on held-out architectures");
  erl->add_option("--agent", er.agent, "Agent checkpoint")->required();
  erl->add_option("--archs", er.archs)->capture_default_str();
  erl->add_option("--arch-seed", er.arch_seed)->capture_default_str();

  CodesignOpts co;
  auto* cod = app.add_subcommand("codesign", "RL-guided co-design plus the sequential and HW-aware NAS baselines");
  add_codesign_opts(cod, co, true, false);

  auto* base = app.add_subcommand("baseline", "Baselines");
  base->require_subcommand(1);
  CodesignOpts bh, bs, bd;
  auto* b_hwnas = base->add_subcommand("hwnas", "HW-aware NAS on the template configuration");
  add_codesign_opts(b_hwnas, bh, false, false);
  auto* b_seq = base->add_subcommand("seq", "Task-only NAS followed by HW optimization");
  add_codesign_opts(b_seq, bs, true, false);
  auto* b_ds = base->add_subcommand("dshwnas", "Joint differentiable search over architecture and hardware");
  add_codesign_opts(b_ds, bd, false, true);
  b_ds->add_option("--betas", bd.betas, "Validity weights (default 1e-7..1e7)")->delimiter(',');
  HwGenOpts ge, gp;
  auto* b_ex = base->add_subcommand("exhaustive-hwgen", "MLP generator trained on grid-search labels");
  add_hwgen_opts(b_ex, ge);
  b_ex->add_option("--metric", ge.metric, "cycles | edp")->capture_default_str();
  auto* b_pf = base->add_subcommand("perf-hwgen", "MLP generator trained through the predictor and ValidNet");
  add_hwgen_opts(b_pf, gp);
  b_pf->add_option("--predictor", gp.predictor)->required();
  b_pf->add_option("--validnet", gp.validnet)->required();
  b_pf->add_option("--lambdas", gp.lambdas, "Validity weights (default 1e-4..1e2)")->delimiter(',');

  auto* study = app.add_subcommand("study", "Surrogate studies");
  study->require_subcommand(1);
  StudyOpts sg, sp;
  auto* s_grad = study->add_subcommand("grad-interp", "ValidNet gradients along valid-random-invalid paths");
  s_grad->add_option("--validnet", sg.validnet)->required();
  s_grad->add_option("--triples", sg.triples)->capture_default_str();
  s_grad->add_option("--steps", sg.steps)->capture_default_str();
  auto* s_pred = study->add_subcommand("pred-interp", "Predictor on relaxed vs sampled architectures");
  s_pred->add_option("--predictor", sp.predictor)->required();
  s_pred->add_option("--distributions", sp.distributions)->capture_default_str();
  s_pred->add_option("--samples", sp.samples)->capture_default_str();

  ReportOpts rp;
  auto* rep = app.add_subcommand("report", "Summary tables and SVG plots from run directories");
  rep->add_option("runs", rp.runs, "Run directories")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }
  if (cfg->count() > 0) {
    g.config = cfg->results().front();
  }

  try {
    if (*stats) space_stats(g);
    else if (*simulate_cmd) simulate(g, sim);
    else if (*gen) gen_data(g, gd);
    else if (*pred) train_pred(g, tp);
    else if (*vnet) train_validnet(g, tv);
    else if (*trl) train_rl(g, tr);
    else if (*erl) eval_rl(g, er);
    else if (*cod) codesign(g, co);
    else if (*b_hwnas) baseline_hwnas(g, bh);
    else if (*b_seq) baseline_seq(g, bs);
    else if (*b_ds) baseline_dshwnas(g, bd);
    else if (*b_ex) baseline_exhaustive_hwgen(g, ge);
    else if (*b_pf) baseline_perf_hwgen(g, gp);
    else if (*s_grad) study_grad_interp(g, sg);
    else if (*s_pred) study_pred_interp(g, sp);
    else if (*rep) report(g, rp);
  } catch (const hwnas::ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const hwnas::TrainingFailure& e) {
    std::cerr << "training failed: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
