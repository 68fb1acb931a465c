#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "hwnas/rlopt.hpp"

namespace hwnas::rl {

using grad::Matrix;

namespace {

// Log-softmax of one head segment of row r.
void log_softmax(const Matrix& z, Eigen::Index r, int off, int width, std::vector<double>& out) {
  out.resize(static_cast<std::size_t>(width));
  double mx = z(r, off);
  for (int j = 1; j < width; ++j) {
    mx = std::max(mx, z(r, off + j));
  }
  double s = 0.0;
  for (int j = 0; j < width; ++j) {
    s += std::exp(z(r, off + j) - mx);
  }
  const double lse = mx + std::log(s);
  for (int j = 0; j < width; ++j) {
    out[static_cast<std::size_t>(j)] = z(r, off + j) - lse;
  }
}

struct Sampled {
  std::vector<int> action;
  double logp = 0.0;
};

Sampled sample_heads(const Matrix& logits, std::span<const int> heads, std::mt19937_64& rng) {
  Sampled s;
  std::vector<double> ls;
  std::uniform_real_distribution<double> u(0.0, 1.0);
  int off = 0;
  for (int w : heads) {
    log_softmax(logits, 0, off, w, ls);
    double x = u(rng);
    int pick = w - 1;
    for (int j = 0; j < w; ++j) {
      x -= std::exp(ls[static_cast<std::size_t>(j)]);
      if (x < 0.0) {
        pick = j;
        break;
      }
    }
    s.action.push_back(pick);
    s.logp += ls[static_cast<std::size_t>(pick)];
    off += w;
  }
  return s;
}

int total_width(std::span<const int> heads) { return std::accumulate(heads.begin(), heads.end(), 0); }

}  // namespace

grad::Var ppo_policy_loss(grad::Tape& tape, grad::Var logits, std::span<const int> heads,
                          const std::vector<std::vector<int>>& actions, std::span<const double> old_logp,
                          std::span<const double> advantages, double clip, double ent_coef) {
  const Matrix& z = logits.value();
  const auto n = z.rows();
  if (z.cols() != total_width(heads) || actions.size() != static_cast<std::size_t>(n) ||
      old_logp.size() != static_cast<std::size_t>(n) || advantages.size() != static_cast<std::size_t>(n)) {
    throw ValidationError("shape mismatch: ppo_policy_loss inputs");
  }
  Matrix g = Matrix::Zero(n, z.cols());
  double loss = 0.0;
  std::vector<double> ls;
  const double inv_n = 1.0 / static_cast<double>(n);
  for (Eigen::Index r = 0; r < n; ++r) {
    const auto& act = actions[static_cast<std::size_t>(r)];
    double logp = 0.0;
    int off = 0;
    for (std::size_t k = 0; k < heads.size(); ++k) {
      log_softmax(z, r, off, heads[k], ls);
      logp += ls[static_cast<std::size_t>(act[k])];
      off += heads[k];
    }
    const double a = advantages[static_cast<std::size_t>(r)];
    const double ratio = std::exp(logp - old_logp[static_cast<std::size_t>(r)]);
    const double s1 = ratio * a;
    const double s2 = std::clamp(ratio, 1.0 - clip, 1.0 + clip) * a;
    loss -= std::min(s1, s2) * inv_n;
    const double dlogp = s1 <= s2 ? -ratio * a * inv_n : 0.0;

    off = 0;
    for (std::size_t k = 0; k < heads.size(); ++k) {
      log_softmax(z, r, off, heads[k], ls);
      double h = 0.0;
      for (int j = 0; j < heads[k]; ++j) {
        h -= std::exp(ls[static_cast<std::size_t>(j)]) * ls[static_cast<std::size_t>(j)];
      }
      loss -= ent_coef * h * inv_n;
      for (int j = 0; j < heads[k]; ++j) {
        const double lp = ls[static_cast<std::size_t>(j)];
        const double p = std::exp(lp);
        const double onehot = j == act[k] ? 1.0 : 0.0;
        // d(-ent_coef * H) / dz_j = ent_coef * p_j * (log p_j + H)
        g(r, off + j) += dlogp * (onehot - p) + ent_coef * inv_n * p * (lp + h);
      }
      off += heads[k];
    }
  }
  Matrix value(1, 1);
  value(0, 0) = loss;
  return tape.custom(logits, value, [g](const Matrix& up) -> Matrix { return g * up(0, 0); });
}

grad::Var mse_loss(grad::Tape& tape, grad::Var pred, std::span<const double> target) {
  const Matrix& p = pred.value();
  if (p.cols() != 1 || static_cast<std::size_t>(p.rows()) != target.size()) {
    throw ValidationError("shape mismatch: mse_loss");
  }
  const auto n = static_cast<double>(p.rows());
  Matrix g(p.rows(), 1);
  double loss = 0.0;
  for (Eigen::Index r = 0; r < p.rows(); ++r) {
    const double d = p(r, 0) - target[static_cast<std::size_t>(r)];
    loss += 0.5 * d * d / n;
    g(r, 0) = d / n;
  }
  Matrix value(1, 1);
  value(0, 0) = loss;
  return tape.custom(pred, value, [g](const Matrix& up) -> Matrix { return g * up(0, 0); });
}

grad::Var q_huber_loss(grad::Tape& tape, grad::Var q, std::span<const int> actions, std::span<const double> targets) {
  const Matrix& v = q.value();
  if (static_cast<std::size_t>(v.rows()) != actions.size() || actions.size() != targets.size()) {
    throw ValidationError("shape mismatch: q_huber_loss");
  }
  const auto n = static_cast<double>(v.rows());
  Matrix g = Matrix::Zero(v.rows(), v.cols());
  double loss = 0.0;
  for (Eigen::Index r = 0; r < v.rows(); ++r) {
    const int a = actions[static_cast<std::size_t>(r)];
    if (a < 0 || a >= v.cols()) {
      throw RangeError("action index outside the Q-value columns");
    }
    const double d = v(r, a) - targets[static_cast<std::size_t>(r)];
    loss += (std::abs(d) <= 1.0 ? 0.5 * d * d : std::abs(d) - 0.5) / n;
    g(r, a) = std::clamp(d, -1.0, 1.0) / n;
  }
  Matrix value(1, 1);
  value(0, 0) = loss;
  return tape.custom(q, value, [g](const Matrix& up) -> Matrix { return g * up(0, 0); });
}

nlohmann::json PpoConfig::to_json() const {
  return {{"total_steps", total_steps}, {"steps_per_update", steps_per_update},
          {"epochs", epochs},           {"minibatch", minibatch},
          {"lr", lr},                   {"gamma", gamma},
          {"gae_lambda", gae_lambda},   {"clip", clip},
          {"ent_coef", ent_coef},       {"vf_coef", vf_coef},
          {"max_grad_norm", max_grad_norm}, {"hidden", hidden},
          {"normalize_rewards", normalize_rewards}, {"seed", seed}};
}

TrainResult ppo_train(Setting setting, const EnvConfig& env_cfg, const PpoConfig& cfg,
                      const sur::PerfPredictor& predictor, const Validation& val) {
  env_cfg.validate();
  if (cfg.total_steps < 0 || cfg.steps_per_update < 1 || cfg.epochs < 1 || cfg.minibatch < 1) {
    throw RangeError("PPO budget, rollout length, epochs and minibatch must be positive");
  }
  if (!(cfg.clip > 0.0) || cfg.gamma < 0.0 || cfg.gamma > 1.0) {
    throw RangeError("PPO clip must be > 0 and gamma in [0, 1]");
  }
  const int nn_width = predictor.nn_width();
  const auto layers = static_cast<std::size_t>(nn_width / nn::kNumChoices);
  const auto heads = action_heads(setting);
  const int obs_w = observation_width(setting, nn_width);

  std::vector<int> pw{obs_w};
  pw.insert(pw.end(), cfg.hidden.begin(), cfg.hidden.end());
  auto vw = pw;
  pw.push_back(total_width(heads));
  vw.push_back(1);
  grad::Mlp policy(pw, cfg.seed);
  grad::Mlp value(vw, cfg.seed + 1);
  auto params = policy.parameters();
  for (auto* p : value.parameters()) {
    params.push_back(p);
  }
  grad::Adam opt(params, grad::AdamConfig{.lr = cfg.lr});

  std::mt19937_64 rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
  Env env(setting, env_cfg, &predictor, nn_width);
  env.reset(nn::encode_onehot(nn::random_architecture(layers, rng)));
  RewardNormalizer norm;

  TrainResult res;
  const auto n = static_cast<std::size_t>(cfg.steps_per_update);
  Matrix obs(static_cast<Eigen::Index>(n), obs_w);
  std::vector<std::vector<int>> acts(n);
  std::vector<double> logp(n), vals(n), rew(n), adv(n), ret(n);
  std::vector<char> dones(n);
  double ep_return = 0.0;

  auto evaluate = [&](std::int64_t step, double mean_return, bool force) {
    TrainLogRow row{step, mean_return, -1.0};
    const auto updates = static_cast<std::int64_t>(res.log.size()) + 1;
    if (val.evaluator != nullptr && !val.archs.empty() &&
        (force || (val.every_updates > 0 && updates % val.every_updates == 0))) {
      row.optimality = optimality(HwOptAgent(setting, env_cfg, policy, nn_width), val.archs, *val.evaluator).percent;
    }
    res.log.push_back(row);
  };

  std::int64_t step = 0;
  while (step < cfg.total_steps) {
    double finished_sum = 0.0;
    int finished = 0;
    for (std::size_t t = 0; t < n; ++t) {
      const auto o = env.observation();
      for (int c = 0; c < obs_w; ++c) {
        obs(static_cast<Eigen::Index>(t), c) = o[static_cast<std::size_t>(c)];
      }
      const Matrix x = obs.row(static_cast<Eigen::Index>(t));
      auto s = sample_heads(policy.predict(x), heads, rng);
      vals[t] = value.predict(x)(0, 0);
      const auto st = env.step(s.action);
      acts[t] = std::move(s.action);
      logp[t] = s.logp;
      ep_return += st.reward;
      double r = st.reward;
      if (cfg.normalize_rewards) {
        norm.update(r);
        r = norm.normalize(r);
      }
      rew[t] = r;
      dones[t] = st.done ? 1 : 0;
      if (st.done) {
        finished_sum += ep_return;
        ++finished;
        ep_return = 0.0;
        env.reset(nn::encode_onehot(nn::random_architecture(layers, rng)));
      }
    }
    step += static_cast<std::int64_t>(n);

    // GAE, bootstrapping from the next observation when the rollout cuts an episode.
    double next_v = dones[n - 1] != 0 ? 0.0 : value.predict(grad::row(env.observation()))(0, 0);
    double gae = 0.0;
    for (std::size_t k = n; k-- > 0;) {
      const double nonterminal = dones[k] != 0 ? 0.0 : 1.0;
      const double delta = rew[k] + cfg.gamma * next_v * nonterminal - vals[k];
      gae = delta + cfg.gamma * cfg.gae_lambda * nonterminal * gae;
      adv[k] = gae;
      ret[k] = gae + vals[k];
      next_v = vals[k];
    }
    const double mean = std::accumulate(adv.begin(), adv.end(), 0.0) / static_cast<double>(n);
    double var = 0.0;
    for (double a : adv) {
      var += (a - mean) * (a - mean);
    }
    const double sd = std::sqrt(var / static_cast<double>(n)) + 1e-8;
    std::vector<double> nadv(n);
    for (std::size_t k = 0; k < n; ++k) {
      nadv[k] = (adv[k] - mean) / sd;
    }

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    const auto mb = static_cast<std::size_t>(cfg.minibatch);
    for (int e = 0; e < cfg.epochs; ++e) {
      std::shuffle(order.begin(), order.end(), rng);
      for (std::size_t b = 0; b < n; b += mb) {
        const auto len = std::min(mb, n - b);
        Matrix xb(static_cast<Eigen::Index>(len), obs_w);
        std::vector<std::vector<int>> ab(len);
        std::vector<double> lb(len), advb(len), rb(len);
        for (std::size_t k = 0; k < len; ++k) {
          const auto i = order[b + k];
          xb.row(static_cast<Eigen::Index>(k)) = obs.row(static_cast<Eigen::Index>(i));
          ab[k] = acts[i];
          lb[k] = logp[i];
          advb[k] = nadv[i];
          rb[k] = ret[i];
        }
        grad::Tape tape;
        opt.zero_grad();
        auto xv = tape.constant(xb);
        auto pl = ppo_policy_loss(tape, policy.forward(tape, xv), heads, ab, lb, advb, cfg.clip, cfg.ent_coef);
        auto vl = mse_loss(tape, value.forward(tape, xv), rb);
        auto loss = tape.add(pl, tape.scale(vl, cfg.vf_coef));
        tape.backward(loss);
        if (!std::isfinite(loss.scalar())) {
          throw TrainingFailure("PPO loss became non-finite at step " + std::to_string(step) + " (policy " +
                                std::to_string(pl.scalar()) + ", value " + std::to_string(vl.scalar()) + ")");
        }
        grad::clip_grad_norm(params, cfg.max_grad_norm);
        opt.step();
      }
    }
    if (!grad::all_finite(params)) {
      throw TrainingFailure("PPO parameters became non-finite at step " + std::to_string(step));
    }
    evaluate(step, finished > 0 ? finished_sum / finished : 0.0, step >= cfg.total_steps);
  }
  res.agent = HwOptAgent(setting, env_cfg, std::move(policy), nn_width);
  return res;
}

}  // namespace hwnas::rl
