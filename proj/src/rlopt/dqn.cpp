#include <algorithm>
#include <cmath>
#include <random>

#include "hwnas/rlopt.hpp"

namespace hwnas::rl {

using grad::Matrix;

nlohmann::json DqnConfig::to_json() const {
  return {{"total_steps", total_steps}, {"buffer_size", buffer_size},   {"batch_size", batch_size},
          {"lr", lr},                   {"gamma", gamma},               {"eps_start", eps_start},
          {"eps_end", eps_end},         {"eps_fraction", eps_fraction}, {"target_sync", target_sync},
          {"learning_starts", learning_starts}, {"train_every", train_every}, {"hidden", hidden},
          {"seed", seed}};
}

TrainResult dqn_train(Setting setting, const EnvConfig& env_cfg, const DqnConfig& cfg,
                      const sur::PerfPredictor& predictor, const Validation& val) {
  if (setting == Setting::kComposite) {
    throw UnsupportedSetting("DQN supports only the sequential setting: a single Q-head cannot score "
                             "the factored composite action space");
  }
  env_cfg.validate();
  if (cfg.total_steps < 0 || cfg.buffer_size < 1 || cfg.batch_size < 1 || cfg.target_sync < 1 ||
      cfg.train_every < 1) {
    throw RangeError("DQN budget, buffer, batch, target sync and train interval must be positive");
  }
  const int nn_width = predictor.nn_width();
  const auto layers = static_cast<std::size_t>(nn_width / nn::kNumChoices);
  const int obs_w = observation_width(setting, nn_width);

  std::vector<int> widths{obs_w};
  widths.insert(widths.end(), cfg.hidden.begin(), cfg.hidden.end());
  widths.push_back(kSequentialActions);
  grad::Mlp q(widths, cfg.seed);
  grad::Mlp target = q;
  auto params = q.parameters();
  grad::Adam opt(params, grad::AdamConfig{.lr = cfg.lr});

  const auto cap = static_cast<Eigen::Index>(cfg.buffer_size);
  Matrix s_buf(cap, obs_w), s2_buf(cap, obs_w);
  std::vector<int> a_buf(static_cast<std::size_t>(cap));
  std::vector<double> r_buf(static_cast<std::size_t>(cap));
  std::vector<char> d_buf(static_cast<std::size_t>(cap));
  Eigen::Index filled = 0, head = 0;

  std::mt19937_64 rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::uniform_int_distribution<int> random_action(0, kSequentialActions - 1);
  Env env(setting, env_cfg, &predictor, nn_width);
  env.reset(nn::encode_onehot(nn::random_architecture(layers, rng)));

  TrainResult res;
  const std::int64_t log_every = std::max<std::int64_t>(1000, cfg.total_steps / 100);
  double finished_sum = 0.0, ep_return = 0.0;
  int finished = 0;
  std::int64_t evaluations = 0;
  const auto decay_steps = std::max(1.0, cfg.eps_fraction * static_cast<double>(cfg.total_steps));

  for (std::int64_t step = 1; step <= cfg.total_steps; ++step) {
    const double frac = std::min(1.0, static_cast<double>(step - 1) / decay_steps);
    const double eps = cfg.eps_start + frac * (cfg.eps_end - cfg.eps_start);
    const auto o = env.observation();
    const Matrix x = grad::row(o);
    int a = 0;
    if (u(rng) < eps) {
      a = random_action(rng);
    } else {
      Eigen::Index best = 0;
      q.predict(x).row(0).maxCoeff(&best);
      a = static_cast<int>(best);
    }
    const std::array<int, 1> act{a};
    const auto st = env.step(act);
    ep_return += st.reward;

    s_buf.row(head) = x;
    s2_buf.row(head) = grad::row(env.observation());
    a_buf[static_cast<std::size_t>(head)] = a;
    r_buf[static_cast<std::size_t>(head)] = st.reward;
    d_buf[static_cast<std::size_t>(head)] = st.done ? 1 : 0;
    head = (head + 1) % cap;
    filled = std::min(filled + 1, cap);

    if (st.done) {
      finished_sum += ep_return;
      ++finished;
      ep_return = 0.0;
      env.reset(nn::encode_onehot(nn::random_architecture(layers, rng)));
    }

    if (step >= cfg.learning_starts && step % cfg.train_every == 0 && filled >= cfg.batch_size) {
      std::uniform_int_distribution<Eigen::Index> pick(0, filled - 1);
      const auto bs = static_cast<Eigen::Index>(cfg.batch_size);
      Matrix sb(bs, obs_w), s2b(bs, obs_w);
      std::vector<int> ab(static_cast<std::size_t>(bs));
      std::vector<double> tb(static_cast<std::size_t>(bs));
      std::vector<Eigen::Index> idx(static_cast<std::size_t>(bs));
      for (Eigen::Index k = 0; k < bs; ++k) {
        const auto i = pick(rng);
        idx[static_cast<std::size_t>(k)] = i;
        sb.row(k) = s_buf.row(i);
        s2b.row(k) = s2_buf.row(i);
        ab[static_cast<std::size_t>(k)] = a_buf[static_cast<std::size_t>(i)];
      }
      const Matrix next_q = target.predict(s2b);
      for (Eigen::Index k = 0; k < bs; ++k) {
        const auto i = static_cast<std::size_t>(idx[static_cast<std::size_t>(k)]);
        const double boot = d_buf[i] != 0 ? 0.0 : cfg.gamma * next_q.row(k).maxCoeff();
        tb[static_cast<std::size_t>(k)] = r_buf[i] + boot;
      }
      grad::Tape tape;
      opt.zero_grad();
      auto loss = q_huber_loss(tape, q.forward(tape, tape.constant(sb)), ab, tb);
      tape.backward(loss);
      if (!std::isfinite(loss.scalar())) {
        throw TrainingFailure("DQN loss became non-finite at step " + std::to_string(step));
      }
      grad::clip_grad_norm(params, 10.0);
      opt.step();
    }
    if (step % cfg.target_sync == 0) {
      target = q;
    }
    if (step % log_every == 0 || step == cfg.total_steps) {
      TrainLogRow row{step, finished > 0 ? finished_sum / finished : 0.0, -1.0};
      ++evaluations;
      if (val.evaluator != nullptr && !val.archs.empty() &&
          (step == cfg.total_steps || (val.every_updates > 0 && evaluations % val.every_updates == 0))) {
        row.optimality = optimality(HwOptAgent(setting, env_cfg, q, nn_width), val.archs, *val.evaluator).percent;
      }
      res.log.push_back(row);
      finished_sum = 0.0;
      finished = 0;
    }
  }
  if (!grad::all_finite(params)) {
    throw TrainingFailure("DQN parameters became non-finite");
  }
  res.agent = HwOptAgent(setting, env_cfg, std::move(q), nn_width);
  return res;
}

}  // namespace hwnas::rl
