#include "eager/rl/ppo.hpp"

#include <algorithm>
#include <cmath>

#include "eager/nn/kernels.hpp"

namespace eager::rl {

void PPOConfig::validate() const {
  if (n_envs < 1 || batch_steps < 1) throw ConfigError("bad PPO sizes");
  if (batch_steps % n_envs != 0)
    throw ConfigError("batch_steps must divide by n_envs");
  if (steps_per_env() % recurrence != 0)
    throw ConfigError("steps per env must divide by recurrence");
  if (minibatch_steps % recurrence != 0)
    throw ConfigError("minibatch_steps must divide by recurrence");
  if (gamma <= 0 || gamma > 1 || gae_lambda < 0 || gae_lambda > 1)
    throw ConfigError("bad discount parameters");
  if (clip_eps <= 0) throw ConfigError("bad clip epsilon");
}

RolloutCollector::RolloutCollector(Policy& policy, const grid::TaskSpec& task,
                                   const PPOConfig& cfg, ShapingSetup shaping,
                                   uint64_t seed, std::ostream* trace)
    : policy_(policy),
      task_(task),
      cfg_(cfg),
      shaping_(shaping),
      rng_(derive_seed(seed, "rollout")),
      next_env_seed_(derive_seed(seed, "episodes")),
      trace_(trace) {
  cfg_.validate();
  if (shaping_.enabled()) shaping_.config.validate();
  const int b = cfg_.n_envs;
  envs_.resize(b);
  cur_obs_.resize(b);
  instr_ids_.assign(b, std::vector<int>(policy_.config().instr_len));
  instr_w_.assign(b, std::vector<double>(policy_.config().instr_len));
  memory_.assign(static_cast<size_t>(b) * policy_.config().mem_dim, 0.0);
  fresh_.assign(b, 1);
  shapers_.resize(b);
  ep_obs_.resize(b);
  ep_act_.resize(b);
  ep_t_.assign(b, 0);
  ep_ret_ext_.assign(b, 0.0);
  ep_ret_shaped_.assign(b, 0.0);
  ep_bonus_.assign(b, 0.0);
  for (int i = 0; i < b; ++i) reset_env(i);
}

void RolloutCollector::reset_env(int b) {
  auto [instr, obs] = envs_[b].reset(task_, next_env_seed_++);
  cur_obs_[b] = obs;
  policy_.encode_instruction(instr, instr_ids_[b].data(),
                             instr_w_[b].data());
  const int mem = policy_.config().mem_dim;
  std::fill_n(memory_.begin() + static_cast<size_t>(b) * mem, mem, 0.0);
  fresh_[b] = 1;
  ep_obs_[b].assign(1, obs);
  ep_act_[b].clear();
  ep_t_[b] = 0;
  ep_ret_ext_[b] = ep_ret_shaped_[b] = ep_bonus_[b] = 0.0;
  if (shaping_.enabled()) {
    shapers_[b] = std::make_unique<shaping::EpisodeShaper>(shaping_.config,
                                                           shaping_.backend);
    shapers_[b]->init_episode(instr);
  }
}

RolloutBatch RolloutCollector::collect() {
  const int T = cfg_.steps_per_env();
  const int B = cfg_.n_envs;
  const int L = policy_.config().instr_len;
  const int M = policy_.config().mem_dim;
  RolloutBatch batch;
  batch.n_envs = B;
  batch.steps = T;
  batch.instr_len = L;
  batch.mem_dim = M;
  const int64_t n = static_cast<int64_t>(T) * B;
  batch.obs.resize(n * grid::kObsLen);
  batch.instr_ids.resize(n * L);
  batch.instr_w.resize(n * L);
  batch.memory.resize(n * M);
  batch.mask.resize(n);
  batch.actions.resize(n);
  batch.logprob.resize(n);
  batch.value.resize(n);
  batch.reward.resize(n);
  batch.reward_ext.resize(n);
  batch.done.resize(n);

  std::vector<double> ret_ext_done, ret_shaped_done, bonus_done;
  int successes = 0;

  std::vector<uint8_t> obs_buf(static_cast<size_t>(B) * grid::kObsLen);
  std::vector<int> ids_buf(static_cast<size_t>(B) * L);
  std::vector<double> w_buf(static_cast<size_t>(B) * L);

  for (int t = 0; t < T; ++t) {
    for (int b = 0; b < B; ++b) {
      const int64_t i = batch.at(t, b);
      std::copy(cur_obs_[b].data.begin(), cur_obs_[b].data.end(),
                batch.obs.begin() + i * grid::kObsLen);
      std::copy(cur_obs_[b].data.begin(), cur_obs_[b].data.end(),
                obs_buf.begin() + static_cast<size_t>(b) * grid::kObsLen);
      std::copy(instr_ids_[b].begin(), instr_ids_[b].end(),
                batch.instr_ids.begin() + i * L);
      std::copy(instr_ids_[b].begin(), instr_ids_[b].end(),
                ids_buf.begin() + static_cast<size_t>(b) * L);
      std::copy(instr_w_[b].begin(), instr_w_[b].end(),
                batch.instr_w.begin() + i * L);
      std::copy(instr_w_[b].begin(), instr_w_[b].end(),
                w_buf.begin() + static_cast<size_t>(b) * L);
      std::copy_n(memory_.begin() + static_cast<size_t>(b) * M, M,
                  batch.memory.begin() + i * M);
      batch.mask[i] = fresh_[b] ? 0.0 : 1.0;
    }

    nn::Graph g;
    nn::Node* mem_in = g.constant(
        nn::Tensor({B, M}, std::vector<double>(memory_)));
    Policy::Out out = policy_.forward(g, obs_buf.data(), B, ids_buf, w_buf,
                                      mem_in);
    nn::Tensor probs({B, policy_.config().n_actions});
    nn::kernels::softmax_rows(out.logits->v.data(), probs.data(), B,
                              policy_.config().n_actions);

    for (int b = 0; b < B; ++b) {
      const int64_t i = batch.at(t, b);
      // categorical sample
      const double u = rng_.real01();
      double acc = 0.0;
      int a = policy_.config().n_actions - 1;
      for (int c = 0; c < policy_.config().n_actions; ++c) {
        acc += probs.at2(b, c);
        if (u < acc) {
          a = c;
          break;
        }
      }
      batch.actions[i] = a;
      batch.logprob[i] = std::log(std::max(probs.at2(b, a), 1e-300));
      batch.value[i] = out.value->v.at(b);

      grid::Env& env = envs_[b];
      const grid::Action act = static_cast<grid::Action>(a);
      auto res = env.step(act);
      double shaped = res.reward;
      if (shaping_.enabled()) {
        ep_act_[b].push_back(act);
        ++ep_t_[b];
        shaping::EpisodeContext ctx;
        ctx.observations = &ep_obs_[b];
        ctx.actions = &ep_act_[b];
        ctx.goal = &env.goal();
        ctx.events = &env.checker().events();
        ctx.t = ep_t_[b];
        shaped = shapers_[b]->shape_step(res.reward, ctx);
        if (res.done && res.success)
          shaped = shapers_[b]->finish_episode(shaped, ep_t_[b], true);
        ep_obs_[b].push_back(res.obs);
      }
      batch.reward[i] =
          cfg_.normalize_returns ? shaped / task_.reward_scale : shaped;
      batch.reward_ext[i] = res.reward;
      batch.done[i] = res.done ? 1 : 0;
      ep_ret_ext_[b] += res.reward;
      ep_ret_shaped_[b] += shaped;
      if (shaping_.enabled())
        ep_bonus_[b] = shapers_[b]->ledger().total_bonus();

      // thread recurrent state; reset on episode end
      std::copy_n(out.memory->v.data() + static_cast<size_t>(b) * M, M,
                  memory_.begin() + static_cast<size_t>(b) * M);
      fresh_[b] = 0;
      if (res.done) {
        ret_ext_done.push_back(ep_ret_ext_[b]);
        ret_shaped_done.push_back(ep_ret_shaped_[b]);
        bonus_done.push_back(ep_bonus_[b]);
        successes += res.success ? 1 : 0;
        if (trace_ && shaping_.enabled())
          shaping::export_trace(shapers_[b]->ledger(), episode_counter_,
                                *trace_);
        ++episode_counter_;
        reset_env(b);
      } else {
        cur_obs_[b] = res.obs;
      }
    }
  }

  // Bootstrap values for the final states.
  {
    for (int b = 0; b < B; ++b) {
      std::copy(cur_obs_[b].data.begin(), cur_obs_[b].data.end(),
                obs_buf.begin() + static_cast<size_t>(b) * grid::kObsLen);
      std::copy(instr_ids_[b].begin(), instr_ids_[b].end(),
                ids_buf.begin() + static_cast<size_t>(b) * L);
      std::copy(instr_w_[b].begin(), instr_w_[b].end(),
                w_buf.begin() + static_cast<size_t>(b) * L);
    }
    nn::Graph g;
    nn::Node* mem_in =
        g.constant(nn::Tensor({B, M}, std::vector<double>(memory_)));
    Policy::Out out = policy_.forward(g, obs_buf.data(), B, ids_buf, w_buf,
                                      mem_in);
    std::vector<double> bootstrap(B);
    for (int b = 0; b < B; ++b)
      bootstrap[b] = fresh_[b] ? 0.0 : out.value->v.at(b);
    compute_gae(batch, bootstrap, cfg_);
  }

  BatchStats& s = batch.stats;
  s.episodes = static_cast<int>(ret_ext_done.size());
  s.successes = successes;
  if (s.episodes > 0) {
    double sum = 0.0, sum2 = 0.0, sh = 0.0, bn = 0.0;
    for (size_t i = 0; i < ret_ext_done.size(); ++i) {
      sum += ret_ext_done[i];
      sum2 += ret_ext_done[i] * ret_ext_done[i];
      sh += ret_shaped_done[i];
      bn += bonus_done[i];
    }
    s.mean_return_ext = sum / s.episodes;
    s.std_return_ext = std::sqrt(
        std::max(0.0, sum2 / s.episodes - s.mean_return_ext * s.mean_return_ext));
    s.mean_return_shaped = sh / s.episodes;
    s.mean_bonus = bn / s.episodes;
  }
  return batch;
}

void compute_gae(RolloutBatch& batch, const std::vector<double>& bootstrap,
                 const PPOConfig& cfg) {
  const int T = batch.steps, B = batch.n_envs;
  batch.advantage.assign(static_cast<size_t>(T) * B, 0.0);
  batch.ret.assign(static_cast<size_t>(T) * B, 0.0);
  for (int b = 0; b < B; ++b) {
    double gae = 0.0;
    for (int t = T - 1; t >= 0; --t) {
      const int64_t i = batch.at(t, b);
      const double nonterminal = batch.done[i] ? 0.0 : 1.0;
      const double next_value =
          t == T - 1 ? bootstrap[b]
                     : (batch.done[i] ? 0.0 : batch.value[batch.at(t + 1, b)]);
      const double delta = batch.reward[i] +
                           cfg.gamma * next_value * nonterminal -
                           batch.value[i];
      gae = delta + cfg.gamma * cfg.gae_lambda * nonterminal * gae;
      batch.advantage[i] = gae;
      batch.ret[i] = gae + batch.value[i];
    }
  }
}

UpdateStats ppo_update(Policy& policy, nn::Adam& adam, RolloutBatch& batch,
                       const PPOConfig& cfg, Rng& rng) {
  cfg.validate();
  const int T = batch.steps, B = batch.n_envs;
  const int R = cfg.recurrence;
  const int L = batch.instr_len, M = batch.mem_dim;

  if (cfg.normalize_advantages) {
    double mean = 0.0, var = 0.0;
    const int64_t n = static_cast<int64_t>(T) * B;
    for (double a : batch.advantage) mean += a;
    mean /= n;
    for (double a : batch.advantage) var += (a - mean) * (a - mean);
    var /= n;
    const double denom = std::sqrt(var) + 1e-8;
    for (double& a : batch.advantage) a = (a - mean) / denom;
  }

  struct Segment {
    int t0, b;
  };
  std::vector<Segment> segments;
  for (int b = 0; b < B; ++b)
    for (int t0 = 0; t0 < T; t0 += R) segments.push_back({t0, b});
  const int segs_per_minibatch = cfg.minibatch_steps / R;

  UpdateStats stats;
  int n_minibatches = 0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    rng.shuffle(segments);
    for (size_t start = 0; start + segs_per_minibatch <= segments.size();
         start += segs_per_minibatch) {
      const int S = segs_per_minibatch;
      nn::Graph g;
      // initial memory rows for each segment
      nn::Tensor mem0({S, M});
      for (int s = 0; s < S; ++s) {
        const auto& seg = segments[start + s];
        std::copy_n(
            batch.memory.begin() + batch.at(seg.t0, seg.b) * M, M,
            mem0.data() + static_cast<size_t>(s) * M);
      }
      nn::Node* h = g.constant(std::move(mem0));
      std::vector<nn::Node*> policy_terms, value_terms, entropy_terms;
      for (int i = 0; i < R; ++i) {
        std::vector<uint8_t> obs(static_cast<size_t>(S) * grid::kObsLen);
        std::vector<int> ids(static_cast<size_t>(S) * L);
        std::vector<double> w(static_cast<size_t>(S) * L);
        nn::Tensor mask({S, 1}), adv({S, 1}), ret({S, 1}), lp_old({S, 1});
        std::vector<int> acts(S);
        for (int s = 0; s < S; ++s) {
          const auto& seg = segments[start + s];
          const int64_t row = batch.at(seg.t0 + i, seg.b);
          std::copy_n(batch.obs.begin() + row * grid::kObsLen,
                      grid::kObsLen,
                      obs.begin() + static_cast<size_t>(s) * grid::kObsLen);
          std::copy_n(batch.instr_ids.begin() + row * L, L,
                      ids.begin() + static_cast<size_t>(s) * L);
          std::copy_n(batch.instr_w.begin() + row * L, L,
                      w.begin() + static_cast<size_t>(s) * L);
          mask.at(s) = batch.mask[row];
          adv.at(s) = batch.advantage[row];
          ret.at(s) = batch.ret[row];
          lp_old.at(s) = batch.logprob[row];
          acts[s] = batch.actions[row];
        }
        h = g.mul_colvec(h, g.constant(std::move(mask)));
        Policy::Out out = policy.forward(g, obs.data(), S, ids, w, h);
        h = out.memory;
        nn::Node* lp =
            g.gather_cols(g.log_softmax_rows(out.logits), acts);
        nn::Node* ratio =
            g.exp_(g.sub(lp, g.constant(std::move(lp_old))));
        nn::Node* adv_n = g.constant(std::move(adv));
        nn::Node* surr1 = g.mul(ratio, adv_n);
        nn::Node* surr2 = g.mul(
            g.clamp(ratio, 1.0 - cfg.clip_eps, 1.0 + cfg.clip_eps), adv_n);
        policy_terms.push_back(g.min_(surr1, surr2));
        value_terms.push_back(
            g.square(g.sub(out.value, g.constant(std::move(ret)))));
        entropy_terms.push_back(g.entropy_rows(out.logits));
      }
      nn::Node* policy_gain = g.mean_all(g.concat_rows(policy_terms));
      nn::Node* value_loss = g.mean_all(g.concat_rows(value_terms));
      nn::Node* entropy = g.mean_all(g.concat_rows(entropy_terms));
      nn::Node* loss = g.sub(
          g.add(g.affine(policy_gain, -1.0, 0.0),
                g.affine(value_loss, cfg.value_coef, 0.0)),
          g.affine(entropy, cfg.entropy_coef, 0.0));
      policy.params().zero_grad();
      g.backward(loss);
      if (!std::isfinite(loss->scalar()))
        throw NumericError("PPO loss diverged");
      if (cfg.max_grad_norm > 0)
        policy.params().clip_grad_norm(cfg.max_grad_norm);
      adam.lr = cfg.lr;
      adam.eps = cfg.adam_eps;
      adam.step(policy.params());
      stats.policy_loss += -policy_gain->scalar();
      stats.value_loss += value_loss->scalar();
      stats.entropy += entropy->scalar();
      ++n_minibatches;
    }
  }
  if (n_minibatches > 0) {
    stats.policy_loss /= n_minibatches;
    stats.value_loss /= n_minibatches;
    stats.entropy /= n_minibatches;
  }
  return stats;
}

}  // namespace eager::rl
