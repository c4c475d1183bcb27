#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "eager/nn/kernels.hpp"
#include "eager/rl/train.hpp"

using namespace eager;
using namespace eager::rl;

namespace {

PolicyConfig tiny_policy(uint64_t seed = 1) {
  PolicyConfig cfg;
  cfg.cell_embed = 4;
  cfg.conv1 = 6;
  cfg.conv2 = 6;
  cfg.instr_embed = 6;
  cfg.instr_dim = 8;
  cfg.mem_dim = 12;
  cfg.init_seed = seed;
  return cfg;
}

PPOConfig small_ppo() {
  PPOConfig cfg;
  cfg.n_envs = 4;
  cfg.batch_steps = 4 * 16;
  cfg.minibatch_steps = 32;
  cfg.recurrence = 4;
  cfg.epochs = 2;
  return cfg;
}

grid::TaskSpec small_task() {
  grid::TaskSpec spec = grid::TaskSpec::parse("PutNextTo-Local");
  spec.room_size = 6;
  spec.max_steps = 64;
  spec.distractors = 2;
  return spec;
}

std::vector<uint8_t> random_obs(int n, Rng& rng) {
  std::vector<uint8_t> obs(static_cast<size_t>(n) * grid::kObsLen);
  for (size_t i = 0; i < obs.size(); i += 3) {
    obs[i] = static_cast<uint8_t>(rng.below(8));
    obs[i + 1] = static_cast<uint8_t>(rng.below(6));
    obs[i + 2] = static_cast<uint8_t>(rng.below(3));
  }
  return obs;
}

}  // namespace

TEST_CASE("action distribution normalises and memory threads") {
  Policy policy(tiny_policy());
  Rng rng(3);
  const int B = 3;
  auto obs = random_obs(B, rng);
  std::vector<int> ids(B * policy.config().instr_len);
  std::vector<double> w(B * policy.config().instr_len);
  auto instr = lang::tokenize("open the red door");
  for (int b = 0; b < B; ++b)
    policy.encode_instruction(instr, ids.data() + b * policy.config().instr_len,
                              w.data() + b * policy.config().instr_len);
  nn::Graph g;
  nn::Node* mem =
      g.constant(nn::Tensor({B, policy.config().mem_dim}));
  auto out = policy.forward(g, obs.data(), B, ids, w, mem);
  nn::Tensor probs({B, 7});
  nn::kernels::softmax_rows(out.logits->v.data(), probs.data(), B, 7);
  for (int b = 0; b < B; ++b) {
    double s = 0.0;
    for (int a = 0; a < 7; ++a) s += probs.at2(b, a);
    CHECK(std::fabs(s - 1.0) < 1e-6);
  }
  CHECK(out.memory->v.rows() == B);
}

TEST_CASE("memory reset: zeroed state is independent of history") {
  Policy policy(tiny_policy());
  Rng rng(5);
  auto obs = random_obs(1, rng);
  std::vector<int> ids(policy.config().instr_len);
  std::vector<double> w(policy.config().instr_len);
  policy.encode_instruction(lang::tokenize("pick up a red ball"), ids.data(),
                            w.data());
  auto run_from = [&](std::vector<double> memory) {
    nn::Graph g;
    nn::Node* mem = g.constant(
        nn::Tensor({1, policy.config().mem_dim}, std::move(memory)));
    auto out = policy.forward(g, obs.data(), 1, ids, w, mem);
    return out.logits->v.d;
  };
  std::vector<double> zero(policy.config().mem_dim, 0.0);
  std::vector<double> junk(policy.config().mem_dim);
  for (auto& v : junk) v = rng.normal();
  // masked history: multiplying junk by the reset mask gives the zero state
  auto a = run_from(zero);
  std::vector<double> masked = junk;
  for (auto& v : masked) v *= 0.0;
  auto b = run_from(masked);
  for (size_t i = 0; i < a.size(); ++i) CHECK(a[i] == b[i]);
  // and junk memory genuinely changes the output (sanity of the check)
  auto c = run_from(junk);
  bool any_diff = false;
  for (size_t i = 0; i < a.size(); ++i) any_diff |= a[i] != c[i];
  CHECK(any_diff);
}

TEST_CASE("instructions differing in one colour modulate differently") {
  Policy policy(tiny_policy());
  auto m1 = policy.modulation(lang::tokenize("open the red door"));
  auto m2 = policy.modulation(lang::tokenize("open the blue door"));
  REQUIRE(m1.size() == m2.size());
  double dist = 0.0;
  for (size_t i = 0; i < m1.size(); ++i)
    dist += (m1[i] - m2[i]) * (m1[i] - m2[i]);
  CHECK(dist > 1e-12);
}

TEST_CASE("GAE matches the closed form on a hand-built episode") {
  RolloutBatch batch;
  batch.n_envs = 1;
  batch.steps = 3;
  batch.value = {1.0, 2.0, 3.0};
  batch.reward = {0.5, -0.25, 2.0};
  batch.done = {0, 0, 1};
  PPOConfig cfg;
  cfg.gamma = 0.9;
  cfg.gae_lambda = 0.8;
  compute_gae(batch, {7.0}, cfg);  // bootstrap ignored: episode ends at T-1
  const double d2 = 2.0 - 3.0;                      // terminal step
  const double d1 = -0.25 + 0.9 * 3.0 - 2.0;
  const double d0 = 0.5 + 0.9 * 2.0 - 1.0;
  const double a2 = d2;
  const double a1 = d1 + 0.9 * 0.8 * a2;
  const double a0 = d0 + 0.9 * 0.8 * a1;
  CHECK(batch.advantage[2] == doctest::Approx(a2).epsilon(1e-12));
  CHECK(batch.advantage[1] == doctest::Approx(a1).epsilon(1e-12));
  CHECK(batch.advantage[0] == doctest::Approx(a0).epsilon(1e-12));
  CHECK(batch.ret[0] == doctest::Approx(a0 + 1.0));

  // non-terminal tail uses the bootstrap value
  batch.done = {0, 0, 0};
  compute_gae(batch, {7.0}, cfg);
  const double d2b = 2.0 + 0.9 * 7.0 - 3.0;
  CHECK(batch.advantage[2] == doctest::Approx(d2b).epsilon(1e-12));
}

TEST_CASE("zero rewards with a zero critic give zero advantages") {
  RolloutBatch batch;
  batch.n_envs = 2;
  batch.steps = 4;
  batch.value.assign(8, 0.0);
  batch.reward.assign(8, 0.0);
  batch.done.assign(8, 0);
  PPOConfig cfg;
  compute_gae(batch, {0.0, 0.0}, cfg);
  for (double a : batch.advantage) CHECK(a == 0.0);
  // normalization guard: 0 / (0 + eps) stays 0
  double mean = 0.0;
  for (double a : batch.advantage) mean += a;
  mean /= batch.advantage.size();
  for (double a : batch.advantage)
    CHECK((a - mean) / (0.0 + 1e-8) == 0.0);
}

TEST_CASE("rollouts without shaping carry raw rewards") {
  Policy policy(tiny_policy());
  PPOConfig cfg = small_ppo();
  RolloutCollector collector(policy, small_task(), cfg, ShapingSetup{}, 11);
  RolloutBatch batch = collector.collect();
  REQUIRE(batch.frames() == cfg.batch_steps);
  for (int64_t i = 0; i < batch.frames(); ++i)
    CHECK(batch.reward[i] == batch.reward_ext[i]);
  // masks flag episode starts
  for (int b = 0; b < batch.n_envs; ++b)
    CHECK(batch.mask[batch.at(0, b)] == 0.0);
}

TEST_CASE("oracle shaping adds bonuses and neutralised totals") {
  Policy policy(tiny_policy());
  PPOConfig cfg = small_ppo();
  cfg.batch_steps = 4 * 64;  // enough steps to finish episodes
  shaping::OracleQa oracle;
  ShapingSetup setup;
  setup.config.lambda = 2.4;
  setup.config.gamma = cfg.gamma;
  setup.backend = &oracle;
  RolloutCollector collector(policy, small_task(), cfg, setup, 13);
  // random policies time out a lot; several batches to find bonuses
  double bonus = 0.0;
  for (int i = 0; i < 6 && bonus == 0.0; ++i) {
    RolloutBatch batch = collector.collect();
    for (int64_t j = 0; j < batch.frames(); ++j)
      bonus += batch.reward[j] - batch.reward_ext[j];
  }
  CHECK(bonus != 0.0);
}

TEST_CASE("ppo update with identical params starts at ratio one") {
  Policy policy(tiny_policy(7));
  PPOConfig cfg = small_ppo();
  cfg.epochs = 1;
  cfg.minibatch_steps = 64;  // single minibatch covering the batch
  cfg.normalize_advantages = false;
  RolloutCollector collector(policy, small_task(), cfg, ShapingSetup{}, 17);
  RolloutBatch batch = collector.collect();

  // With unchanged parameters the clipped surrogate equals the advantage
  // mean: recompute the forward pass and compare analytically.
  double adv_mean = 0.0;
  for (double a : batch.advantage) adv_mean += a;
  adv_mean /= batch.advantage.size();

  nn::Adam adam;
  adam.lr = 0.0;  // keep parameters fixed during the probe update
  Rng rng(1);
  UpdateStats stats = ppo_update(policy, adam, batch, cfg, rng);
  CHECK(stats.policy_loss == doctest::Approx(-adv_mean).epsilon(1e-9));
}

TEST_CASE("policy loss gradients match finite differences on a toy net") {
  PolicyConfig pc;
  pc.cell_embed = 2;
  pc.conv1 = 2;
  pc.conv2 = 2;
  pc.instr_embed = 2;
  pc.instr_dim = 3;
  pc.mem_dim = 4;
  pc.instr_len = 8;
  pc.activation = "tanh";
  pc.init_seed = 9;
  Policy policy(pc);
  INFO("params: ", policy.params().count());
  CHECK(policy.params().count() <= 1000);

  Rng rng(33);
  const int B = 3;
  auto obs = random_obs(B, rng);
  std::vector<int> ids(B * pc.instr_len);
  std::vector<double> w(B * pc.instr_len);
  auto instr = lang::tokenize("open the green door");
  for (int b = 0; b < B; ++b)
    policy.encode_instruction(instr, ids.data() + b * pc.instr_len,
                              w.data() + b * pc.instr_len);
  std::vector<int> acts = {2, 0, 6};
  std::vector<double> lp_old = {-1.9, -2.0, -1.8};
  std::vector<double> adv = {0.7, -0.3, 1.2};
  std::vector<double> ret = {1.0, 0.0, 2.0};

  auto build = [&](nn::Graph& g) -> nn::Node* {
    nn::Node* mem = g.constant(nn::Tensor({B, pc.mem_dim}));
    auto out = policy.forward(g, obs.data(), B, ids, w, mem);
    nn::Node* lp = g.gather_cols(g.log_softmax_rows(out.logits), acts);
    nn::Node* ratio = g.exp_(
        g.sub(lp, g.constant(nn::Tensor({B, 1}, std::vector<double>(lp_old)))));
    nn::Node* a = g.constant(nn::Tensor({B, 1}, std::vector<double>(adv)));
    nn::Node* s1 = g.mul(ratio, a);
    nn::Node* s2 = g.mul(g.clamp(ratio, 0.8, 1.2), a);
    nn::Node* pol = g.affine(g.mean_all(g.min_(s1, s2)), -1.0, 0.0);
    nn::Node* v = g.square(g.sub(
        out.value, g.constant(nn::Tensor({B, 1}, std::vector<double>(ret)))));
    nn::Node* ent = g.entropy_rows(out.logits);
    return g.sub(g.add(pol, g.affine(g.mean_all(v), 0.5, 0.0)),
                 g.affine(g.mean_all(ent), 0.01, 0.0));
  };

  policy.params().zero_grad();
  {
    nn::Graph g;
    g.backward(build(g));
  }
  double worst = 0.0;
  const double eps = 1e-6;
  for (auto& p : policy.params().all()) {
    for (int64_t i = 0; i < p->v.numel(); ++i) {
      const double old = p->v.d[i];
      p->v.d[i] = old + eps;
      double fp;
      {
        nn::Graph g;
        fp = build(g)->scalar();
      }
      p->v.d[i] = old - eps;
      double fm;
      {
        nn::Graph g;
        fm = build(g)->scalar();
      }
      p->v.d[i] = old;
      const double fd = (fp - fm) / (2 * eps);
      const double an = p->g.d[i];
      const double diff = std::fabs(fd - an);
      if (diff < 1e-9) continue;
      worst = std::max(worst, diff / std::max(std::fabs(fd), std::fabs(an)));
    }
  }
  CHECK(worst < 1e-4);
}

TEST_CASE("training curves are reproducible for fixed seeds") {
  auto run = [] {
    TrainAgentConfig cfg;
    cfg.task = small_task();
    cfg.policy = tiny_policy();
    cfg.ppo = small_ppo();
    cfg.frames = 4 * 16 * 3;  // three updates
    cfg.seed = 21;
    return train_agent(cfg);
  };
  auto r1 = run();
  auto r2 = run();
  REQUIRE(r1.curve.size() == r2.curve.size());
  for (size_t i = 0; i < r1.curve.size(); ++i) {
    CHECK(r1.curve[i].mean_return == r2.curve[i].mean_return);
    CHECK(r1.curve[i].mean_shaped == r2.curve[i].mean_shaped);
  }
}

TEST_CASE("policy checkpoints round trip") {
  Policy policy(tiny_policy(42));
  const std::string path = "/tmp/eager_policy_ckpt.bin";
  policy.save(path);
  auto loaded = Policy::load_file(path);
  Rng rng(2);
  auto obs = random_obs(1, rng);
  std::vector<int> ids(policy.config().instr_len);
  std::vector<double> w(policy.config().instr_len);
  policy.encode_instruction(lang::tokenize("pick up a blue key"), ids.data(),
                            w.data());
  nn::Graph g1, g2;
  auto o1 = policy.forward(
      g1, obs.data(), 1, ids, w,
      g1.constant(nn::Tensor({1, policy.config().mem_dim})));
  auto o2 = loaded->forward(
      g2, obs.data(), 1, ids, w,
      g2.constant(nn::Tensor({1, policy.config().mem_dim})));
  for (int a = 0; a < 7; ++a) CHECK(o1.logits->v.at(a) == o2.logits->v.at(a));
  std::remove(path.c_str());
}
