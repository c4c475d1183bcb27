#pragma once

#include <memory>
#include <ostream>
#include <vector>

#include "eager/grid/env.hpp"
#include "eager/rl/policy.hpp"
#include "eager/shaping/shaping.hpp"

namespace eager::rl {

struct PPOConfig {
  double gamma = 0.99;
  double gae_lambda = 0.99;
  double lr = 7e-4;
  double adam_eps = 1e-8;
  double entropy_coef = 0.01;
  double value_coef = 0.5;
  double clip_eps = 0.2;
  int batch_steps = 2560;
  int minibatch_steps = 1280;
  int epochs = 4;
  int n_envs = 16;
  int recurrence = 8;
  double max_grad_norm = 0.5;
  bool normalize_advantages = true;
  // Divide rewards by the task's reward scale before value/advantage
  // computation (reported returns stay raw).
  bool normalize_returns = false;

  int steps_per_env() const { return batch_steps / n_envs; }
  void validate() const;
};

// lambda <= 0 or a null backend disables shaping.
struct ShapingSetup {
  shaping::ShapingConfig config;
  shaping::QaBackend* backend = nullptr;

  bool enabled() const { return backend != nullptr && config.lambda > 0.0; }
};

struct BatchStats {
  int episodes = 0;
  int successes = 0;
  double mean_return_ext = 0.0;
  double std_return_ext = 0.0;
  double mean_return_shaped = 0.0;
  double mean_bonus = 0.0;
};

// Flattened [t * n_envs + b] layout throughout.
struct RolloutBatch {
  int n_envs = 0, steps = 0, instr_len = 0, mem_dim = 0;
  std::vector<uint8_t> obs;
  std::vector<int> instr_ids;
  std::vector<double> instr_w;
  std::vector<double> memory;  // recurrent state before the step
  std::vector<double> mask;    // 0 where an episode starts at this step
  std::vector<int> actions;
  std::vector<double> logprob;
  std::vector<double> value;
  std::vector<double> reward;      // shaped
  std::vector<double> reward_ext;  // raw environment reward
  std::vector<uint8_t> done;
  std::vector<double> advantage, ret;
  BatchStats stats;

  int64_t frames() const { return static_cast<int64_t>(n_envs) * steps; }
  int64_t at(int t, int b) const {
    return static_cast<int64_t>(t) * n_envs + b;
  }
};

// Steps parallel environments with sampled actions, routes rewards through
// the shaper, neutralises successful terminations, and keeps env and
// recurrent state across batches.
class RolloutCollector {
 public:
  RolloutCollector(Policy& policy, const grid::TaskSpec& task,
                   const PPOConfig& cfg, ShapingSetup shaping, uint64_t seed,
                   std::ostream* trace = nullptr);
  RolloutBatch collect();
  int episodes_seen() const { return episode_counter_; }

 private:
  void reset_env(int b);

  Policy& policy_;
  grid::TaskSpec task_;
  PPOConfig cfg_;
  ShapingSetup shaping_;
  Rng rng_;
  uint64_t next_env_seed_ = 0;
  std::ostream* trace_;
  int episode_counter_ = 0;

  std::vector<grid::Env> envs_;
  std::vector<grid::Observation> cur_obs_;
  std::vector<std::vector<int>> instr_ids_;
  std::vector<std::vector<double>> instr_w_;
  std::vector<double> memory_;        // [B * mem]
  std::vector<uint8_t> fresh_;        // episode starts at the next step
  std::vector<std::unique_ptr<shaping::EpisodeShaper>> shapers_;
  std::vector<std::vector<grid::Observation>> ep_obs_;
  std::vector<std::vector<grid::Action>> ep_act_;
  std::vector<int> ep_t_;
  std::vector<double> ep_ret_ext_, ep_ret_shaped_, ep_bonus_;
};

// Fills advantage/ret with generalized advantage estimates; bootstrap holds
// V(s_T) per environment.
void compute_gae(RolloutBatch& batch, const std::vector<double>& bootstrap,
                 const PPOConfig& cfg);

struct UpdateStats {
  double policy_loss = 0.0;
  double value_loss = 0.0;
  double entropy = 0.0;
};

UpdateStats ppo_update(Policy& policy, nn::Adam& adam, RolloutBatch& batch,
                       const PPOConfig& cfg, Rng& rng);

}  // namespace eager::rl
