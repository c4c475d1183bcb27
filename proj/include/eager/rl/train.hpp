#pragma once

#include <string>
#include <vector>

#include "eager/qa/model.hpp"
#include "eager/rl/ppo.hpp"

namespace eager::rl {

struct TrainAgentConfig {
  grid::TaskSpec task;
  PolicyConfig policy;
  PPOConfig ppo;
  int64_t frames = 2000000;
  uint64_t seed = 0;

  std::string shaping_mode = "none";  // none | eager
  std::string qa_backend = "oracle";  // oracle | learned
  std::string qa_ckpt;
  double lambda = -1.0;  // < 0 picks the per-task default
  bool enforce_bound = false;
  bool simple_reward = false;
  bool no_noanswer = false;

  std::string out_dir;       // curve CSV, checkpoints, optional trace
  int checkpoint_every = 0;  // updates between checkpoints; 0 = final only
  bool write_trace = false;
  bool quiet = true;
};

struct CurvePoint {
  int64_t frames = 0;
  double mean_return = 0.0;
  double std_return = 0.0;
  double mean_bonus = 0.0;
  double mean_shaped = 0.0;
  int episodes = 0;
  double success_rate = 0.0;
};

struct TrainAgentResult {
  std::vector<CurvePoint> curve;
  std::string checkpoint;
  double resolved_lambda = 0.0;
};

TrainAgentResult train_agent(const TrainAgentConfig& cfg);

struct EvalResult {
  double mean_return = 0.0;
  double success_rate = 0.0;
};
// Greedy rollouts on fresh episodes; reports extrinsic return only.
EvalResult evaluate_policy(Policy& policy, const grid::TaskSpec& task,
                           int episodes, uint64_t seed);

}  // namespace eager::rl
