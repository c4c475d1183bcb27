#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "eager/grid/env.hpp"
#include "eager/util/rng.hpp"

namespace eager::bot {

struct PlanningError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Next action of a replanned subgoal-stack policy with full state access.
// Throws PlanningError when the goal is not solvable from the current state.
grid::Action plan_next_action(const grid::Env& env);

// Per-episode random-action probability, sampled from a discrete support.
struct NoiseDistribution {
  std::vector<std::pair<double, double>> support;  // (p, weight)

  void validate() const;
  double sample(Rng& rng) const;
  std::string to_string() const;

  // p=0 with weight 0.45; p in {0.1, 0.4, 0.8} with weights {0.35, 0.1, 0.1}
  static NoiseDistribution paper_default();
  static NoiseDistribution parse(const std::string& text);  // "0:0.45,..."
};

struct Trajectory {
  std::string task;
  std::vector<std::string> instruction;
  std::vector<grid::Observation> observations;  // obs before each action
  std::vector<grid::Action> actions;
  bool success = false;
  uint64_t seed = 0;
  double noise_p = 0.0;

  int length() const { return static_cast<int>(actions.size()); }
};

// Runs the bot with per-step action noise; returns the trajectory only if
// the episode succeeds within the step limit ("discard" otherwise).
std::optional<Trajectory> generate_trajectory(const grid::TaskSpec& spec,
                                              uint64_t seed,
                                              const NoiseDistribution& noise);

// Replays recorded actions through a fresh environment and checks that
// observations and the success flag reproduce exactly.
bool replay_matches(const grid::TaskSpec& spec, const Trajectory& traj);

}  // namespace eager::bot
