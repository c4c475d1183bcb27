#pragma once

#include <string>
#include <utility>
#include <vector>

#include "eager/grid/task.hpp"
#include "eager/grid/types.hpp"
#include "eager/util/rng.hpp"

namespace eager::grid {

// First step index at which each ground-truth event held; -1 if never.
struct EpisodeEvents {
  struct ClauseEvents {
    int holding_move = -1;  // carrying the clause's move/pickup object
    int adjacency = -1;     // PutNext objects 4-adjacent on the grid
    int door_open = -1;     // a door of the clause colour is open
    int key_carried = -1;   // carrying a key of the clause colour
    int satisfied = -1;     // clause predicate first held
  };
  std::array<ClauseEvents, 2> clause{};
};

bool clause_predicate(const GridState& s, const Clause& c);

// Tracks goal completion over an episode. Sequence goals require the
// second clause (in execution order) to hold at a step strictly after the
// first clause held; a clause completed too early must be re-verified.
class GoalChecker {
 public:
  void reset(const Goal* goal);
  void observe(const GridState& s, int step);
  bool satisfied() const { return done_; }
  // 0 = waiting on first clause, 1 = waiting on second, 2 = done.
  int stage() const;
  int first_done_step() const { return first_done_step_; }
  const EpisodeEvents& events() const { return events_; }

 private:
  const Goal* goal_ = nullptr;
  EpisodeEvents events_;
  bool done_ = false;
  bool first_done_ = false;
  int first_done_step_ = -1;
};

struct StepResult {
  Observation obs;
  double reward = 0.0;
  bool done = false;
  bool success = false;
};

class Env {
 public:
  // Procedurally generates a layout and goal. Identical (spec, seed) pairs
  // produce identical episodes.
  std::pair<std::vector<std::string>, Observation> reset(const TaskSpec& spec,
                                                         uint64_t seed);
  StepResult step(Action a);

  const TaskSpec& spec() const { return spec_; }
  const GridState& state() const { return state_; }
  const Goal& goal() const { return goal_; }
  const GoalChecker& checker() const { return checker_; }
  const std::vector<std::string>& instruction() const { return instruction_; }
  bool done() const { return done_; }
  bool success() const { return success_; }
  int h() const { return spec_.h(); }

  static Observation encode_observation(const GridState& s);
  // Cell-centre segment visibility with walls and non-open doors opaque.
  static bool visible(const GridState& s, Vec2 from, Vec2 to);

 private:
  void generate(Rng& rng);
  bool solvable_by_bot() const;

  TaskSpec spec_;
  GridState state_;
  Goal goal_;
  GoalChecker checker_;
  std::vector<std::string> instruction_;
  bool done_ = true;
  bool success_ = false;
};

}  // namespace eager::grid
