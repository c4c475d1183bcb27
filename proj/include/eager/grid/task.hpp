#pragma once

#include <string>
#include <vector>

#include "eager/grid/types.hpp"

namespace eager::grid {

enum class TaskKind { PutNextTo, PickUp, Open, Unlock, Sequence };
enum class LayoutKind { Local, Medium, Large };

// Local is a single room, Medium two rooms joined by a door, Large a 3x3
// room maze. room_size counts tiles per side including boundary walls, so
// the default 8 leaves a 6x6 interior.
struct TaskSpec {
  TaskKind kind = TaskKind::PutNextTo;
  LayoutKind layout = LayoutKind::Local;
  int max_steps = 0;     // 0 -> per-task default
  int distractors = -1;  // -1 -> 4 per room
  int room_size = 8;
  double reward_scale = 20.0;
  // Re-draw layouts until the procedural solver can complete them.
  bool validate = true;

  int h() const;
  int n_rooms() const;
  std::string name() const;
  static TaskSpec parse(const std::string& name);
};

struct ObjDesc {
  Kind kind = Kind::Ball;
  Color color = Color::Red;
  bool operator==(const ObjDesc&) const = default;
};

enum class ClauseKind { PutNext, PickUp, Open, Unlock };

struct Clause {
  ClauseKind kind = ClauseKind::PickUp;
  ObjDesc move;    // PutNext: the object to move; PickUp: the target
  ObjDesc anchor;  // PutNext only
  Color door_color = Color::Red;  // Open/Unlock
};

enum class SeqOrder { Before, After };

struct Goal {
  std::vector<Clause> clauses;  // one clause, or two for Sequence
  SeqOrder order = SeqOrder::Before;

  bool is_sequence() const { return clauses.size() == 2; }
  // Index of the clause that must be completed first/second at execution
  // time ("A after B" flips instruction order).
  int first_exec() const {
    return (!is_sequence() || order == SeqOrder::Before) ? 0 : 1;
  }
  int second_exec() const { return 1 - first_exec(); }
};

const char* task_kind_name(TaskKind k);
const char* layout_name(LayoutKind l);

}  // namespace eager::grid
