#include "eager/grid/env.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>

#include "eager/bot/bot.hpp"
#include "eager/lang/lang.hpp"

namespace eager::grid {

const char* action_name(Action a) {
  switch (a) {
    case Action::TurnLeft: return "turn_left";
    case Action::TurnRight: return "turn_right";
    case Action::Forward: return "forward";
    case Action::Pickup: return "pickup";
    case Action::Drop: return "drop";
    case Action::Toggle: return "toggle";
    case Action::Done: return "done";
  }
  return "?";
}

uint8_t shape_id(Kind k) {
  switch (k) {
    case Kind::Empty: return kShapeEmpty;
    case Kind::Wall: return kShapeWall;
    case Kind::Door: return kShapeDoor;
    case Kind::Key: return kShapeKey;
    case Kind::Ball: return kShapeBall;
    case Kind::Box: return kShapeBox;
  }
  return kShapeUnseen;
}

const char* color_name(Color c) {
  switch (c) {
    case Color::Red: return "red";
    case Color::Green: return "green";
    case Color::Blue: return "blue";
    case Color::Purple: return "purple";
    case Color::Yellow: return "yellow";
    case Color::Grey: return "grey";
  }
  return "?";
}

const char* kind_noun(Kind k) {
  switch (k) {
    case Kind::Ball: return "ball";
    case Kind::Box: return "box";
    case Kind::Key: return "key";
    case Kind::Door: return "door";
    default: return "?";
  }
}

const char* task_kind_name(TaskKind k) {
  switch (k) {
    case TaskKind::PutNextTo: return "PutNextTo";
    case TaskKind::PickUp: return "PickUp";
    case TaskKind::Open: return "Open";
    case TaskKind::Unlock: return "Unlock";
    case TaskKind::Sequence: return "Sequence";
  }
  return "?";
}

const char* layout_name(LayoutKind l) {
  switch (l) {
    case LayoutKind::Local: return "Local";
    case LayoutKind::Medium: return "Medium";
    case LayoutKind::Large: return "Large";
  }
  return "?";
}

int TaskSpec::n_rooms() const {
  switch (layout) {
    case LayoutKind::Local: return 1;
    case LayoutKind::Medium: return 2;
    case LayoutKind::Large: return 9;
  }
  return 1;
}

int TaskSpec::h() const {
  if (max_steps > 0) return max_steps;
  static constexpr int kPut[3] = {128, 256, 512};
  static constexpr int kPick[3] = {64, 128, 512};
  static constexpr int kDoor[3] = {64, 128, 512};
  static constexpr int kSeq[3] = {256, 512, 1024};
  const int li = static_cast<int>(layout);
  switch (kind) {
    case TaskKind::PutNextTo: return kPut[li];
    case TaskKind::PickUp: return kPick[li];
    case TaskKind::Open: return kDoor[li];
    case TaskKind::Unlock: return kDoor[li];
    case TaskKind::Sequence: return kSeq[li];
  }
  return 128;
}

std::string TaskSpec::name() const {
  return std::string(task_kind_name(kind)) + "-" + layout_name(layout);
}

TaskSpec TaskSpec::parse(const std::string& name) {
  auto dash = name.find('-');
  if (dash == std::string::npos)
    throw ConfigError("task name must look like PutNextTo-Local: " + name);
  std::string k = name.substr(0, dash), l = name.substr(dash + 1);
  auto lower = [](std::string s) {
    std::transform(s.begin(), s.end(), s.begin(),
                   [](unsigned char c) { return std::tolower(c); });
    return s;
  };
  TaskSpec spec;
  const std::string kl = lower(k), ll = lower(l);
  if (kl == "putnextto" || kl == "putnext")
    spec.kind = TaskKind::PutNextTo;
  else if (kl == "pickup")
    spec.kind = TaskKind::PickUp;
  else if (kl == "open")
    spec.kind = TaskKind::Open;
  else if (kl == "unlock")
    spec.kind = TaskKind::Unlock;
  else if (kl == "sequence")
    spec.kind = TaskKind::Sequence;
  else
    throw ConfigError("unknown task kind: " + k);
  if (ll == "local")
    spec.layout = LayoutKind::Local;
  else if (ll == "medium")
    spec.layout = LayoutKind::Medium;
  else if (ll == "large")
    spec.layout = LayoutKind::Large;
  else
    throw ConfigError("unknown layout: " + l);
  if (spec.layout == LayoutKind::Local &&
      (spec.kind == TaskKind::Open || spec.kind == TaskKind::Unlock ||
       spec.kind == TaskKind::Sequence))
    throw ConfigError(spec.name() + " needs a layout with doors");
  return spec;
}

// ---------------------------------------------------------------------------
// Goal predicates and event tracking
// ---------------------------------------------------------------------------

namespace {

bool any_adjacent_pair(const GridState& s, const ObjDesc& a,
                       const ObjDesc& b) {
  for (int y = 0; y < s.height; ++y)
    for (int x = 0; x < s.width; ++x) {
      const Entity& e = s.at(x, y);
      if (e.kind != a.kind || e.color != a.color) continue;
      const Vec2 nbrs[4] = {{x + 1, y}, {x - 1, y}, {x, y + 1}, {x, y - 1}};
      for (const Vec2& n : nbrs) {
        if (!s.in_bounds(n.x, n.y)) continue;
        const Entity& o = s.at(n);
        if (o.kind == b.kind && o.color == b.color) return true;
      }
    }
  return false;
}

bool any_door_open(const GridState& s, Color c) {
  for (const Entity& e : s.cells)
    if (e.is_door() && e.color == c && e.door == DoorState::Open) return true;
  return false;
}

bool carried_matches(const GridState& s, const ObjDesc& d) {
  return s.carried && s.carried->kind == d.kind && s.carried->color == d.color;
}

}  // namespace

bool clause_predicate(const GridState& s, const Clause& c) {
  switch (c.kind) {
    case ClauseKind::PutNext:
      return any_adjacent_pair(s, c.move, c.anchor);
    case ClauseKind::PickUp:
      return carried_matches(s, c.move);
    case ClauseKind::Open:
    case ClauseKind::Unlock:
      return any_door_open(s, c.door_color);
  }
  return false;
}

void GoalChecker::reset(const Goal* goal) {
  goal_ = goal;
  events_ = EpisodeEvents{};
  done_ = false;
  first_done_ = false;
  first_done_step_ = -1;
}

int GoalChecker::stage() const {
  if (done_) return 2;
  return first_done_ ? 1 : 0;
}

void GoalChecker::observe(const GridState& s, int step) {
  if (!goal_ || done_) return;
  for (size_t i = 0; i < goal_->clauses.size(); ++i) {
    const Clause& c = goal_->clauses[i];
    auto& ev = events_.clause[i];
    auto mark = [step](int& slot, bool cond) {
      if (slot < 0 && cond) slot = step;
    };
    if (c.kind == ClauseKind::PutNext || c.kind == ClauseKind::PickUp)
      mark(ev.holding_move, carried_matches(s, c.move));
    if (c.kind == ClauseKind::PutNext)
      mark(ev.adjacency, any_adjacent_pair(s, c.move, c.anchor));
    if (c.kind == ClauseKind::Open || c.kind == ClauseKind::Unlock) {
      mark(ev.door_open, any_door_open(s, c.door_color));
      mark(ev.key_carried,
           carried_matches(s, {Kind::Key, c.door_color}));
    }
    mark(ev.satisfied, clause_predicate(s, c));
  }
  if (!goal_->is_sequence()) {
    done_ = events_.clause[0].satisfied >= 0;
    return;
  }
  const Clause& first = goal_->clauses[goal_->first_exec()];
  const Clause& second = goal_->clauses[goal_->second_exec()];
  if (!first_done_) {
    if (clause_predicate(s, first)) {
      first_done_ = true;
      first_done_step_ = step;
    }
  } else if (step > first_done_step_ && clause_predicate(s, second)) {
    done_ = true;
  }
}

// ---------------------------------------------------------------------------
// Observation encoding
// ---------------------------------------------------------------------------

bool Env::visible(const GridState& s, Vec2 from, Vec2 to) {
  if (from == to) return true;
  // March the centre-to-centre segment; any interior opaque cell blocks.
  // Exact corner crossings pass between cells and do not block.
  const double x0 = from.x + 0.5, y0 = from.y + 0.5;
  const double dx = to.x - from.x, dy = to.y - from.y;
  const double len = std::sqrt(dx * dx + dy * dy);
  const double ux = dx / len, uy = dy / len;
  int cx = from.x, cy = from.y;
  const int sx = dx > 0 ? 1 : -1, sy = dy > 0 ? 1 : -1;
  double t_max_x = dx != 0
                       ? ((cx + (sx > 0 ? 1 : 0)) - x0) / ux
                       : std::numeric_limits<double>::infinity();
  double t_max_y = dy != 0
                       ? ((cy + (sy > 0 ? 1 : 0)) - y0) / uy
                       : std::numeric_limits<double>::infinity();
  const double t_dx = dx != 0 ? std::fabs(1.0 / ux)
                              : std::numeric_limits<double>::infinity();
  const double t_dy = dy != 0 ? std::fabs(1.0 / uy)
                              : std::numeric_limits<double>::infinity();
  while (true) {
    if (std::fabs(t_max_x - t_max_y) < 1e-12) {
      cx += sx;
      cy += sy;
      t_max_x += t_dx;
      t_max_y += t_dy;
    } else if (t_max_x < t_max_y) {
      cx += sx;
      t_max_x += t_dx;
    } else {
      cy += sy;
      t_max_y += t_dy;
    }
    if (cx == to.x && cy == to.y) return true;
    if (!s.in_bounds(cx, cy)) return false;
    if (s.at(cx, cy).blocks_sight()) return false;
  }
}

Observation Env::encode_observation(const GridState& s) {
  Observation obs;
  const Vec2 f = dir_vec(s.dir);
  const Vec2 r = dir_vec(rotate_right(s.dir));
  for (int vy = 0; vy < kViewSize; ++vy) {
    for (int vx = 0; vx < kViewSize; ++vx) {
      const int depth = (kViewSize - 1) - vy;
      const int lateral = vx - kViewAgentX;
      const Vec2 world{s.agent.x + f.x * depth + r.x * lateral,
                       s.agent.y + f.y * depth + r.y * lateral};
      if (!s.in_bounds(world.x, world.y)) continue;  // stays unseen
      if (!visible(s, s.agent, world)) continue;
      Entity e = s.at(world);
      if (world == s.agent) e = s.carried ? *s.carried : Entity{};
      obs.at(vx, vy, 0) = shape_id(e.kind);
      if (e.is_object() || e.is_door())
        obs.at(vx, vy, 1) = static_cast<uint8_t>(e.color);
      if (e.is_door()) obs.at(vx, vy, 2) = static_cast<uint8_t>(e.door);
    }
  }
  return obs;
}

// ---------------------------------------------------------------------------
// Layout generation
// ---------------------------------------------------------------------------

namespace {

struct LayoutInfo {
  int rooms_x = 1, rooms_y = 1;
  int room = 8;  // tiles per side including walls

  int width() const { return rooms_x * (room - 1) + 1; }
  int height() const { return rooms_y * (room - 1) + 1; }
  int room_of(Vec2 p) const {
    const int rx = std::min((p.x == 0 ? 0 : (p.x - 1)) / (room - 1),
                            rooms_x - 1);
    const int ry = std::min((p.y == 0 ? 0 : (p.y - 1)) / (room - 1),
                            rooms_y - 1);
    return ry * rooms_x + rx;
  }
};

LayoutInfo layout_info(const TaskSpec& spec) {
  LayoutInfo li;
  li.room = spec.room_size;
  switch (spec.layout) {
    case LayoutKind::Local: li.rooms_x = li.rooms_y = 1; break;
    case LayoutKind::Medium: li.rooms_x = 2; li.rooms_y = 1; break;
    case LayoutKind::Large: li.rooms_x = li.rooms_y = 3; break;
  }
  return li;
}

void build_walls(GridState& s, const LayoutInfo& li) {
  s.width = li.width();
  s.height = li.height();
  s.cells.assign(static_cast<size_t>(s.width) * s.height, Entity{});
  for (int y = 0; y < s.height; ++y)
    for (int x = 0; x < s.width; ++x)
      if (x % (li.room - 1) == 0 || y % (li.room - 1) == 0)
        s.at(x, y) = Entity{Kind::Wall};
}

// Candidate door cells along the shared wall between two horizontally or
// vertically adjacent rooms.
std::vector<Vec2> shared_wall_cells(const LayoutInfo& li, int room_a,
                                    int room_b) {
  const int ax = room_a % li.rooms_x, ay = room_a / li.rooms_x;
  const int bx = room_b % li.rooms_x, by = room_b / li.rooms_x;
  std::vector<Vec2> cells;
  const int r = li.room;
  if (ay == by && std::abs(ax - bx) == 1) {
    const int wall_x = std::max(ax, bx) * (r - 1);
    for (int y = ay * (r - 1) + 1; y < (ay + 1) * (r - 1); ++y)
      cells.push_back({wall_x, y});
  } else if (ax == bx && std::abs(ay - by) == 1) {
    const int wall_y = std::max(ay, by) * (r - 1);
    for (int x = ax * (r - 1) + 1; x < (ax + 1) * (r - 1); ++x)
      cells.push_back({x, wall_y});
  } else {
    throw UsageError("rooms not adjacent");
  }
  return cells;
}

// Randomised spanning tree over the room grid; one door per tree edge.
std::vector<Vec2> place_doors(GridState& s, const LayoutInfo& li, Rng& rng) {
  std::vector<Vec2> doors;
  const int n = li.rooms_x * li.rooms_y;
  if (n == 1) return doors;
  std::vector<bool> joined(n, false);
  std::vector<int> frontier = {0};
  joined[0] = true;
  std::vector<std::pair<int, int>> edges;
  // Kruskal-style: shuffle all adjacent-room edges, keep tree edges.
  for (int ry = 0; ry < li.rooms_y; ++ry)
    for (int rx = 0; rx < li.rooms_x; ++rx) {
      const int room = ry * li.rooms_x + rx;
      if (rx + 1 < li.rooms_x) edges.push_back({room, room + 1});
      if (ry + 1 < li.rooms_y) edges.push_back({room, room + li.rooms_x});
    }
  rng.shuffle(edges);
  std::vector<int> comp(n);
  for (int i = 0; i < n; ++i) comp[i] = i;
  std::function<int(int)> find = [&](int v) {
    while (comp[v] != v) v = comp[v] = comp[comp[v]];
    return v;
  };
  for (auto [a, b] : edges) {
    const int ra = find(a), rb = find(b);
    if (ra == rb) continue;
    comp[ra] = rb;
    auto cells = shared_wall_cells(li, a, b);
    const Vec2 cell = cells[rng.below(cells.size())];
    s.at(cell) = Entity{Kind::Door, Color::Red, DoorState::Closed};
    doors.push_back(cell);
  }
  return doors;
}

}  // namespace

std::pair<std::vector<std::string>, Observation> Env::reset(
    const TaskSpec& spec, uint64_t seed) {
  spec_ = spec;
  if (spec_.room_size < 5)
    throw ConfigError("room_size must be at least 5");
  if (spec_.layout == LayoutKind::Local &&
      (spec_.kind == TaskKind::Open || spec_.kind == TaskKind::Unlock ||
       spec_.kind == TaskKind::Sequence))
    throw ConfigError(spec_.name() + " needs a layout with doors");
  const int max_layout_attempts = 64;
  for (int attempt = 0;; ++attempt) {
    Rng rng(derive_seed(seed, "layout") + attempt);
    try {
      generate(rng);
    } catch (const ConfigError&) {
      if (attempt + 1 >= max_layout_attempts) throw;
      continue;
    }
    state_.seed = seed;
    if (!spec_.validate || solvable_by_bot()) break;
    if (attempt + 1 >= max_layout_attempts)
      throw ConfigError("could not generate a solvable layout for " +
                        spec_.name());
  }
  instruction_ = lang::instruct(goal_);
  checker_.reset(&goal_);
  checker_.observe(state_, 0);
  done_ = false;
  success_ = false;
  return {instruction_, encode_observation(state_)};
}

void Env::generate(Rng& rng) {
  const LayoutInfo li = layout_info(spec_);
  state_ = GridState{};
  build_walls(state_, li);
  goal_ = Goal{};

  std::vector<Vec2> doors = place_doors(state_, li, rng);
  for (const Vec2& d : doors)
    state_.at(d).color = static_cast<Color>(rng.below(kNumColors));

  // Free interior cells, shuffled once; placement pops from the back.
  std::vector<Vec2> free;
  for (int y = 0; y < state_.height; ++y)
    for (int x = 0; x < state_.width; ++x)
      if (state_.at(x, y).is_empty()) free.push_back({x, y});
  rng.shuffle(free);

  auto count_empty_neighbors = [&](Vec2 p) {
    int n = 0;
    const Vec2 nbrs[4] = {{p.x + 1, p.y}, {p.x - 1, p.y},
                          {p.x, p.y + 1}, {p.x, p.y - 1}};
    for (const Vec2& q : nbrs)
      if (state_.in_bounds(q.x, q.y) && state_.at(q).is_empty()) ++n;
    return n;
  };
  // Goal objects need an approachable face; require a spare empty
  // neighbour so pickups and drops stay feasible.
  auto place = [&](const Entity& e, int room, int min_empty_nbrs,
                   const std::vector<Vec2>& avoid_adjacent_to =
                       {}) -> Vec2 {
    for (size_t i = free.size(); i-- > 0;) {
      const Vec2 p = free[i];
      if (room >= 0 && li.room_of(p) != room) continue;
      if (count_empty_neighbors(p) < min_empty_nbrs) continue;
      bool bad = false;
      for (const Vec2& q : avoid_adjacent_to)
        if (std::abs(p.x - q.x) + std::abs(p.y - q.y) <= 1) bad = true;
      if (bad) continue;
      state_.at(p) = e;
      free.erase(free.begin() + static_cast<long>(i));
      return p;
    }
    throw ConfigError("no free cell for entity in " + spec_.name());
  };

  auto random_color = [&] { return static_cast<Color>(rng.below(kNumColors)); };
  auto random_obj_kind = [&] {
    const Kind kinds[3] = {Kind::Box, Kind::Ball, Kind::Key};
    return kinds[rng.below(3)];
  };

  std::vector<ObjDesc> reserved;  // descriptors distractors must avoid
  auto fresh_desc = [&]() {
    for (int tries = 0; tries < 256; ++tries) {
      ObjDesc d{random_obj_kind(), random_color()};
      bool taken = false;
      for (const auto& r : reserved) taken |= r == d;
      if (!taken) return d;
    }
    throw ConfigError("descriptor space exhausted");
  };

  auto make_clause = [&](ClauseKind kind) {
    Clause c;
    c.kind = kind;
    switch (kind) {
      case ClauseKind::PutNext: {
        c.move = fresh_desc();
        reserved.push_back(c.move);
        c.anchor = fresh_desc();
        reserved.push_back(c.anchor);
        const Vec2 anchor_pos =
            place(Entity{c.anchor.kind, c.anchor.color}, -1, 1);
        place(Entity{c.move.kind, c.move.color}, -1, 1, {anchor_pos});
        break;
      }
      case ClauseKind::PickUp: {
        c.move = fresh_desc();
        reserved.push_back(c.move);
        place(Entity{c.move.kind, c.move.color}, -1, 1);
        break;
      }
      case ClauseKind::Open:
      case ClauseKind::Unlock: {
        if (doors.empty()) throw ConfigError("no doors for open clause");
        const Vec2 target = doors[rng.below(doors.size())];
        Color c0 = random_color();
        state_.at(target).color = c0;
        for (const Vec2& d : doors)
          if (!(d == target) && state_.at(d).color == c0)
            state_.at(d).color =
                static_cast<Color>((static_cast<int>(c0) + 1 +
                                    rng.below(kNumColors - 1)) %
                                   kNumColors);
        c.door_color = c0;
        reserved.push_back({Kind::Key, c0});
        break;
      }
    }
    return c;
  };

  switch (spec_.kind) {
    case TaskKind::PutNextTo:
      goal_.clauses.push_back(make_clause(ClauseKind::PutNext));
      break;
    case TaskKind::PickUp:
      goal_.clauses.push_back(make_clause(ClauseKind::PickUp));
      break;
    case TaskKind::Open:
      goal_.clauses.push_back(make_clause(ClauseKind::Open));
      break;
    case TaskKind::Unlock: {
      Clause c = make_clause(ClauseKind::Unlock);
      c.kind = ClauseKind::Unlock;
      goal_.clauses.push_back(c);
      break;
    }
    case TaskKind::Sequence: {
      // Two clauses over PutNext/PickUp/Open with at most one Open.
      const ClauseKind pool[3] = {ClauseKind::PutNext, ClauseKind::PickUp,
                                  ClauseKind::Open};
      ClauseKind k1 = pool[rng.below(3)];
      ClauseKind k2 = pool[rng.below(3)];
      while (k1 == ClauseKind::Open && k2 == ClauseKind::Open)
        k2 = pool[rng.below(3)];
      goal_.clauses.push_back(make_clause(k1));
      goal_.clauses.push_back(make_clause(k2));
      goal_.order = rng.below(2) == 0 ? SeqOrder::Before : SeqOrder::After;
      break;
    }
  }

  // Agent start; for Unlock the key must share the agent's room.
  const Vec2 agent_pos = place(Entity{}, -1, 0);
  state_.at(agent_pos) = Entity{};  // placement marker only
  state_.agent = agent_pos;
  state_.dir = static_cast<Dir>(rng.below(4));
  state_.carried.reset();
  state_.step_count = 0;

  if (spec_.kind == TaskKind::Unlock) {
    const Color kc = goal_.clauses[0].door_color;
    for (const Vec2& d : doors)
      if (state_.at(d).color == kc) state_.at(d).door = DoorState::Locked;
    place(Entity{Kind::Key, kc}, li.room_of(agent_pos), 1);
  }

  // Irrelevant objects; descriptors never collide with goal objects.
  const int n_distractors =
      spec_.distractors >= 0 ? spec_.distractors : 4 * spec_.n_rooms();
  for (int i = 0; i < n_distractors; ++i) {
    ObjDesc d = fresh_desc();
    place(Entity{d.kind, d.color}, -1, 0);
  }

  if (goal_.clauses[0].kind == ClauseKind::PutNext &&
      clause_predicate(state_, goal_.clauses[0]))
    throw ConfigError("degenerate initial layout");
  for (const Clause& c : goal_.clauses)
    if (clause_predicate(state_, c))
      throw ConfigError("degenerate initial layout");
}

bool Env::solvable_by_bot() const {
  Env probe = *this;
  probe.instruction_ = lang::instruct(probe.goal_);
  probe.checker_.reset(&probe.goal_);
  probe.checker_.observe(probe.state_, 0);
  probe.done_ = false;
  probe.success_ = false;
  try {
    for (int t = 0; t < spec_.h() && !probe.done_; ++t)
      probe.step(bot::plan_next_action(probe));
  } catch (const std::exception&) {
    return false;
  }
  return probe.success_;
}

StepResult Env::step(Action a) {
  if (done_) throw UsageError("step() called on a finished episode");
  GridState& s = state_;
  const Vec2 front{s.agent.x + dir_vec(s.dir).x,
                   s.agent.y + dir_vec(s.dir).y};
  switch (a) {
    case Action::TurnLeft: s.dir = rotate_left(s.dir); break;
    case Action::TurnRight: s.dir = rotate_right(s.dir); break;
    case Action::Forward:
      if (s.in_bounds(front.x, front.y) && !s.at(front).blocks_movement())
        s.agent = front;
      break;
    case Action::Pickup:
      if (s.in_bounds(front.x, front.y) && s.at(front).is_object() &&
          !s.carried) {
        s.carried = s.at(front);
        s.at(front) = Entity{};
      }
      break;
    case Action::Drop:
      if (s.in_bounds(front.x, front.y) && s.at(front).is_empty() &&
          s.carried) {
        s.at(front) = *s.carried;
        s.carried.reset();
      }
      break;
    case Action::Toggle:
      if (s.in_bounds(front.x, front.y) && s.at(front).is_door()) {
        Entity& door = s.at(front);
        switch (door.door) {
          case DoorState::Locked:
            if (s.carried && s.carried->kind == Kind::Key &&
                s.carried->color == door.color)
              door.door = DoorState::Open;
            break;
          case DoorState::Closed: door.door = DoorState::Open; break;
          case DoorState::Open: door.door = DoorState::Closed; break;
        }
      }
      break;
    case Action::Done: break;
  }
  ++s.step_count;
  checker_.observe(s, s.step_count);

  StepResult res;
  if (checker_.satisfied()) {
    done_ = true;
    success_ = true;
    res.reward = spec_.reward_scale *
                 (1.0 - 0.9 * static_cast<double>(s.step_count) / h());
  } else if (s.step_count >= h()) {
    done_ = true;
    success_ = false;
    res.reward = 0.0;
  }
  res.done = done_;
  res.success = success_;
  res.obs = encode_observation(s);
  return res;
}

}  // namespace eager::grid
