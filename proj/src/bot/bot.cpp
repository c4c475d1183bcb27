#include "eager/bot/bot.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <sstream>

#include "eager/util/errors.hpp"

namespace eager::bot {

using grid::Action;
using grid::Clause;
using grid::ClauseKind;
using grid::Dir;
using grid::DoorState;
using grid::Entity;
using grid::GridState;
using grid::Kind;
using grid::ObjDesc;
using grid::Vec2;

namespace {

bool can_stand_or_cross(const GridState& s, Vec2 p) {
  const Entity& e = s.at(p);
  if (e.is_empty()) return true;
  if (e.is_door()) {
    if (e.door == DoorState::Open || e.door == DoorState::Closed) return true;
    // Locked doors are crossable only with the matching key in hand.
    return s.carried && s.carried->kind == Kind::Key &&
           s.carried->color == e.color;
  }
  return false;
}

struct Nav {
  bool reachable = false;
  int dist = 0;
  Action first = Action::Done;  // meaningless when dist == 0
  bool already_facing = false;
};

// BFS over (x, y, dir) to any state facing one of `targets`. Closed and
// key-matched locked doors count as crossable; the returned first action
// substitutes Toggle when the move enters a door that still blocks.
Nav navigate_to_face(const GridState& s, const std::vector<Vec2>& targets) {
  Nav out;
  if (targets.empty()) return out;
  const int w = s.width, h = s.height;
  auto is_target_cell = [&](Vec2 p) {
    for (const Vec2& t : targets)
      if (t == p) return true;
    return false;
  };
  {
    const Vec2 front{s.agent.x + dir_vec(s.dir).x,
                     s.agent.y + dir_vec(s.dir).y};
    if (is_target_cell(front)) {
      out.reachable = true;
      out.already_facing = true;
      return out;
    }
  }
  const int n_states = w * h * 4;
  std::vector<int> parent(n_states, -1);  // previous state id
  std::vector<int8_t> via(n_states, -1);  // action taken to arrive
  auto id_of = [w](Vec2 p, Dir d) {
    return (p.y * w + p.x) * 4 + static_cast<int>(d);
  };
  const int start = id_of(s.agent, s.dir);
  std::deque<std::pair<int, int>> queue = {{start, 0}};
  std::vector<bool> seen(n_states, false);
  seen[start] = true;
  while (!queue.empty()) {
    auto [cur, d] = queue.front();
    queue.pop_front();
    const Vec2 p{(cur / 4) % w, (cur / 4) / w};
    const Dir dir = static_cast<Dir>(cur % 4);
    const Vec2 front{p.x + dir_vec(dir).x, p.y + dir_vec(dir).y};
    if (s.in_bounds(front.x, front.y) && is_target_cell(front)) {
      // Walk back to the first action out of the start state.
      int node = cur, act = -1;
      while (node != start) {
        act = via[node];
        node = parent[node];
      }
      out.reachable = true;
      out.dist = d;
      out.first = act < 0 ? Action::Done : static_cast<Action>(act);
      // Entering a blocking door needs a toggle first.
      if (out.first == Action::Forward) {
        const Vec2 nxt{s.agent.x + dir_vec(s.dir).x,
                       s.agent.y + dir_vec(s.dir).y};
        const Entity& e = s.at(nxt);
        if (e.is_door() && e.door != DoorState::Open)
          out.first = Action::Toggle;
      }
      return out;
    }
    // Expansion order fixes tie-breaks: turn_left, turn_right, forward.
    struct Cand {
      int id;
      Action a;
    };
    Cand cands[3] = {
        {id_of(p, rotate_left(dir)), Action::TurnLeft},
        {id_of(p, rotate_right(dir)), Action::TurnRight},
        {-1, Action::Forward},
    };
    if (s.in_bounds(front.x, front.y) && can_stand_or_cross(s, front))
      cands[2].id = id_of(front, dir);
    for (const Cand& c : cands) {
      if (c.id < 0 || seen[c.id]) continue;
      seen[c.id] = true;
      parent[c.id] = cur;
      via[c.id] = static_cast<int8_t>(c.a);
      queue.push_back({c.id, d + 1});
    }
  }
  return out;
}

std::vector<Vec2> find_cells(const GridState& s, const ObjDesc& d) {
  std::vector<Vec2> out;
  for (int y = 0; y < s.height; ++y)
    for (int x = 0; x < s.width; ++x) {
      const Entity& e = s.at(x, y);
      if (e.kind == d.kind && e.color == d.color) out.push_back({x, y});
    }
  return out;
}

std::vector<Vec2> matching_doors(const GridState& s, grid::Color c) {
  std::vector<Vec2> out;
  for (int y = 0; y < s.height; ++y)
    for (int x = 0; x < s.width; ++x) {
      const Entity& e = s.at(x, y);
      if (e.is_door() && e.color == c) out.push_back({x, y});
    }
  return out;
}

std::vector<Vec2> empty_cells_adjacent_to(const GridState& s,
                                          const std::vector<Vec2>& anchors) {
  std::vector<Vec2> out;
  for (const Vec2& a : anchors) {
    const Vec2 nbrs[4] = {{a.x + 1, a.y}, {a.x - 1, a.y},
                          {a.x, a.y + 1}, {a.x, a.y - 1}};
    for (const Vec2& n : nbrs)
      if (s.in_bounds(n.x, n.y) && s.at(n).is_empty()) out.push_back(n);
  }
  return out;
}

bool adjacent_to_any(Vec2 p, const std::vector<Vec2>& cells) {
  for (const Vec2& c : cells)
    if (std::abs(p.x - c.x) + std::abs(p.y - c.y) == 1) return true;
  return false;
}

Action go_and(const GridState& s, const std::vector<Vec2>& targets,
              Action finisher) {
  Nav nav = navigate_to_face(s, targets);
  if (!nav.reachable) throw PlanningError("no path to target");
  return nav.already_facing ? finisher : nav.first;
}

// Unload whatever is carried onto a free cell, avoiding `keep_clear`.
Action drop_carried(const GridState& s, const std::vector<Vec2>& keep_clear) {
  std::vector<Vec2> spots;
  for (int y = 0; y < s.height; ++y)
    for (int x = 0; x < s.width; ++x) {
      const Vec2 p{x, y};
      if (!s.at(p).is_empty()) continue;
      if (adjacent_to_any(p, keep_clear)) continue;
      spots.push_back(p);
    }
  return go_and(s, spots, Action::Drop);
}

Action plan_clause(const grid::Env& env, const Clause& c) {
  const GridState& s = env.state();
  switch (c.kind) {
    case ClauseKind::PickUp: {
      if (s.carried) return drop_carried(s, {});
      auto cells = find_cells(s, c.move);
      if (cells.empty()) throw PlanningError("pickup target missing");
      return go_and(s, cells, Action::Pickup);
    }
    case ClauseKind::Open:
    case ClauseKind::Unlock: {
      auto doors = matching_doors(s, c.door_color);
      if (doors.empty()) throw PlanningError("target door missing");
      // Prefer a door that is not already open.
      std::vector<Vec2> shut;
      for (const Vec2& d : doors)
        if (s.at(d).door != DoorState::Open) shut.push_back(d);
      if (shut.empty()) return Action::Done;  // predicate already holds
      bool needs_key = false;
      for (const Vec2& d : shut)
        if (s.at(d).door == DoorState::Locked) needs_key = true;
      const bool has_key = s.carried && s.carried->kind == Kind::Key &&
                           s.carried->color == c.door_color;
      if (needs_key && !has_key) {
        if (s.carried) return drop_carried(s, {});
        auto keys = find_cells(s, {Kind::Key, c.door_color});
        if (keys.empty()) throw PlanningError("key missing");
        return go_and(s, keys, Action::Pickup);
      }
      return go_and(s, shut, Action::Toggle);
    }
    case ClauseKind::PutNext: {
      auto anchors = find_cells(s, c.anchor);
      if (anchors.empty()) throw PlanningError("anchor missing");
      const bool holding_move = s.carried &&
                                s.carried->kind == c.move.kind &&
                                s.carried->color == c.move.color;
      if (holding_move) {
        auto spots = empty_cells_adjacent_to(s, anchors);
        if (spots.empty()) throw PlanningError("no drop spot next to anchor");
        return go_and(s, spots, Action::Drop);
      }
      if (s.carried) return drop_carried(s, anchors);
      auto movers = find_cells(s, c.move);
      if (movers.empty()) throw PlanningError("move object missing");
      return go_and(s, movers, Action::Pickup);
    }
  }
  throw PlanningError("bad clause");
}

}  // namespace

Action plan_next_action(const grid::Env& env) {
  const grid::Goal& goal = env.goal();
  if (!goal.is_sequence()) return plan_clause(env, goal.clauses.at(0));
  const int stage = env.checker().stage();
  if (stage >= 2) throw UsageError("planning a finished episode");
  const Clause& active = stage == 0 ? goal.clauses[goal.first_exec()]
                                    : goal.clauses[goal.second_exec()];
  // A second clause that already holds only needs re-verification on the
  // next tick; any action works, `done` wastes nothing else.
  if (stage == 1 && clause_predicate(env.state(), active))
    return Action::Done;
  return plan_clause(env, active);
}

void NoiseDistribution::validate() const {
  if (support.empty()) throw ConfigError("noise distribution is empty");
  double total = 0.0;
  for (auto [p, w] : support) {
    if (p < 0.0 || p > 1.0)
      throw ConfigError("noise probability outside [0,1]");
    if (w < 0.0) throw ConfigError("negative noise weight");
    total += w;
  }
  if (std::fabs(total - 1.0) > 1e-9)
    throw ConfigError("noise weights must sum to 1");
}

double NoiseDistribution::sample(Rng& rng) const {
  const double u = rng.real01();
  double acc = 0.0;
  for (auto [p, w] : support) {
    acc += w;
    if (u < acc) return p;
  }
  return support.back().first;
}

std::string NoiseDistribution::to_string() const {
  std::ostringstream ss;
  for (size_t i = 0; i < support.size(); ++i) {
    if (i) ss << ',';
    ss << support[i].first << ':' << support[i].second;
  }
  return ss.str();
}

NoiseDistribution NoiseDistribution::paper_default() {
  return NoiseDistribution{{{0.0, 0.45}, {0.1, 0.35}, {0.4, 0.1}, {0.8, 0.1}}};
}

NoiseDistribution NoiseDistribution::parse(const std::string& text) {
  NoiseDistribution nd;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    auto colon = item.find(':');
    if (colon == std::string::npos)
      throw ConfigError("noise spec must look like p:weight,...: " + text);
    nd.support.push_back(
        {std::stod(item.substr(0, colon)), std::stod(item.substr(colon + 1))});
  }
  nd.validate();
  return nd;
}

std::optional<Trajectory> generate_trajectory(const grid::TaskSpec& spec,
                                              uint64_t seed,
                                              const NoiseDistribution& noise) {
  noise.validate();
  grid::Env env;
  auto [instruction, obs] = env.reset(spec, seed);
  Rng rng(derive_seed(seed, "bot-noise"));
  Trajectory traj;
  traj.task = spec.name();
  traj.instruction = instruction;
  traj.seed = seed;
  traj.noise_p = noise.sample(rng);
  // Random substitutions exclude toggle and done.
  static const Action kRandomActions[5] = {Action::TurnRight,
                                           Action::TurnLeft, Action::Forward,
                                           Action::Pickup, Action::Drop};
  while (!env.done()) {
    Action a;
    if (traj.noise_p > 0.0 && rng.bernoulli(traj.noise_p)) {
      a = kRandomActions[rng.below(5)];
    } else {
      try {
        a = plan_next_action(env);
      } catch (const PlanningError&) {
        return std::nullopt;
      }
    }
    traj.observations.push_back(obs);
    traj.actions.push_back(a);
    obs = env.step(a).obs;
  }
  if (!env.success()) return std::nullopt;
  traj.success = true;
  return traj;
}

bool replay_matches(const grid::TaskSpec& spec, const Trajectory& traj) {
  grid::Env env;
  auto [instruction, obs] = env.reset(spec, traj.seed);
  if (instruction != traj.instruction) return false;
  for (int i = 0; i < traj.length(); ++i) {
    if (env.done()) return false;
    if (!(obs == traj.observations[i])) return false;
    obs = env.step(traj.actions[i]).obs;
  }
  return env.done() && env.success() == traj.success;
}

}  // namespace eager::bot
