#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "eager/util/errors.hpp"

namespace eager::grid {

enum class Kind : uint8_t { Empty, Wall, Box, Ball, Key, Door };
enum class Color : uint8_t { Red, Green, Blue, Purple, Yellow, Grey };
enum class DoorState : uint8_t { Open, Closed, Locked };

constexpr int kNumColors = 6;

struct Entity {
  Kind kind = Kind::Empty;
  Color color = Color::Red;
  DoorState door = DoorState::Open;

  bool is_object() const {
    return kind == Kind::Box || kind == Kind::Ball || kind == Kind::Key;
  }
  bool is_door() const { return kind == Kind::Door; }
  bool is_empty() const { return kind == Kind::Empty; }
  // Transparent and walkable only when open.
  bool blocks_movement() const {
    if (kind == Kind::Empty) return false;
    if (kind == Kind::Door) return door != DoorState::Open;
    return true;
  }
  bool blocks_sight() const {
    return kind == Kind::Wall ||
           (kind == Kind::Door && door != DoorState::Open);
  }
};

enum class Dir : uint8_t { N, E, S, W };

struct Vec2 {
  int x = 0, y = 0;
  bool operator==(const Vec2&) const = default;
};

inline Vec2 dir_vec(Dir d) {
  switch (d) {
    case Dir::N: return {0, -1};
    case Dir::E: return {1, 0};
    case Dir::S: return {0, 1};
    case Dir::W: return {-1, 0};
  }
  return {0, 0};
}

inline Dir rotate_left(Dir d) {
  return static_cast<Dir>((static_cast<int>(d) + 3) % 4);
}
inline Dir rotate_right(Dir d) {
  return static_cast<Dir>((static_cast<int>(d) + 1) % 4);
}

enum class Action : uint8_t {
  TurnLeft = 0,
  TurnRight,
  Forward,
  Pickup,
  Drop,
  Toggle,
  Done
};
constexpr int kNumActions = 7;
const char* action_name(Action a);

struct GridState {
  int width = 0, height = 0;
  std::vector<Entity> cells;
  Vec2 agent;
  Dir dir = Dir::N;
  std::optional<Entity> carried;
  int step_count = 0;
  uint64_t seed = 0;

  bool in_bounds(int x, int y) const {
    return x >= 0 && x < width && y >= 0 && y < height;
  }
  Entity& at(int x, int y) { return cells[y * width + x]; }
  const Entity& at(int x, int y) const { return cells[y * width + x]; }
  Entity& at(Vec2 p) { return at(p.x, p.y); }
  const Entity& at(Vec2 p) const { return at(p.x, p.y); }
};

// Egocentric symbolic observation: 8x8 cells, 3 ids per cell
// (shape, color, door state). The agent sits on the bottom row, column 3,
// facing up the view. Ids follow the fixed table below; a closed green door
// encodes as (4, 1, 1), a visible empty cell as (1, 0, 0), anything occluded
// or out of bounds as (0, 0, 0).
constexpr int kViewSize = 8;
constexpr int kViewAgentX = 3;
constexpr int kObsLen = kViewSize * kViewSize * 3;

constexpr uint8_t kShapeUnseen = 0;
constexpr uint8_t kShapeEmpty = 1;
constexpr uint8_t kShapeWall = 2;
// id 3 reserved
constexpr uint8_t kShapeDoor = 4;
constexpr uint8_t kShapeKey = 5;
constexpr uint8_t kShapeBall = 6;
constexpr uint8_t kShapeBox = 7;

uint8_t shape_id(Kind k);

struct Observation {
  std::array<uint8_t, kObsLen> data{};

  uint8_t& at(int vx, int vy, int c) {
    return data[(vy * kViewSize + vx) * 3 + c];
  }
  uint8_t at(int vx, int vy, int c) const {
    return data[(vy * kViewSize + vx) * 3 + c];
  }
  bool operator==(const Observation&) const = default;
};

const char* color_name(Color c);
const char* kind_noun(Kind k);  // ball/box/key/door

}  // namespace eager::grid
