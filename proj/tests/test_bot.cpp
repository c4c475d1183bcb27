#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <map>

#include "eager/bot/bot.hpp"

using namespace eager;
using namespace eager::bot;
using grid::Action;
using grid::TaskSpec;

TEST_CASE("noiseless bot solves sampled instances of every task") {
  for (const char* name : {"PutNextTo-Local", "PickUp-Medium", "Open-Medium",
                           "Unlock-Medium", "Sequence-Medium"}) {
    const TaskSpec spec = TaskSpec::parse(name);
    for (uint64_t seed = 0; seed < 25; ++seed) {
      grid::Env env;
      env.reset(spec, seed);
      int steps = 0;
      while (!env.done()) {
        env.step(plan_next_action(env));
        ++steps;
      }
      INFO(name, " seed ", seed);
      CHECK(env.success());
      CHECK(steps <= spec.h());
    }
  }
}

TEST_CASE("noise distribution: defaults, parsing, validation") {
  NoiseDistribution d = NoiseDistribution::paper_default();
  d.validate();
  REQUIRE(d.support.size() == 4);
  CHECK(d.support[0] == std::pair{0.0, 0.45});
  CHECK(d.support[1] == std::pair{0.1, 0.35});
  CHECK(d.support[2] == std::pair{0.4, 0.1});
  CHECK(d.support[3] == std::pair{0.8, 0.1});

  NoiseDistribution p = NoiseDistribution::parse("0:0.45,0.1:0.35,0.4:0.1,0.8:0.1");
  CHECK(p.support == d.support);
  CHECK_THROWS_AS(NoiseDistribution::parse("0:0.5,0.1:0.4"), ConfigError);

  // sampled frequencies track the weights
  Rng rng(17);
  std::map<double, int> counts;
  for (int i = 0; i < 20000; ++i) counts[d.sample(rng)]++;
  CHECK(counts[0.0] / 20000.0 == doctest::Approx(0.45).epsilon(0.05));
  CHECK(counts[0.1] / 20000.0 == doctest::Approx(0.35).epsilon(0.05));
}

TEST_CASE("zero-noise generation always succeeds and replays") {
  NoiseDistribution none{{{0.0, 1.0}}};
  const TaskSpec spec = TaskSpec::parse("PutNextTo-Local");
  for (uint64_t seed = 0; seed < 40; ++seed) {
    auto traj = generate_trajectory(spec, seed, none);
    REQUIRE(traj.has_value());
    CHECK(traj->success);
    CHECK(traj->noise_p == 0.0);
    CHECK(traj->length() >= 1);
    CHECK(traj->length() <= spec.h());
    CHECK(replay_matches(spec, *traj));
  }
}

TEST_CASE("noisy generation keeps only successes and replays exactly") {
  NoiseDistribution noise = NoiseDistribution::paper_default();
  const TaskSpec spec = TaskSpec::parse("PutNextTo-Local");
  int kept = 0;
  for (uint64_t seed = 100; seed < 160; ++seed) {
    auto traj = generate_trajectory(spec, seed, noise);
    if (!traj) continue;
    ++kept;
    CHECK(traj->success);
    CHECK(replay_matches(spec, *traj));
    // noise never injects toggle or done
    if (traj->noise_p > 0) {
      for (auto a : traj->actions) {
        // planner may emit toggle legitimately; just check the recorded
        // episode still replays, and spot-check the action range
        CHECK(static_cast<int>(a) >= 0);
        CHECK(static_cast<int>(a) < grid::kNumActions);
      }
    }
  }
  CHECK(kept > 30);  // most seeds survive under the default noise mix
}

TEST_CASE("high noise retains fewer trajectories than low noise") {
  const TaskSpec spec = TaskSpec::parse("PutNextTo-Local");
  auto retained = [&](double p) {
    NoiseDistribution nd{{{p, 1.0}}};
    int ok = 0;
    const int trials = 250;
    for (uint64_t seed = 0; seed < trials; ++seed)
      if (generate_trajectory(spec, seed, nd)) ++ok;
    return static_cast<double>(ok) / trials;
  };
  const double keep_low = retained(0.1);
  const double keep_high = retained(0.8);
  CHECK(keep_low > keep_high);
}

TEST_CASE("toggle and done never appear as random substitutions") {
  // With probability 1 of substitution the plan is never consulted, so
  // any toggle/done in the stream would come from the noise sampler.
  NoiseDistribution always{{{1.0, 1.0}}};
  const TaskSpec spec = TaskSpec::parse("PutNextTo-Local");
  int episodes = 0;
  for (uint64_t seed = 0; seed < 200 && episodes < 5; ++seed) {
    grid::Env env;
    env.reset(spec, seed);
    Rng rng(derive_seed(seed, "bot-noise"));
    NoiseDistribution nd = always;
    auto traj = generate_trajectory(spec, seed, nd);
    if (!traj) continue;  // random walks rarely succeed; fine
    ++episodes;
    for (auto a : traj->actions) {
      CHECK(a != Action::Toggle);
      CHECK(a != Action::Done);
    }
  }
}

TEST_CASE("unlock planning fetches the key first") {
  const TaskSpec spec = TaskSpec::parse("Unlock-Medium");
  grid::Env env;
  env.reset(spec, 3);
  const grid::Color key_color = env.goal().clauses[0].door_color;
  bool picked_key = false;
  while (!env.done()) {
    env.step(plan_next_action(env));
    if (env.state().carried && env.state().carried->kind == grid::Kind::Key &&
        env.state().carried->color == key_color)
      picked_key = true;
  }
  CHECK(env.success());
  CHECK(picked_key);
}
