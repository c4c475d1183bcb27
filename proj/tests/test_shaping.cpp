#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "eager/shaping/shaping.hpp"

using namespace eager;
using namespace eager::shaping;
using grid::TaskSpec;

namespace {

// Backend that answers a scripted subset of questions at given steps with
// given confidences; everything else gets no_answer.
class ScriptedQa : public QaBackend {
 public:
  struct Entry {
    int question_id;
    int step;
    double confidence;
  };
  explicit ScriptedQa(std::vector<Entry> plan) : plan_(std::move(plan)) {}

  std::vector<QaAnswer> answer(
      const std::vector<const lang::Question*>& qs,
      const EpisodeContext& ctx) override {
    std::vector<QaAnswer> out;
    for (const auto* q : qs) {
      QaAnswer a{lang::kNoAnswerToken, 1.0};
      for (const auto& e : plan_)
        if (&all_->at(e.question_id) == q && ctx.t >= e.step)
          a = {q->answer, e.confidence};
      out.push_back(a);
    }
    return out;
  }
  std::string name() const override { return "scripted"; }
  void bind(const std::vector<lang::Question>* all) { all_ = all; }

 private:
  std::vector<Entry> plan_;
  const std::vector<lang::Question>* all_ = nullptr;
};

// Drives a successful bot episode through the shaper with the oracle and
// returns (discounted shaped return, gamma^N * r_N).
struct EpisodeReturns {
  double shaped = 0.0;
  double unshaped_terminal = 0.0;
  int n = 0;
  double total_bonus = 0.0;
};

EpisodeReturns run_oracle_episode(const TaskSpec& spec, uint64_t seed,
                                  double lambda, double gamma) {
  grid::Env env;
  auto [instr, obs0] = env.reset(spec, seed);
  OracleQa oracle;
  ShapingConfig cfg;
  cfg.lambda = lambda;
  cfg.gamma = gamma;
  EpisodeShaper shaper(cfg, &oracle);
  shaper.init_episode(instr);
  std::vector<grid::Observation> observations = {obs0};
  std::vector<grid::Action> actions;
  EpisodeReturns ret;
  int t = 0;
  double discount = 1.0;
  while (!env.done()) {
    grid::Action a = bot::plan_next_action(env);
    auto res = env.step(a);
    actions.push_back(a);
    ++t;
    EpisodeContext ctx;
    ctx.observations = &observations;
    ctx.actions = &actions;
    ctx.goal = &env.goal();
    ctx.events = &env.checker().events();
    ctx.t = t;
    double r_prime = shaper.shape_step(res.reward, ctx);
    if (res.done && res.success) {
      r_prime = shaper.finish_episode(r_prime, t, true);
      ret.unshaped_terminal = std::pow(gamma, t) * res.reward;
    }
    discount *= gamma;
    ret.shaped += discount * r_prime;
    observations.push_back(res.obs);
  }
  ret.n = t;
  ret.total_bonus = shaper.ledger().total_bonus();
  return ret;
}

}  // namespace

TEST_CASE("lambda formulas hit the reference table") {
  // table rows: k, H, N, lambda
  auto r = [](int n, int h) { return 20.0 * (1.0 - 0.9 * n / h); };
  CHECK(lambda_for_task(0.99, 40, r(40, 128), 4) ==
        doctest::Approx(2.4).epsilon(0.05 / 2.4));
  CHECK(lambda_for_task(0.99, 80, r(80, 256), 4) ==
        doctest::Approx(1.6).epsilon(0.05 / 1.6));
  CHECK(lambda_for_task(0.99, 40, r(40, 128), 2) ==
        doctest::Approx(4.8).epsilon(0.05 / 4.8));
  CHECK(lambda_for_task(0.99, 185, r(185, 512), 9) ==
        doctest::Approx(0.23).epsilon(0.05 / 0.23));

  // conservative bound and its shape
  CHECK(lambda_bound(0.99, 128, 2.0, 4) == doctest::Approx(0.1381).epsilon(1e-2));
  CHECK(lambda_bound(0.99, 128, 2.0, 1) ==
        doctest::Approx(std::pow(0.99, 128) * 2.0));
  CHECK(lambda_bound(0.99, 128, 2.0, 4) > lambda_bound(0.99, 256, 2.0, 4));
  CHECK(lambda_bound(0.99, 128, 2.0, 4) > lambda_bound(0.99, 128, 2.0, 5));
  CHECK_THROWS_AS(lambda_bound(0.99, 128, 2.0, 0), ConfigError);

  CHECK(auto_lambda(TaskSpec::parse("PutNextTo-Local")) ==
        doctest::Approx(2.4).epsilon(0.05));
  CHECK(auto_lambda(TaskSpec::parse("Unlock-Medium")) ==
        doctest::Approx(4.8).epsilon(0.05));
}

TEST_CASE("question set: init, removal, single reward per question") {
  lang::Tokens instr =
      lang::tokenize("put the red ball next to the blue box");
  ScriptedQa backend({{0, 2, 0.8}, {1, 2, 0.5}, {2, 5, 0.9}});
  ShapingConfig cfg;
  cfg.lambda = 2.4;
  EpisodeShaper shaper(cfg, &backend);
  shaper.init_episode(instr);
  backend.bind(&shaper.questions());
  CHECK(shaper.active_count() == 4);

  EpisodeContext ctx;  // scripted backend ignores the prefix
  ctx.t = 1;
  CHECK(shaper.shape_step(0.0, ctx) == 0.0);
  CHECK(shaper.active_count() == 4);

  ctx.t = 2;  // two questions answered in one sweep, bonuses summed
  const double r2 = shaper.shape_step(0.0, ctx);
  CHECK(r2 == doctest::Approx(2.4 * 0.8 + 2.4 * 0.5));
  CHECK(shaper.active_count() == 2);

  ctx.t = 3;  // already removed: no double reward
  CHECK(shaper.shape_step(0.0, ctx) == 0.0);

  ctx.t = 5;
  CHECK(shaper.shape_step(1.5, ctx) == doctest::Approx(1.5 + 2.4 * 0.9));
  CHECK(shaper.active_count() == 1);

  // bonus arithmetic example: confidence 0.8 at lambda 2.4 pays 1.92
  CHECK(2.4 * 0.8 == doctest::Approx(1.92));

  const auto steps = shaper.ledger().bonus_steps();
  CHECK(steps == std::vector<int>{2, 5});
}

TEST_CASE("simple-reward ablation pays binary bonuses") {
  lang::Tokens instr = lang::tokenize("open the green door");
  ScriptedQa backend({{0, 1, 0.37}});
  ShapingConfig cfg;
  cfg.lambda = 2.0;
  cfg.simple_reward = true;
  EpisodeShaper shaper(cfg, &backend);
  shaper.init_episode(instr);
  backend.bind(&shaper.questions());
  EpisodeContext ctx;
  ctx.t = 1;
  CHECK(shaper.shape_step(0.0, ctx) == doctest::Approx(2.0));  // not 0.74
}

TEST_CASE("neutralisation identities") {
  EpisodeLedger ledger;
  SUBCASE("no bonuses leaves the reward unchanged") {
    CHECK(neutralise(ledger, 14.375, 40, 0.99) == 14.375);
  }
  SUBCASE("single bonus at t subtracts gamma^(t-N) b") {
    ledger.records.push_back({7, 0.0, 1.92, {0}});
    const double expect = 14.375 - std::pow(0.99, 7 - 40) * 1.92;
    CHECK(neutralise(ledger, 14.375, 40, 0.99) == doctest::Approx(expect));
  }
  SUBCASE("terminal-step bonus cancels exactly") {
    ledger.records.push_back({40, 0.0, 3.0, {0}});
    CHECK(neutralise(ledger, 14.375 + 3.0, 40, 0.99) ==
          doctest::Approx(14.375));
  }
}

TEST_CASE("usage error when neutralising a failed episode") {
  lang::Tokens instr = lang::tokenize("open the red door");
  OracleQa oracle;
  ShapingConfig cfg;
  cfg.lambda = 1.0;
  EpisodeShaper shaper(cfg, &oracle);
  shaper.init_episode(instr);
  CHECK_THROWS_AS(shaper.finish_episode(0.0, 10, false), UsageError);
}

TEST_CASE("config validation") {
  ShapingConfig bad;
  bad.lambda = 0.0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad.lambda = 1.0;
  bad.gamma = 1.5;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("policy invariance: shaped return equals gamma^N r_N exactly") {
  Rng rng(99);
  int episodes = 0;
  for (uint64_t seed = 0; episodes < 60; ++seed) {
    const double lambda = 0.05 + 9.95 * rng.real01();
    auto ret = run_oracle_episode(TaskSpec::parse("PutNextTo-Local"), seed,
                                  lambda, 0.99);
    ++episodes;
    REQUIRE(ret.unshaped_terminal > 0.0);
    CHECK(std::fabs(ret.shaped - ret.unshaped_terminal) <=
          1e-9 * std::fabs(ret.unshaped_terminal));
  }
}

TEST_CASE("oracle answers all questions on successful episodes") {
  for (const char* name : {"PutNextTo-Local", "Unlock-Medium"}) {
    const TaskSpec spec = TaskSpec::parse(name);
    for (uint64_t seed = 0; seed < 5; ++seed) {
      auto ret = run_oracle_episode(spec, seed, 1.0, 0.99);
      // every question answered exactly once with confidence 1
      CHECK(ret.total_bonus ==
            doctest::Approx(spec.kind == grid::TaskKind::PutNextTo ? 4.0
                                                                   : 2.0));
    }
  }
}

TEST_CASE("score_trajectory equals ledger bonus over lambda") {
  const TaskSpec spec = TaskSpec::parse("PutNextTo-Local");
  bot::NoiseDistribution none{{{0.0, 1.0}}};
  OracleQa oracle;
  for (uint64_t seed = 0; seed < 5; ++seed) {
    auto traj = bot::generate_trajectory(spec, seed, none);
    REQUIRE(traj);
    const double m = score_trajectory(spec, *traj, oracle);
    CHECK(m == doctest::Approx(4.0).epsilon(1e-12));  // k with confidence 1
    auto ret = run_oracle_episode(spec, seed, 3.7, 0.99);
    CHECK(m * 3.7 == doctest::Approx(ret.total_bonus).epsilon(1e-9));
  }
}

TEST_CASE("oracle waits for events, then answers with full confidence") {
  const TaskSpec spec = TaskSpec::parse("Open-Medium");
  grid::Env env;
  auto [instr, obs0] = env.reset(spec, 12);
  OracleQa oracle;
  ShapingConfig cfg;
  cfg.lambda = 1.0;
  EpisodeShaper shaper(cfg, &oracle);
  shaper.init_episode(instr);
  REQUIRE(shaper.questions().size() == 2);

  std::vector<grid::Observation> observations = {obs0};
  std::vector<grid::Action> actions;
  bool saw_unanswered_phase = false;
  int t = 0;
  while (!env.done()) {
    grid::Action a = bot::plan_next_action(env);
    auto res = env.step(a);
    actions.push_back(a);
    ++t;
    EpisodeContext ctx;
    ctx.observations = &observations;
    ctx.actions = &actions;
    ctx.goal = &env.goal();
    ctx.events = &env.checker().events();
    ctx.t = t;
    const double before = shaper.ledger().total_bonus();
    shaper.shape_step(res.reward, ctx);
    if (shaper.active_count() == 2 && before == 0.0)
      saw_unanswered_phase = true;
    observations.push_back(res.obs);
  }
  CHECK(env.success());
  CHECK(saw_unanswered_phase);        // no_answer until the door opens
  CHECK(shaper.active_count() == 0);  // then both resolve
}

TEST_CASE("no-noanswer oracle answers immediately") {
  lang::Tokens instr = lang::tokenize("open the green door");
  OracleQa oracle(/*suppress_no_answer=*/true);
  ShapingConfig cfg;
  cfg.lambda = 1.0;
  EpisodeShaper shaper(cfg, &oracle);
  shaper.init_episode(instr);
  grid::Goal goal;
  grid::Clause c;
  c.kind = grid::ClauseKind::Open;
  c.door_color = grid::Color::Green;
  goal.clauses = {c};
  grid::EpisodeEvents events;  // nothing happened yet
  EpisodeContext ctx;
  ctx.goal = &goal;
  ctx.events = &events;
  ctx.t = 1;
  CHECK(shaper.shape_step(0.0, ctx) == doctest::Approx(2.0));
  CHECK(shaper.active_count() == 0);
}

TEST_CASE("bound safety on adversarial failed episodes") {
  Rng rng(7);
  for (int it = 0; it < 2000; ++it) {
    const int k = 1 + static_cast<int>(rng.below(9));
    const int h = 16 + static_cast<int>(rng.below(512));
    const double gamma = 0.9 + 0.0999 * rng.real01();
    const double r_h = 2.0;  // scaled minimum success reward
    const double lambda = 0.99 * lambda_bound(gamma, h, r_h, k);
    // all k questions answered at t=1 with confidence 1
    const double shaped_return = std::pow(gamma, 1) * lambda * k;
    CHECK(shaped_return < std::pow(gamma, h) * r_h);
  }
}
