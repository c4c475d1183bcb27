#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <filesystem>
#include <fstream>

#include "eager/dataset/dataset.hpp"

using namespace eager;
using namespace eager::dataset;

TEST_CASE("keep probability matches the logistic formula") {
  auto expect = [](double c) {
    return 0.325 / (1.0 + std::exp(6.75 - 3.0 * c)) + 0.095;
  };
  for (double c : {0.0, 1.0, 2.0, 3.0, 5.0, 10.0})
    CHECK(std::fabs(keep_probability(c) - expect(c)) < 1e-12);
  CHECK(keep_probability(0) == doctest::Approx(0.09538).epsilon(1e-4));
  CHECK(keep_probability(2.25) == doctest::Approx(0.2575).epsilon(1e-10));
  CHECK(keep_probability(1000.0) == doctest::Approx(0.420));
  // monotone increasing
  double prev = -1.0;
  for (double c = 0.0; c <= 12.0; c += 0.25) {
    CHECK(keep_probability(c) > prev);
    prev = keep_probability(c);
  }
}

TEST_CASE("empirical negative retention tracks keep_probability") {
  for (int c : {0, 1, 2, 3, 5}) {
    Rng rng(1000 + c);
    const int n = 10000;
    int kept = 0;
    for (int i = 0; i < n; ++i) kept += retain_negative(c, rng);
    const double p = keep_probability(c);
    const double se = std::sqrt(p * (1.0 - p) / n);
    CHECK(std::fabs(kept / static_cast<double>(n) - p) <= 3.0 * se);
  }
}

TEST_CASE("words in common is a multiset intersection") {
  auto a = lang::tokenize("take the red box next to the blue ball");
  auto b = lang::tokenize("take the red box next to the blue key");
  CHECK(words_in_common(a, b) == 8);  // both "the" occurrences count
  CHECK(words_in_common(a, a) == static_cast<int>(a.size()));
  CHECK(words_in_common(lang::tokenize("red red red"),
                        lang::tokenize("red red blue")) == 2);
  // mask tokens are excluded
  auto masked = lang::tokenize("take the <<question>> box");
  CHECK(words_in_common(masked, masked) == 3);
}

TEST_CASE("build produces positives, negatives, and a manifest") {
  BuildConfig cfg;
  cfg.tasks = {grid::TaskSpec::parse("PutNextTo-Local")};
  cfg.n_per_task = 40;
  cfg.seed = 5;
  QaDataset ds = build(cfg);
  CHECK(ds.trajectories.size() == 40);

  int positives = 0, negatives = 0;
  for (const auto& e : ds.examples) {
    const auto& traj = ds.trajectories.at(e.traj_id);
    if (e.answer == lang::kNoAnswerToken) {
      ++negatives;
      // negative questions come from a different goal
      lang::Tokens restored = e.question.tokens;
      restored[e.question.mask_pos] = "?";
      CHECK(restored != traj.instruction);
    } else {
      ++positives;
      // positive answers re-substitute into the trajectory's instruction
      CHECK(e.question.tokens.size() == traj.instruction.size());
      CHECK(traj.instruction.at(e.question.mask_pos) == e.answer);
    }
  }
  CHECK(positives == 40 * 4);
  CHECK(negatives > 0);
  CHECK(ds.manifest.at("counts").at("positives") == positives);
  CHECK(ds.manifest.at("counts").at("negatives") == negatives);
  // discard stats cover the default noise support
  CHECK(ds.manifest.at("discard_rates").size() >= 3);
  // answer vocab for this task: 6 colours + ball/box/key + no_answer
  CHECK(ds.answers.size() == 10);
}

TEST_CASE("mixed-task build interleaves and window spans tasks") {
  BuildConfig cfg;
  cfg.tasks = {grid::TaskSpec::parse("PutNextTo-Local"),
               grid::TaskSpec::parse("Open-Medium")};
  cfg.n_per_task = 10;
  cfg.seed = 9;
  QaDataset ds = build(cfg);
  REQUIRE(ds.trajectories.size() == 20);
  CHECK(ds.trajectories[0].task == "PutNextTo-Local");
  CHECK(ds.trajectories[1].task == "Open-Medium");
  CHECK(ds.answers.size() == 11);  // door joins the noun set
}

TEST_CASE("save/load round trip preserves everything") {
  BuildConfig cfg;
  cfg.tasks = {grid::TaskSpec::parse("PutNextTo-Local")};
  cfg.n_per_task = 10;
  cfg.seed = 77;
  QaDataset ds = build(cfg);
  const std::string dir = "/tmp/eager_ds_roundtrip";
  std::filesystem::remove_all(dir);
  save(ds, dir, false);
  CHECK_THROWS_AS(save(ds, dir, false), DataError);  // no silent overwrite
  save(ds, dir, true);

  QaDataset back = load(dir);
  REQUIRE(back.trajectories.size() == ds.trajectories.size());
  REQUIRE(back.examples.size() == ds.examples.size());
  CHECK(back.answers.answers == ds.answers.answers);
  CHECK(back.vocab.tokens == ds.vocab.tokens);
  for (size_t i = 0; i < ds.trajectories.size(); ++i) {
    CHECK(back.trajectories[i].instruction == ds.trajectories[i].instruction);
    CHECK(back.trajectories[i].actions == ds.trajectories[i].actions);
    REQUIRE(back.trajectories[i].observations.size() ==
            ds.trajectories[i].observations.size());
    for (size_t j = 0; j < ds.trajectories[i].observations.size(); ++j)
      CHECK(back.trajectories[i].observations[j] ==
            ds.trajectories[i].observations[j]);
  }
  for (size_t i = 0; i < ds.examples.size(); ++i) {
    CHECK(back.examples[i].question.tokens == ds.examples[i].question.tokens);
    CHECK(back.examples[i].answer == ds.examples[i].answer);
    CHECK(back.examples[i].split == ds.examples[i].split);
  }
  std::filesystem::remove_all(dir);
}

TEST_CASE("version bump is rejected loudly") {
  BuildConfig cfg;
  cfg.tasks = {grid::TaskSpec::parse("PutNextTo-Local")};
  cfg.n_per_task = 2;
  cfg.seed = 3;
  QaDataset ds = build(cfg);
  const std::string dir = "/tmp/eager_ds_version";
  std::filesystem::remove_all(dir);
  save(ds, dir, false);
  {
    nlohmann::json m;
    std::ifstream in(dir + "/manifest.json");
    in >> m;
    m["version"] = 2;
    std::ofstream out(dir + "/manifest.json");
    out << m.dump();
  }
  CHECK_THROWS_AS(load(dir), DataError);
  std::filesystem::remove_all(dir);
}

TEST_CASE("disjoint goal holdout keeps test goals out of training") {
  BuildConfig cfg;
  cfg.tasks = {grid::TaskSpec::parse("PutNextTo-Local")};
  cfg.n_per_task = 120;
  cfg.seed = 11;
  cfg.disjoint_goals = true;
  cfg.disjoint_fraction = 0.2;
  QaDataset ds = build(cfg);
  std::set<std::string> train_goals, disjoint_goals;
  for (const auto& e : ds.examples) {
    const std::string g = lang::join(ds.trajectories[e.traj_id].instruction);
    if (e.split == Split::TestDisjoint)
      disjoint_goals.insert(g);
    else
      train_goals.insert(g);
  }
  CHECK(!disjoint_goals.empty());
  for (const auto& g : disjoint_goals) CHECK(train_goals.count(g) == 0);
}

TEST_CASE("generation budget failure reports progress") {
  BuildConfig cfg;
  cfg.tasks = {grid::TaskSpec::parse("PutNextTo-Local")};
  cfg.n_per_task = 50;
  cfg.budget_factor = 1;  // cannot possibly retain enough at p=0.8
  cfg.noise = bot::NoiseDistribution{{{0.8, 1.0}}};
  cfg.seed = 2;
  CHECK_THROWS_AS(build(cfg), DataError);
}
