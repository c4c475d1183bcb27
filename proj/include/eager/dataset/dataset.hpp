#pragma once

#include <map>
#include <string>
#include <vector>

#include "json.hpp"

#include "eager/bot/bot.hpp"
#include "eager/lang/lang.hpp"

namespace eager::dataset {

// Retention probability for a no_answer candidate as a function of the
// number of words the two goals share.
double keep_probability(double words_in_common);
int words_in_common(const lang::Tokens& a, const lang::Tokens& b);
bool retain_negative(int c, Rng& rng);

enum class Split { Train = 0, TestSeen = 1, TestDisjoint = 2 };

struct QaExample {
  lang::Question question;
  int traj_id = 0;
  std::string answer;  // ground truth, possibly no_answer
  Split split = Split::Train;
};

struct BuildConfig {
  std::vector<grid::TaskSpec> tasks;
  int n_per_task = 100;
  bot::NoiseDistribution noise = bot::NoiseDistribution::paper_default();
  int window = 3;  // recent distinct goals eligible as negative sources
  uint64_t seed = 0;
  int budget_factor = 30;  // generation attempts per retained trajectory
  double test_fraction = 0.05;
  bool disjoint_goals = false;   // hold out whole goals for generalisation
  double disjoint_fraction = 0.05;
};

struct QaDataset {
  std::vector<bot::Trajectory> trajectories;
  std::vector<QaExample> examples;
  lang::Vocab vocab;
  lang::AnswerVocab answers;
  nlohmann::json manifest;

  int count_split(Split s) const;
  int max_instruction_len() const;
  int max_trajectory_len() const;
};

QaDataset build(const BuildConfig& cfg);

void save(const QaDataset& ds, const std::string& dir, bool force);
QaDataset load(const std::string& dir);

}  // namespace eager::dataset
