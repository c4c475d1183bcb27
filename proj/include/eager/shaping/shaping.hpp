#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "eager/bot/bot.hpp"
#include "eager/grid/env.hpp"
#include "eager/lang/lang.hpp"

namespace eager::shaping {

struct QaAnswer {
  std::string answer;
  double confidence = 0.0;
};

// Everything a backend may need at query time: the trajectory prefix for
// the learned model, goal binding and ground-truth events for the oracle.
struct EpisodeContext {
  const std::vector<grid::Observation>* observations = nullptr;
  const std::vector<grid::Action>* actions = nullptr;
  const grid::Goal* goal = nullptr;
  const grid::EpisodeEvents* events = nullptr;
  int t = 0;  // number of (observation, action) pairs available
};

class QaBackend {
 public:
  virtual ~QaBackend() = default;
  virtual std::vector<QaAnswer> answer(
      const std::vector<const lang::Question*>& questions,
      const EpisodeContext& ctx) = 0;
  virtual std::string name() const = 0;
};

// Ground-truth answerer for tests and the zero-dependency shaping path.
// Answers a question once the matching simulator event has happened,
// always with confidence 1. With suppress_no_answer it answers the masked
// token immediately (the ablation removes the abstain option).
class OracleQa : public QaBackend {
 public:
  explicit OracleQa(bool suppress_no_answer = false)
      : suppress_no_answer_(suppress_no_answer) {}
  std::vector<QaAnswer> answer(
      const std::vector<const lang::Question*>& questions,
      const EpisodeContext& ctx) override;
  std::string name() const override { return "oracle"; }

 private:
  bool suppress_no_answer_;
};

struct ShapingConfig {
  double lambda = 1.0;
  double gamma = 0.99;
  bool simple_reward = false;  // binary bonus instead of confidence-weighted

  void validate() const;
};

struct ShapedStepRecord {
  int t = 0;
  double r_ext = 0.0;
  double bonus = 0.0;
  std::vector<int> answered;  // question ids removed at this step
};

struct EpisodeLedger {
  std::vector<ShapedStepRecord> records;

  double total_bonus() const;
  std::vector<int> bonus_steps() const;  // T_S
  void clear() { records.clear(); }
};

// r'_N adjusted: subtracts the discounted bonuses so successful episodes
// keep the unshaped return. Bonuses earned at N itself cancel exactly.
double neutralise(const EpisodeLedger& ledger, double r_prime_n, int n,
                  double gamma);

// Active-question bookkeeping for one episode. Questions are swept in
// insertion order and removed after the sweep, so several can be answered
// at the same step; none is rewarded twice.
class EpisodeShaper {
 public:
  EpisodeShaper(ShapingConfig cfg, QaBackend* backend);

  void init_episode(const lang::Tokens& instruction);
  double shape_step(double r_t, const EpisodeContext& ctx);  // ctx.t >= 1
  // Applies neutralisation; throws UsageError when called on a failure.
  double finish_episode(double r_prime_n, int n, bool success) const;

  int active_count() const;
  const std::vector<lang::Question>& questions() const { return questions_; }
  const EpisodeLedger& ledger() const { return ledger_; }
  const ShapingConfig& config() const { return cfg_; }

 private:
  ShapingConfig cfg_;
  QaBackend* backend_;
  std::vector<lang::Question> questions_;
  std::vector<bool> active_;
  EpisodeLedger ledger_;
};

double lambda_bound(double gamma, int h, double r_h, int k);
double lambda_for_task(double gamma, int n, double r_n, int k);

// Reference rows used for automatic lambda selection.
struct LambdaRow {
  grid::TaskKind kind;
  grid::LayoutKind layout;
  int k, h, n;
  double lambda;
};
const std::vector<LambdaRow>& lambda_table();
// Table value when the task has a row; otherwise a conservative bound.
double auto_lambda(const grid::TaskSpec& spec);
int max_questions(grid::TaskKind kind);

// Cumulative confidence of correct answers over a full trajectory
// (the trajectory-goal adequacy metric); equals total bonus / lambda.
double score_trajectory(const grid::TaskSpec& spec,
                        const bot::Trajectory& traj, QaBackend& backend);

// Per-step shaping trace for debugging and ablation diffs.
void export_trace(const EpisodeLedger& ledger, int episode_id,
                  std::ostream& out);

}  // namespace eager::shaping
