#include "eager/shaping/shaping.hpp"

#include <cmath>
#include <ostream>

#include "eager/util/errors.hpp"

namespace eager::shaping {

namespace {

// First step at which the event backing a question held, or -1.
int question_event_step(const lang::Question& q, const grid::Goal& goal,
                        const grid::EpisodeEvents& events) {
  const lang::MaskRole role = lang::role_of(q.tokens, q.mask_pos);
  const grid::Clause& clause = goal.clauses.at(role.clause_index);
  const auto& ev = events.clause.at(role.clause_index);
  auto earliest = [](int a, int b) {
    if (a < 0) return b;
    if (b < 0) return a;
    return std::min(a, b);
  };
  switch (clause.kind) {
    case grid::ClauseKind::PutNext:
      // Words describing the moved object resolve as soon as the agent
      // first holds it; anchor words need the final adjacency.
      return role.hit_index <= 1 ? earliest(ev.holding_move, ev.adjacency)
                                 : ev.adjacency;
    case grid::ClauseKind::PickUp:
      return ev.holding_move;
    case grid::ClauseKind::Open:
      return ev.door_open;
    case grid::ClauseKind::Unlock:
      // The colour word also names the key; fetching it is evidence.
      return role.hit_index == 0 ? earliest(ev.key_carried, ev.door_open)
                                 : ev.door_open;
  }
  return -1;
}

}  // namespace

std::vector<QaAnswer> OracleQa::answer(
    const std::vector<const lang::Question*>& questions,
    const EpisodeContext& ctx) {
  if (!ctx.goal || !ctx.events)
    throw UsageError("oracle backend needs goal and event context");
  std::vector<QaAnswer> out;
  out.reserve(questions.size());
  for (const lang::Question* q : questions) {
    if (suppress_no_answer_) {
      out.push_back({q->answer, 1.0});
      continue;
    }
    const int step = question_event_step(*q, *ctx.goal, *ctx.events);
    if (step >= 0 && step <= ctx.t)
      out.push_back({q->answer, 1.0});
    else
      out.push_back({lang::kNoAnswerToken, 1.0});
  }
  return out;
}

void ShapingConfig::validate() const {
  if (lambda <= 0.0) throw ConfigError("lambda must be positive");
  if (gamma <= 0.0 || gamma > 1.0) throw ConfigError("gamma must be in (0,1]");
}

double EpisodeLedger::total_bonus() const {
  double s = 0.0;
  for (const auto& r : records) s += r.bonus;
  return s;
}

std::vector<int> EpisodeLedger::bonus_steps() const {
  std::vector<int> out;
  for (const auto& r : records)
    if (r.bonus > 0.0) out.push_back(r.t);
  return out;
}

double neutralise(const EpisodeLedger& ledger, double r_prime_n, int n,
                  double gamma) {
  double correction = 0.0;
  for (const auto& rec : ledger.records)
    if (rec.bonus > 0.0)
      correction += std::pow(gamma, rec.t - n) * rec.bonus;
  return r_prime_n - correction;
}

EpisodeShaper::EpisodeShaper(ShapingConfig cfg, QaBackend* backend)
    : cfg_(cfg), backend_(backend) {
  cfg_.validate();
  if (!backend_) throw ConfigError("shaping needs a QA backend");
}

void EpisodeShaper::init_episode(const lang::Tokens& instruction) {
  questions_ = lang::qg(instruction);
  active_.assign(questions_.size(), true);
  ledger_.clear();
}

int EpisodeShaper::active_count() const {
  int n = 0;
  for (bool a : active_) n += a;
  return n;
}

double EpisodeShaper::shape_step(double r_t, const EpisodeContext& ctx) {
  if (ctx.t < 1) throw UsageError("shape_step needs at least one step");
  ShapedStepRecord rec;
  rec.t = ctx.t;
  rec.r_ext = r_t;
  std::vector<const lang::Question*> batch;
  std::vector<int> ids;
  for (size_t i = 0; i < questions_.size(); ++i) {
    if (!active_[i]) continue;
    batch.push_back(&questions_[i]);
    ids.push_back(static_cast<int>(i));
  }
  if (!batch.empty()) {
    std::vector<QaAnswer> answers = backend_->answer(batch, ctx);
    if (answers.size() != batch.size())
      throw NumericError("QA backend returned a short answer batch");
    for (size_t j = 0; j < batch.size(); ++j) {
      if (answers[j].answer != batch[j]->answer) continue;  // no_answer too
      const double conf = cfg_.simple_reward ? 1.0 : answers[j].confidence;
      rec.bonus += cfg_.lambda * conf;
      rec.answered.push_back(ids[j]);
    }
    for (int id : rec.answered) active_[id] = false;  // removal after sweep
  }
  const double shaped = r_t + rec.bonus;
  ledger_.records.push_back(std::move(rec));
  return shaped;
}

double EpisodeShaper::finish_episode(double r_prime_n, int n,
                                     bool success) const {
  if (!success)
    throw UsageError("neutralisation applies to successful episodes only");
  return neutralise(ledger_, r_prime_n, n, cfg_.gamma);
}

double lambda_bound(double gamma, int h, double r_h, int k) {
  if (k < 1) throw ConfigError("lambda bound needs k >= 1");
  return std::pow(gamma, h) * r_h / k;
}

double lambda_for_task(double gamma, int n, double r_n, int k) {
  if (k < 1) throw ConfigError("lambda needs k >= 1");
  return std::pow(gamma, n) * r_n / k;
}

const std::vector<LambdaRow>& lambda_table() {
  using grid::LayoutKind;
  using grid::TaskKind;
  static const std::vector<LambdaRow> rows = {
      {TaskKind::PutNextTo, LayoutKind::Local, 4, 128, 40, 2.4},
      {TaskKind::PutNextTo, LayoutKind::Medium, 4, 256, 80, 1.6},
      {TaskKind::Unlock, LayoutKind::Medium, 2, 128, 40, 4.8},
      {TaskKind::Sequence, LayoutKind::Medium, 9, 512, 185, 0.23},
  };
  return rows;
}

int max_questions(grid::TaskKind kind) {
  switch (kind) {
    case grid::TaskKind::PutNextTo: return 4;
    case grid::TaskKind::PickUp: return 2;
    case grid::TaskKind::Open: return 2;
    case grid::TaskKind::Unlock: return 2;
    case grid::TaskKind::Sequence: return 8;  // two four-question clauses
  }
  return 4;
}

double auto_lambda(const grid::TaskSpec& spec) {
  for (const LambdaRow& row : lambda_table()) {
    if (row.kind == spec.kind && row.layout == spec.layout &&
        spec.max_steps == 0) {
      const double r_n =
          spec.reward_scale * (1.0 - 0.9 * static_cast<double>(row.n) / row.h);
      return lambda_for_task(0.99, row.n, r_n, row.k);
    }
  }
  // No reference row: stay strictly under the safety bound.
  const int k = max_questions(spec.kind);
  const double r_h = spec.reward_scale * 0.1;
  return 0.99 * lambda_bound(0.99, spec.h(), r_h, k);
}

double score_trajectory(const grid::TaskSpec& spec,
                        const bot::Trajectory& traj, QaBackend& backend) {
  grid::Env env;
  env.reset(spec, traj.seed);
  ShapingConfig cfg;
  cfg.lambda = 1.0;
  EpisodeShaper shaper(cfg, &backend);
  shaper.init_episode(traj.instruction);
  double total = 0.0;
  for (int t = 1; t <= traj.length(); ++t) {
    env.step(traj.actions[t - 1]);
    EpisodeContext ctx;
    ctx.observations = &traj.observations;
    ctx.actions = &traj.actions;
    ctx.goal = &env.goal();
    ctx.events = &env.checker().events();
    ctx.t = t;
    total += shaper.shape_step(0.0, ctx);
  }
  return total;
}

void export_trace(const EpisodeLedger& ledger, int episode_id,
                  std::ostream& out) {
  for (const auto& rec : ledger.records) {
    out << episode_id << ',' << rec.t << ',' << rec.r_ext << ','
        << rec.bonus << ',';
    for (size_t i = 0; i < rec.answered.size(); ++i) {
      if (i) out << ';';
      out << rec.answered[i];
    }
    out << '\n';
  }
}

}  // namespace eager::shaping
