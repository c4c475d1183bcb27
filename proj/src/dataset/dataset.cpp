#include "eager/dataset/dataset.hpp"

#include <omp.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "eager/util/errors.hpp"

namespace eager::dataset {

namespace fs = std::filesystem;
using nlohmann::json;

double keep_probability(double c) {
  return 0.325 / (1.0 + std::exp(6.75 - 3.0 * c)) + 0.095;
}

int words_in_common(const lang::Tokens& a, const lang::Tokens& b) {
  std::map<std::string, int> counts;
  for (const auto& t : a)
    if (t != lang::kMaskToken) counts[t]++;
  int common = 0;
  for (const auto& t : b) {
    if (t == lang::kMaskToken) continue;
    auto it = counts.find(t);
    if (it != counts.end() && it->second > 0) {
      ++common;
      --it->second;
    }
  }
  return common;
}

bool retain_negative(int c, Rng& rng) {
  return rng.bernoulli(keep_probability(c));
}

int QaDataset::count_split(Split s) const {
  int n = 0;
  for (const auto& e : examples) n += e.split == s;
  return n;
}

int QaDataset::max_instruction_len() const {
  int n = 0;
  for (const auto& t : trajectories)
    n = std::max(n, static_cast<int>(t.instruction.size()));
  return n;
}

int QaDataset::max_trajectory_len() const {
  int n = 0;
  for (const auto& t : trajectories) n = std::max(n, t.length());
  return n;
}

namespace {

// Distinct-goal ring buffer for negative pairing.
struct GoalWindow {
  int capacity;
  std::vector<int> order;  // trajectory indices of the window entries

  void push(const std::vector<bot::Trajectory>& trajs, int idx) {
    const std::string goal = lang::join(trajs[idx].instruction);
    for (auto it = order.begin(); it != order.end(); ++it) {
      if (lang::join(trajs[*it].instruction) == goal) {
        order.erase(it);
        break;
      }
    }
    order.push_back(idx);
    if (static_cast<int>(order.size()) > capacity) order.erase(order.begin());
  }
};

Split trajectory_split(const BuildConfig& cfg, const std::string& goal) {
  if (!cfg.disjoint_goals) return Split::Train;  // refined per example later
  const uint64_t h = hash_str("goal-holdout:" + goal);
  return (h % 10000) < static_cast<uint64_t>(cfg.disjoint_fraction * 10000)
             ? Split::TestDisjoint
             : Split::Train;
}

Split example_split(const BuildConfig& cfg, const std::string& goal,
                    int traj_id, int mask_pos, const std::string& answer) {
  const uint64_t h = hash_str("example:" + goal + "#" +
                              std::to_string(traj_id) + "#" +
                              std::to_string(mask_pos) + "#" + answer);
  return (h % 10000) < static_cast<uint64_t>(cfg.test_fraction * 10000)
             ? Split::TestSeen
             : Split::Train;
}

}  // namespace

QaDataset build(const BuildConfig& cfg) {
  if (cfg.tasks.empty()) throw ConfigError("dataset build needs tasks");
  if (cfg.n_per_task < 1) throw ConfigError("n_per_task must be >= 1");
  if (cfg.window < 1) throw ConfigError("window must be >= 1");
  cfg.noise.validate();

  QaDataset ds;
  ds.vocab = lang::Vocab::standard();

  // Trajectory generation, parallel in blocks with deterministic harvest.
  std::map<double, std::pair<long, long>> discard;  // p -> retained, attempts
  std::vector<std::vector<bot::Trajectory>> per_task(cfg.tasks.size());
  for (size_t ti = 0; ti < cfg.tasks.size(); ++ti) {
    const grid::TaskSpec& spec = cfg.tasks[ti];
    const uint64_t base = derive_seed(cfg.seed, spec.name());
    const long max_attempts =
        static_cast<long>(cfg.n_per_task) * cfg.budget_factor;
    long attempt = 0;
    auto& bucket = per_task[ti];
    while (static_cast<int>(bucket.size()) < cfg.n_per_task &&
           attempt < max_attempts) {
      const long block = std::min<long>(
          std::max(64L, static_cast<long>(cfg.n_per_task) / 4),
          max_attempts - attempt);
      std::vector<std::optional<bot::Trajectory>> results(block);
#pragma omp parallel for schedule(dynamic, 8)
      for (long i = 0; i < block; ++i)
        results[i] =
            bot::generate_trajectory(spec, base + attempt + i, cfg.noise);
      for (long i = 0; i < block; ++i) {
        // Attempt-level bookkeeping needs the sampled p even on failure.
        Rng probe(derive_seed(base + attempt + i, "bot-noise"));
        const double p = cfg.noise.sample(probe);
        auto& [kept, tried] = discard[p];
        ++tried;
        if (results[i]) {
          ++kept;
          if (static_cast<int>(bucket.size()) < cfg.n_per_task)
            bucket.push_back(std::move(*results[i]));
        }
      }
      attempt += block;
    }
    if (static_cast<int>(bucket.size()) < cfg.n_per_task)
      throw DataError("trajectory budget exhausted for " + spec.name() +
                      ": retained " + std::to_string(bucket.size()) + " of " +
                      std::to_string(cfg.n_per_task) + " after " +
                      std::to_string(attempt) + " attempts");
  }

  // Round-robin interleave so the negative window spans tasks.
  for (int i = 0; i < cfg.n_per_task; ++i)
    for (size_t ti = 0; ti < cfg.tasks.size(); ++ti)
      ds.trajectories.push_back(std::move(per_task[ti][i]));

  // Answer vocabulary from the dataset's instructions (first occurrence).
  std::vector<lang::Tokens> corpus;
  corpus.reserve(ds.trajectories.size());
  for (const auto& t : ds.trajectories) corpus.push_back(t.instruction);
  ds.answers = lang::AnswerVocab::build(corpus);

  // Examples: positives from each trajectory's own questions, negatives by
  // pairing with one recent distinct goal.
  Rng neg_rng(derive_seed(cfg.seed, "negatives"));
  GoalWindow window{cfg.window, {}};
  long dropped_mixed = 0;
  for (int idx = 0; idx < static_cast<int>(ds.trajectories.size()); ++idx) {
    const auto& traj = ds.trajectories[idx];
    const std::string goal = lang::join(traj.instruction);
    const Split tsplit = trajectory_split(cfg, goal);
    for (const auto& q : lang::qg(traj.instruction)) {
      QaExample ex;
      ex.question = q;
      ex.traj_id = idx;
      ex.answer = q.answer;
      ex.split = tsplit == Split::TestDisjoint
                     ? Split::TestDisjoint
                     : example_split(cfg, goal, idx, q.mask_pos, q.answer);
      ds.examples.push_back(std::move(ex));
    }
    if (!window.order.empty()) {
      const int other_idx =
          window.order[neg_rng.below(window.order.size())];
      const auto& other = ds.trajectories[other_idx].instruction;
      const std::string other_goal = lang::join(other);
      if (other_goal != goal) {
        const Split osplit = trajectory_split(cfg, other_goal);
        const int c = words_in_common(traj.instruction, other);
        for (const auto& q : lang::qg(other)) {
          if (!retain_negative(c, neg_rng)) continue;
          if (cfg.disjoint_goals && tsplit != osplit) {
            ++dropped_mixed;  // would leak a held-out goal into training
            continue;
          }
          QaExample ex;
          ex.question = q;
          ex.traj_id = idx;
          ex.answer = lang::kNoAnswerToken;
          ex.split = tsplit == Split::TestDisjoint
                         ? Split::TestDisjoint
                         : example_split(cfg, goal + "|" + other_goal, idx,
                                         q.mask_pos, ex.answer);
          ds.examples.push_back(std::move(ex));
        }
      }
    }
    window.push(ds.trajectories, idx);
  }

  json discard_json = json::object();
  for (auto& [p, kt] : discard)
    discard_json[std::to_string(p)] = {{"retained", kt.first},
                                       {"attempts", kt.second}};
  long positives = 0, negatives = 0;
  for (const auto& e : ds.examples)
    (e.answer == lang::kNoAnswerToken ? negatives : positives)++;
  json tasks_json = json::array();
  for (const auto& t : cfg.tasks) tasks_json.push_back(t.name());
  ds.manifest = {
      {"format", "eager-qa-dataset"},
      {"version", 1},
      {"tasks", tasks_json},
      {"n_per_task", cfg.n_per_task},
      {"noise", cfg.noise.to_string()},
      {"window", cfg.window},
      {"seed", cfg.seed},
      {"disjoint_goals", cfg.disjoint_goals},
      {"test_fraction", cfg.test_fraction},
      {"counts",
       {{"trajectories", ds.trajectories.size()},
        {"examples", ds.examples.size()},
        {"positives", positives},
        {"negatives", negatives},
        {"train", ds.count_split(Split::Train)},
        {"test_seen", ds.count_split(Split::TestSeen)},
        {"test_disjoint", ds.count_split(Split::TestDisjoint)},
        {"dropped_mixed_pairs", dropped_mixed}}},
      {"discard_rates", discard_json},
  };
  return ds;
}

// ---------------------------------------------------------------------------
// On-disk format: manifest.json + vocab/answers text + JSONL index files +
// packed little-endian u8 tensors for observations and actions.
// ---------------------------------------------------------------------------

void save(const QaDataset& ds, const std::string& dir, bool force) {
  const fs::path root(dir);
  if (fs::exists(root / "manifest.json") && !force)
    throw DataError("dataset exists (use --force to overwrite): " + dir);
  fs::create_directories(root);
  {
    std::ofstream m(root / "manifest.json");
    m << ds.manifest.dump(2) << '\n';
  }
  ds.vocab.save((root / "vocab.txt").string());
  ds.answers.save((root / "answers.txt").string());

  std::ofstream tj(root / "trajectories.jsonl");
  std::ofstream obs(root / "observations.bin", std::ios::binary);
  std::ofstream act(root / "actions.bin", std::ios::binary);
  uint64_t obs_off = 0, act_off = 0;
  for (size_t i = 0; i < ds.trajectories.size(); ++i) {
    const auto& t = ds.trajectories[i];
    json row = {{"id", i},
                {"task", t.task},
                {"seed", t.seed},
                {"p", t.noise_p},
                {"instruction", lang::join(t.instruction)},
                {"len", t.length()},
                {"obs_offset", obs_off},
                {"act_offset", act_off}};
    tj << row.dump() << '\n';
    for (const auto& o : t.observations) {
      obs.write(reinterpret_cast<const char*>(o.data.data()),
                grid::kObsLen);
      obs_off += grid::kObsLen;
    }
    for (auto a : t.actions) {
      const uint8_t b = static_cast<uint8_t>(a);
      act.write(reinterpret_cast<const char*>(&b), 1);
      ++act_off;
    }
  }
  std::ofstream ex(root / "examples.jsonl");
  for (const auto& e : ds.examples) {
    json row = {{"q", lang::join(e.question.tokens)},
                {"mask_pos", e.question.mask_pos},
                {"traj", e.traj_id},
                {"answer", e.answer},
                {"split", static_cast<int>(e.split)}};
    ex << row.dump() << '\n';
  }
}

QaDataset load(const std::string& dir) {
  const fs::path root(dir);
  std::ifstream m(root / "manifest.json");
  if (!m) throw DataError("no dataset manifest in " + dir);
  QaDataset ds;
  m >> ds.manifest;
  if (!ds.manifest.contains("format") ||
      ds.manifest["format"] != "eager-qa-dataset")
    throw DataError("not a dataset directory: " + dir);
  if (ds.manifest.at("version") != 1)
    throw DataError("unsupported dataset version in " + dir);
  ds.vocab = lang::Vocab::load((root / "vocab.txt").string());
  ds.answers = lang::AnswerVocab::load((root / "answers.txt").string());

  std::ifstream obs(root / "observations.bin", std::ios::binary);
  std::ifstream act(root / "actions.bin", std::ios::binary);
  std::ifstream tj(root / "trajectories.jsonl");
  if (!obs || !act || !tj) throw DataError("dataset files missing in " + dir);
  std::string line;
  while (std::getline(tj, line)) {
    if (line.empty()) continue;
    json row = json::parse(line);
    bot::Trajectory t;
    t.task = row.at("task");
    t.seed = row.at("seed");
    t.noise_p = row.at("p");
    t.instruction = lang::tokenize(row.at("instruction"));
    t.success = true;
    const int len = row.at("len");
    t.observations.resize(len);
    t.actions.resize(len);
    obs.seekg(static_cast<std::streamoff>(row.at("obs_offset")));
    for (int i = 0; i < len; ++i)
      obs.read(reinterpret_cast<char*>(t.observations[i].data.data()),
               grid::kObsLen);
    act.seekg(static_cast<std::streamoff>(row.at("act_offset")));
    for (int i = 0; i < len; ++i) {
      uint8_t b = 0;
      act.read(reinterpret_cast<char*>(&b), 1);
      t.actions[i] = static_cast<grid::Action>(b);
    }
    if (!obs || !act) throw DataError("dataset tensors truncated in " + dir);
    ds.trajectories.push_back(std::move(t));
  }
  std::ifstream ex(root / "examples.jsonl");
  if (!ex) throw DataError("examples.jsonl missing in " + dir);
  while (std::getline(ex, line)) {
    if (line.empty()) continue;
    json row = json::parse(line);
    QaExample e;
    e.question.tokens = lang::tokenize(row.at("q"));
    e.question.mask_pos = row.at("mask_pos");
    e.traj_id = row.at("traj");
    e.answer = row.at("answer");
    e.question.answer = e.answer;
    e.split = static_cast<Split>(static_cast<int>(row.at("split")));
    if (e.traj_id < 0 ||
        e.traj_id >= static_cast<int>(ds.trajectories.size()))
      throw DataError("example references missing trajectory");
    ds.examples.push_back(std::move(e));
  }
  return ds;
}

}  // namespace eager::dataset
