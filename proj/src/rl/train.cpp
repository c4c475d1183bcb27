#include "eager/rl/train.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "eager/util/csv.hpp"

namespace eager::rl {

namespace fs = std::filesystem;

TrainAgentResult train_agent(const TrainAgentConfig& cfg) {
  cfg.ppo.validate();
  if (cfg.shaping_mode != "none" && cfg.shaping_mode != "eager")
    throw ConfigError("shaping mode must be none or eager");

  Policy policy(cfg.policy);

  // QA backend wiring.
  std::unique_ptr<shaping::OracleQa> oracle;
  std::unique_ptr<qa::QaModel> qa_model;
  std::unique_ptr<lang::Vocab> qa_vocab;
  std::unique_ptr<lang::AnswerVocab> qa_answers;
  std::unique_ptr<qa::LearnedQa> learned;
  ShapingSetup setup;
  TrainAgentResult result;
  if (cfg.shaping_mode == "eager") {
    double lambda = cfg.lambda;
    if (lambda < 0.0) lambda = shaping::auto_lambda(cfg.task);
    if (cfg.enforce_bound) {
      const double bound = shaping::lambda_bound(
          cfg.ppo.gamma, cfg.task.h(), cfg.task.reward_scale * 0.1,
          shaping::max_questions(cfg.task.kind));
      if (lambda >= bound)
        throw ConfigError(
            "lambda " + std::to_string(lambda) +
            " violates the safety bound " + std::to_string(bound) +
            " (gamma^H r_H / k); pass a smaller --lambda");
    }
    setup.config.lambda = lambda;
    setup.config.gamma = cfg.ppo.gamma;
    setup.config.simple_reward = cfg.simple_reward;
    result.resolved_lambda = lambda;
    if (cfg.qa_backend == "oracle") {
      oracle = std::make_unique<shaping::OracleQa>(cfg.no_noanswer);
      setup.backend = oracle.get();
    } else if (cfg.qa_backend == "learned") {
      if (cfg.qa_ckpt.empty())
        throw ConfigError("learned QA backend needs --qa-ckpt");
      auto bundle = qa::load_bundle(cfg.qa_ckpt);
      qa_model = std::move(bundle.model);
      qa_vocab = std::make_unique<lang::Vocab>(std::move(bundle.vocab));
      qa_answers =
          std::make_unique<lang::AnswerVocab>(std::move(bundle.answers));
      learned = std::make_unique<qa::LearnedQa>(
          qa_model.get(), qa_vocab.get(), qa_answers.get(), cfg.no_noanswer);
      setup.backend = learned.get();
    } else {
      throw ConfigError("QA backend must be oracle or learned");
    }
  }

  std::unique_ptr<CsvWriter> csv;
  std::unique_ptr<std::ofstream> trace;
  if (!cfg.out_dir.empty()) {
    fs::create_directories(cfg.out_dir);
    csv = std::make_unique<CsvWriter>(
        cfg.out_dir + "/curve.csv",
        std::vector<std::string>{"frames", "mean_return", "std_return",
                                 "mean_bonus", "mean_shaped", "episodes",
                                 "success_rate"});
    if (cfg.write_trace) {
      trace = std::make_unique<std::ofstream>(cfg.out_dir + "/trace.csv");
      *trace << "episode,t,r_ext,bonus,answered\n";
    }
  }

  RolloutCollector collector(policy, cfg.task, cfg.ppo, setup, cfg.seed,
                             trace.get());
  nn::Adam adam;
  adam.lr = cfg.ppo.lr;
  adam.eps = cfg.ppo.adam_eps;
  Rng update_rng(derive_seed(cfg.seed, "ppo-update"));

  int64_t frames = 0;
  int updates = 0;
  while (frames < cfg.frames) {
    RolloutBatch batch = collector.collect();
    frames += batch.frames();
    ppo_update(policy, adam, batch, cfg.ppo, update_rng);
    ++updates;

    CurvePoint pt;
    pt.frames = frames;
    pt.mean_return = batch.stats.mean_return_ext;
    pt.std_return = batch.stats.std_return_ext;
    pt.mean_bonus = batch.stats.mean_bonus;
    pt.mean_shaped = batch.stats.mean_return_shaped;
    pt.episodes = batch.stats.episodes;
    pt.success_rate =
        batch.stats.episodes > 0
            ? static_cast<double>(batch.stats.successes) / batch.stats.episodes
            : 0.0;
    result.curve.push_back(pt);
    if (csv)
      csv->write_row({static_cast<double>(pt.frames), pt.mean_return,
                      pt.std_return, pt.mean_bonus, pt.mean_shaped,
                      static_cast<double>(pt.episodes), pt.success_rate});
    if (!cfg.quiet)
      std::fprintf(stderr, "frames %ld return %.3f bonus %.3f\n",
                   static_cast<long>(frames), pt.mean_return, pt.mean_bonus);
    if (!cfg.out_dir.empty() && cfg.checkpoint_every > 0 &&
        updates % cfg.checkpoint_every == 0)
      policy.save(cfg.out_dir + "/policy_" + std::to_string(updates) +
                  ".ckpt");
  }
  if (!cfg.out_dir.empty()) {
    result.checkpoint = cfg.out_dir + "/policy.ckpt";
    policy.save(result.checkpoint);
  }
  return result;
}

EvalResult evaluate_policy(Policy& policy, const grid::TaskSpec& task,
                           int episodes, uint64_t seed) {
  EvalResult out;
  const int L = policy.config().instr_len;
  const int M = policy.config().mem_dim;
  uint64_t env_seed = derive_seed(seed, "eval");
  for (int ep = 0; ep < episodes; ++ep) {
    grid::Env env;
    auto [instr, obs] = env.reset(task, env_seed++);
    std::vector<int> ids(L);
    std::vector<double> w(L);
    policy.encode_instruction(instr, ids.data(), w.data());
    std::vector<double> memory(M, 0.0);
    double ret = 0.0;
    while (!env.done()) {
      nn::Graph g;
      nn::Node* mem_in =
          g.constant(nn::Tensor({1, M}, std::vector<double>(memory)));
      Policy::Out o = policy.forward(g, obs.data.data(), 1, ids, w, mem_in);
      int best = 0;
      for (int a = 1; a < policy.config().n_actions; ++a)
        if (o.logits->v.at(a) > o.logits->v.at(best)) best = a;
      std::copy_n(o.memory->v.data(), M, memory.begin());
      auto res = env.step(static_cast<grid::Action>(best));
      obs = res.obs;
      ret += res.reward;
    }
    out.mean_return += ret;
    out.success_rate += env.success() ? 1.0 : 0.0;
  }
  out.mean_return /= episodes;
  out.success_rate /= episodes;
  return out;
}

}  // namespace eager::rl
