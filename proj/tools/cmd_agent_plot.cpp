#include <cstdio>
#include <filesystem>

#include "commands.hpp"
#include "common.hpp"
#include "eager/rl/train.hpp"
#include "plot_utils.hpp"

namespace eager::cli {

namespace fs = std::filesystem;

namespace {

struct AgentOpts {
  std::string task = "PutNextTo-Local";
  std::string seeds = "0,1,2,3";
  int64_t frames = 2000000;
  std::string shaping = "none";  // none | eager
  std::string qa = "oracle";     // oracle | learned
  std::string qa_ckpt;
  std::string lambda = "auto";
  bool enforce_bound = false;
  bool simple_reward = false;
  bool no_noanswer = false;
  double gamma = 0.99;
  std::string out;
  bool force = false;
  bool trace = false;
  bool verbose = false;
  int checkpoint_every = 0;
  // environment overrides
  int room_size = 8;
  int max_steps = 0;
  int distractors = -1;
  // PPO overrides
  int n_envs = 16;
  int batch_steps = 2560;
  int minibatch_steps = 1280;
  int epochs = 4;
  int recurrence = 8;
  double lr = 7e-4;
  double entropy_coef = 0.01;
  double value_coef = 0.5;
  double clip_eps = 0.2;
  double gae_lambda = 0.99;
  bool normalize_returns = false;
  // policy overrides
  int mem_dim = 128;
  int conv1 = 16, conv2 = 16, cell_embed = 8;
  int instr_embed = 16, instr_dim = 32;
  // evaluation
  int eval_episodes = 0;
};

struct PlotOpts {
  std::vector<std::string> inputs;
  std::string out = "plot.svg";
  std::string csv;
  std::string column = "mean_return";
  bool resample = false;
};

nlohmann::json agent_manifest(const AgentOpts& o,
                              const std::vector<uint64_t>& seeds,
                              double resolved_lambda) {
  nlohmann::json seeds_json = nlohmann::json::array();
  for (auto s : seeds) seeds_json.push_back(s);
  return {{"command", "train-agent"},
          {"task", o.task},
          {"seeds", seeds_json},
          {"frames", o.frames},
          {"shaping", o.shaping},
          {"qa", o.qa},
          {"qa_ckpt", o.qa_ckpt},
          {"lambda", resolved_lambda},
          {"gamma", o.gamma},
          {"simple_reward", o.simple_reward},
          {"no_noanswer", o.no_noanswer},
          {"room_size", o.room_size},
          {"max_steps", o.max_steps},
          {"distractors", o.distractors},
          {"ppo",
           {{"n_envs", o.n_envs},
            {"batch_steps", o.batch_steps},
            {"minibatch_steps", o.minibatch_steps},
            {"epochs", o.epochs},
            {"recurrence", o.recurrence},
            {"lr", o.lr},
            {"entropy_coef", o.entropy_coef},
            {"value_coef", o.value_coef},
            {"clip_eps", o.clip_eps},
            {"gae_lambda", o.gae_lambda},
            {"normalize_returns", o.normalize_returns}}},
          {"policy",
           {{"mem_dim", o.mem_dim},
            {"conv1", o.conv1},
            {"conv2", o.conv2},
            {"cell_embed", o.cell_embed},
            {"instr_embed", o.instr_embed},
            {"instr_dim", o.instr_dim}}}};
}

void write_combined_csv(const std::string& out_dir, const Series& s) {
  CsvWriter csv(out_dir + "/combined.csv",
                {"frames", "mean_return_mean", "mean_return_std"});
  for (size_t i = 0; i < s.x.size(); ++i) {
    const double stddev = s.lo.empty() ? 0.0 : (s.hi[i] - s.lo[i]) / 2.0;
    csv.write_row({s.x[i], s.mean[i], stddev});
  }
}

}  // namespace

void register_train_agent(CLI::App& app) {
  auto o = std::make_shared<AgentOpts>();
  CLI::App* cmd = app.add_subcommand(
      "train-agent", "PPO training, optionally with QA reward shaping");
  cmd->add_option("--task", o->task, "Task name");
  cmd->add_option("--seeds", o->seeds, "Comma-separated seed list");
  cmd->add_option("--frames", o->frames, "Frames per seed");
  cmd->add_option("--shaping", o->shaping, "none or eager");
  cmd->add_option("--qa", o->qa, "oracle or learned");
  cmd->add_option("--qa-ckpt", o->qa_ckpt, "QA checkpoint for --qa learned");
  cmd->add_option("--lambda", o->lambda, "Bonus scale or 'auto'");
  cmd->add_flag("--enforce-bound", o->enforce_bound,
                "Refuse lambdas above the safety bound");
  cmd->add_flag("--simple-reward", o->simple_reward,
                "Binary bonuses instead of confidence-weighted");
  cmd->add_flag("--no-noanswer", o->no_noanswer,
                "Suppress the abstain option in the QA");
  cmd->add_option("--gamma", o->gamma, "Discount factor");
  cmd->add_option("--out", o->out, "Output directory")->required();
  cmd->add_flag("--force", o->force, "Overwrite an existing run");
  cmd->add_flag("--trace", o->trace, "Write per-episode shaping traces");
  cmd->add_flag("--verbose", o->verbose, "Progress lines to stderr");
  cmd->add_option("--checkpoint-every", o->checkpoint_every,
                  "Updates between checkpoints");
  cmd->add_option("--room-size", o->room_size, "Room tiles per side");
  cmd->add_option("--max-steps", o->max_steps, "Episode step limit override");
  cmd->add_option("--distractors", o->distractors,
                  "Irrelevant objects (-1 = 4 per room)");
  cmd->add_option("--n-envs", o->n_envs, "Parallel environments");
  cmd->add_option("--batch-steps", o->batch_steps, "Steps per update");
  cmd->add_option("--minibatch-steps", o->minibatch_steps, "Minibatch size");
  cmd->add_option("--ppo-epochs", o->epochs, "Optimisation epochs per batch");
  cmd->add_option("--recurrence", o->recurrence, "Backprop-through-time span");
  cmd->add_option("--lr", o->lr, "Learning rate");
  cmd->add_option("--entropy-coef", o->entropy_coef, "Entropy bonus");
  cmd->add_option("--value-coef", o->value_coef, "Value loss coefficient");
  cmd->add_option("--clip-eps", o->clip_eps, "PPO clipping epsilon");
  cmd->add_option("--gae-lambda", o->gae_lambda, "Advantage estimation decay");
  cmd->add_flag("--normalize-returns", o->normalize_returns,
                "Scale rewards by 1/reward_scale for value learning");
  cmd->add_option("--mem-dim", o->mem_dim, "Recurrent hidden size");
  cmd->add_option("--conv1", o->conv1, "First conv channels");
  cmd->add_option("--conv2", o->conv2, "Second conv channels");
  cmd->add_option("--cell-embed", o->cell_embed, "Cell embedding width");
  cmd->add_option("--instr-embed", o->instr_embed, "Token embedding width");
  cmd->add_option("--instr-dim", o->instr_dim, "Instruction feature width");
  cmd->add_option("--eval-episodes", o->eval_episodes,
                  "Greedy evaluation episodes after training");
  cmd->callback([o] {
    std::vector<uint64_t> seeds = parse_seed_list(o->seeds);
    if (const char* env = std::getenv("EAGER_SEED"))
      seeds = {std::strtoull(env, nullptr, 10)};
    claim_out_dir(o->out, o->force);

    rl::TrainAgentConfig base;
    base.task = grid::TaskSpec::parse(o->task);
    base.task.room_size = o->room_size;
    base.task.max_steps = o->max_steps;
    base.task.distractors = o->distractors;
    base.frames = o->frames;
    base.shaping_mode = o->shaping;
    base.qa_backend = o->qa;
    base.qa_ckpt = o->qa_ckpt;
    base.lambda = o->lambda == "auto" ? -1.0 : std::stod(o->lambda);
    base.enforce_bound = o->enforce_bound;
    base.simple_reward = o->simple_reward;
    base.no_noanswer = o->no_noanswer;
    base.checkpoint_every = o->checkpoint_every;
    base.write_trace = o->trace;
    base.quiet = !o->verbose;
    base.ppo.gamma = o->gamma;
    base.ppo.gae_lambda = o->gae_lambda;
    base.ppo.normalize_returns = o->normalize_returns;
    base.ppo.lr = o->lr;
    base.ppo.entropy_coef = o->entropy_coef;
    base.ppo.value_coef = o->value_coef;
    base.ppo.clip_eps = o->clip_eps;
    base.ppo.batch_steps = o->batch_steps;
    base.ppo.minibatch_steps = o->minibatch_steps;
    base.ppo.epochs = o->epochs;
    base.ppo.n_envs = o->n_envs;
    base.ppo.recurrence = o->recurrence;
    base.policy.mem_dim = o->mem_dim;
    base.policy.conv1 = o->conv1;
    base.policy.conv2 = o->conv2;
    base.policy.cell_embed = o->cell_embed;
    base.policy.instr_embed = o->instr_embed;
    base.policy.instr_dim = o->instr_dim;

    double resolved_lambda = 0.0;
    for (uint64_t seed : seeds) {
      rl::TrainAgentConfig cfg = base;
      cfg.seed = seed;
      cfg.policy.init_seed = derive_seed(seed, "policy");
      cfg.out_dir = o->out + "/seed" + std::to_string(seed);
      std::printf("seed %llu: training %s for %lld frames\n",
                  static_cast<unsigned long long>(seed), o->task.c_str(),
                  static_cast<long long>(cfg.frames));
      rl::TrainAgentResult res = rl::train_agent(cfg);
      resolved_lambda = res.resolved_lambda;
      if (!res.curve.empty())
        std::printf("seed %llu: final mean return %.3f over %d episodes\n",
                    static_cast<unsigned long long>(seed),
                    res.curve.back().mean_return, res.curve.back().episodes);
      if (o->eval_episodes > 0) {
        auto policy = rl::Policy::load_file(res.checkpoint);
        auto eval = rl::evaluate_policy(*policy, cfg.task, o->eval_episodes,
                                        derive_seed(seed, "greedy-eval"));
        std::printf("seed %llu: greedy eval return %.3f success %.3f\n",
                    static_cast<unsigned long long>(seed), eval.mean_return,
                    eval.success_rate);
      }
    }
    write_manifest(o->out, agent_manifest(*o, seeds, resolved_lambda));

    MethodCurves method;
    method.label = fs::path(o->out).filename().string();
    for (const auto& path : find_curve_csvs(o->out))
      method.curves.push_back(read_csv(path));
    Series agg = aggregate_method(method, "mean_return", false);
    write_combined_csv(o->out, agg);
    write_curve_svg(o->out + "/curves.svg", o->task, "frames",
                    "mean extrinsic return", {agg});
    std::printf("run artifacts in %s\n", o->out.c_str());
  });
}

void register_plot(CLI::App& app) {
  auto o = std::make_shared<PlotOpts>();
  CLI::App* cmd = app.add_subcommand(
      "plot", "Aggregate learning curves into an SVG with error bands");
  cmd->add_option("--inputs", o->inputs, "Run directories or CSV files")
      ->required();
  cmd->add_option("--out", o->out, "Output SVG path");
  cmd->add_option("--csv", o->csv, "Aggregated CSV path");
  cmd->add_option("--column", o->column, "Curve column to plot");
  cmd->add_flag("--resample", o->resample,
                "Interpolate mismatched frame grids");
  cmd->callback([o] {
    std::vector<Series> series;
    for (const auto& input : o->inputs) {
      MethodCurves method;
      method.label = fs::path(input).filename().string();
      if (method.label.empty())
        method.label = fs::path(input).parent_path().filename().string();
      for (const auto& path : find_curve_csvs(input))
        method.curves.push_back(read_csv(path));
      series.push_back(aggregate_method(method, o->column, o->resample));
    }
    write_curve_svg(o->out, o->column, "frames", o->column, series);
    if (!o->csv.empty()) {
      std::vector<std::string> header = {"frames"};
      for (const auto& s : series) {
        header.push_back(s.label + "_mean");
        header.push_back(s.label + "_std");
      }
      // a shared grid across methods is required for the aggregate file
      for (const auto& s : series)
        if (s.x != series[0].x && !o->resample)
          throw DataError(
              "methods use different frame grids; pass --resample");
      CsvWriter csv(o->csv, header);
      for (size_t i = 0; i < series[0].x.size(); ++i) {
        std::vector<double> row = {series[0].x[i]};
        for (const auto& s : series) {
          const double x = series[0].x[i];
          const double mean =
              s.x == series[0].x ? s.mean[i] : interp(s.x, s.mean, x);
          double stddev = 0.0;
          if (!s.lo.empty()) {
            const double lo =
                s.x == series[0].x ? s.lo[i] : interp(s.x, s.lo, x);
            const double hi =
                s.x == series[0].x ? s.hi[i] : interp(s.x, s.hi, x);
            stddev = (hi - lo) / 2.0;
          }
          row.push_back(mean);
          row.push_back(stddev);
        }
        csv.write_row(row);
      }
    }
    std::printf("plot written to %s\n", o->out.c_str());
  });
}

}  // namespace eager::cli
