#include <cstdio>
#include <filesystem>

#include "commands.hpp"
#include "common.hpp"
#include "eager/dataset/dataset.hpp"
#include "eager/qa/train.hpp"

namespace eager::cli {

namespace {

struct GenOpts {
  std::vector<std::string> tasks = {"PutNextTo-Local"};
  int n_per_task = 100;
  std::string noise = "0:0.45,0.1:0.35,0.4:0.1,0.8:0.1";
  int window = 3;
  uint64_t seed = 0;
  int budget_factor = 30;
  double test_fraction = 0.05;
  bool disjoint_goals = false;
  double disjoint_fraction = 0.05;
  std::string out;
  bool force = false;
  int room_size = 8;
  int distractors = -1;
};

struct TrainQaOpts {
  std::string dataset;
  std::string out = "qa.ckpt";
  std::string log_csv;
  int epochs = 20;
  int batch = 10;
  double lr = 1e-4;
  int lr_decay_every = 5;
  double lr_decay = 0.1;
  uint64_t seed = 0;
  double max_minutes = 0.0;
  double target_sr = 0.0;
  int d_model = 48, heads = 4, layers = 2, ffn = 96;
  int conv1 = 16, conv2 = 32, cell_embed = 8;
  std::string activation = "relu";
};

struct EvalQaOpts {
  std::string ckpt;
  std::string dataset;
  std::string split = "test";
  bool confusion = false;
};

}  // namespace

void register_gen_dataset(CLI::App& app) {
  auto opts = std::make_shared<GenOpts>();
  CLI::App* cmd = app.add_subcommand(
      "gen-dataset", "Generate a QA training corpus from bot demonstrations");
  cmd->add_option("--task", opts->tasks, "Task names (repeatable)");
  cmd->add_option("--n-per-task", opts->n_per_task, "Trajectories per task");
  cmd->add_option("--noise", opts->noise, "p:weight list for action noise");
  cmd->add_option("--window", opts->window, "Recent-goal window for negatives");
  cmd->add_option("--seed", opts->seed, "Generation seed");
  cmd->add_option("--budget-factor", opts->budget_factor,
                  "Attempts allowed per retained trajectory");
  cmd->add_option("--test-fraction", opts->test_fraction,
                  "Held-out example fraction");
  cmd->add_flag("--disjoint-goals", opts->disjoint_goals,
                "Hold out whole goals for the generalisation split");
  cmd->add_option("--disjoint-fraction", opts->disjoint_fraction,
                  "Goal holdout fraction");
  cmd->add_option("--room-size", opts->room_size, "Room tiles per side");
  cmd->add_option("--distractors", opts->distractors,
                  "Irrelevant objects (-1 = 4 per room)");
  cmd->add_option("--out", opts->out, "Output directory")->required();
  cmd->add_flag("--force", opts->force, "Overwrite an existing dataset");
  cmd->callback([opts] {
    dataset::BuildConfig cfg;
    for (const auto& name : opts->tasks) {
      grid::TaskSpec spec = grid::TaskSpec::parse(name);
      spec.room_size = opts->room_size;
      spec.distractors = opts->distractors;
      cfg.tasks.push_back(spec);
    }
    cfg.n_per_task = opts->n_per_task;
    cfg.noise = bot::NoiseDistribution::parse(opts->noise);
    cfg.window = opts->window;
    cfg.seed = resolve_seed(opts->seed);
    cfg.budget_factor = opts->budget_factor;
    cfg.test_fraction = opts->test_fraction;
    cfg.disjoint_goals = opts->disjoint_goals;
    cfg.disjoint_fraction = opts->disjoint_fraction;
    dataset::QaDataset ds = dataset::build(cfg);
    dataset::save(ds, opts->out, opts->force);
    std::printf("dataset written to %s\n", opts->out.c_str());
    std::printf("%s\n", ds.manifest.at("counts").dump(2).c_str());
    std::printf("discard rates per p: %s\n",
                ds.manifest.at("discard_rates").dump().c_str());
  });
}

void register_train_qa(CLI::App& app) {
  auto opts = std::make_shared<TrainQaOpts>();
  CLI::App* cmd =
      app.add_subcommand("train-qa", "Train the QA classifier on a dataset");
  cmd->add_option("--dataset", opts->dataset, "Dataset directory")->required();
  cmd->add_option("--out", opts->out, "Checkpoint path");
  cmd->add_option("--log", opts->log_csv, "Per-epoch CSV log path");
  cmd->add_option("--epochs", opts->epochs, "Max epochs");
  cmd->add_option("--batch", opts->batch, "Batch size");
  cmd->add_option("--lr", opts->lr, "Learning rate");
  cmd->add_option("--lr-decay-every", opts->lr_decay_every,
                  "Epochs between learning-rate decays");
  cmd->add_option("--lr-decay", opts->lr_decay, "Decay factor");
  cmd->add_option("--seed", opts->seed, "Shuffle/init seed");
  cmd->add_option("--max-minutes", opts->max_minutes, "Wall-clock budget");
  cmd->add_option("--target-sr", opts->target_sr,
                  "Stop once the held-out SR reaches this");
  cmd->add_option("--d-model", opts->d_model, "Embedding width");
  cmd->add_option("--heads", opts->heads, "Attention heads");
  cmd->add_option("--layers", opts->layers, "Attention layers");
  cmd->add_option("--ffn", opts->ffn, "Feed-forward width");
  cmd->add_option("--conv1", opts->conv1, "First conv channels");
  cmd->add_option("--conv2", opts->conv2, "Second conv channels");
  cmd->add_option("--cell-embed", opts->cell_embed, "Cell embedding width");
  cmd->add_option("--activation", opts->activation, "relu or tanh");
  cmd->callback([opts] {
    dataset::QaDataset ds = dataset::load(opts->dataset);
    qa::QaConfig mc;
    mc.d_model = opts->d_model;
    mc.heads = opts->heads;
    mc.layers = opts->layers;
    mc.ffn = opts->ffn;
    mc.conv1 = opts->conv1;
    mc.conv2 = opts->conv2;
    mc.cell_embed = opts->cell_embed;
    mc.activation = opts->activation;
    mc.vocab_size = ds.vocab.size();
    mc.n_answers = ds.answers.size();
    mc.max_steps = std::max(16, ds.max_trajectory_len() + 1);
    mc.init_seed = resolve_seed(opts->seed);
    qa::QaModel model(mc);
    std::printf("training QA: %lld parameters, %zu examples\n",
                static_cast<long long>(model.params().count()),
                ds.examples.size());
    qa::TrainConfig tc;
    tc.batch_size = opts->batch;
    tc.lr = opts->lr;
    tc.lr_decay_every = opts->lr_decay_every;
    tc.lr_decay = opts->lr_decay;
    tc.epochs = opts->epochs;
    tc.seed = resolve_seed(opts->seed);
    tc.max_minutes = opts->max_minutes;
    tc.target_sr = opts->target_sr;
    tc.log_csv = opts->log_csv;
    qa::TrainResult res = qa::train(model, ds, tc);
    for (const auto& log : res.log)
      std::printf("epoch %d loss %.4f test SR %.4f (%.0fs)\n", log.epoch,
                  log.train_loss, log.test_sr, log.seconds);
    qa::save_bundle(model, ds.vocab, ds.answers, opts->out);
    std::printf("checkpoint written to %s (final SR %.4f)\n",
                opts->out.c_str(), res.final_sr);
  });
}

void register_eval_qa(CLI::App& app) {
  auto opts = std::make_shared<EvalQaOpts>();
  CLI::App* cmd =
      app.add_subcommand("eval-qa", "Evaluate a QA checkpoint on a dataset");
  cmd->add_option("--ckpt", opts->ckpt, "QA checkpoint")->required();
  cmd->add_option("--dataset", opts->dataset, "Dataset directory")
      ->required();
  cmd->add_option("--split", opts->split, "train, test, or disjoint");
  cmd->add_flag("--confusion", opts->confusion,
                "Print per-answer confusion counts");
  cmd->callback([opts] {
    dataset::QaDataset ds = dataset::load(opts->dataset);
    qa::QaBundle bundle = qa::load_bundle(opts->ckpt);
    dataset::Split split;
    if (opts->split == "train")
      split = dataset::Split::Train;
    else if (opts->split == "test")
      split = dataset::Split::TestSeen;
    else if (opts->split == "disjoint")
      split = dataset::Split::TestDisjoint;
    else
      throw ConfigError("split must be train, test, or disjoint");
    std::map<std::string, std::map<std::string, int>> confusion;
    const double sr = qa::evaluate(*bundle.model, ds, split,
                                   opts->confusion ? &confusion : nullptr);
    std::printf("SR(%s) = %.4f\n", opts->split.c_str(), sr);
    if (opts->confusion) {
      for (const auto& [truth, row] : confusion)
        for (const auto& [pred, count] : row)
          std::printf("confusion %s -> %s : %d\n", truth.c_str(),
                      pred.c_str(), count);
    }
  });
}

}  // namespace eager::cli
