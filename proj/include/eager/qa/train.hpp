#pragma once

#include <map>
#include <string>
#include <vector>

#include "eager/dataset/dataset.hpp"
#include "eager/qa/model.hpp"

namespace eager::qa {

struct TrainConfig {
  int batch_size = 10;
  double lr = 1e-4;
  int lr_decay_every = 5;  // epochs between decays
  double lr_decay = 0.1;
  int epochs = 20;
  uint64_t seed = 0;
  double max_minutes = 0.0;  // 0 = no wall-clock budget
  double target_sr = 0.0;    // early stop once test SR reaches this
  std::string log_csv;       // per-epoch CSV (epoch, train_loss, test_SR)
};

struct EpochLog {
  int epoch = 0;
  double train_loss = 0.0;
  double test_sr = 0.0;
  double seconds = 0.0;
};

struct TrainResult {
  std::vector<EpochLog> log;
  double final_sr = 0.0;
  bool stopped_early = false;
};

// Cross-entropy training over the train split; success rate evaluated on
// the seen-goal test split each epoch. Throws NumericError on divergence
// after restoring the last finite parameters.
TrainResult train(QaModel& model, const dataset::QaDataset& ds,
                  const TrainConfig& cfg);

// Fraction answered correctly on a split; optionally fills a
// truth -> predicted confusion table.
double evaluate(QaModel& model, const dataset::QaDataset& ds,
                dataset::Split split,
                std::map<std::string, std::map<std::string, int>>* confusion =
                    nullptr);

}  // namespace eager::qa
