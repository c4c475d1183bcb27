#include "eager/qa/train.hpp"

#include <omp.h>

#include <chrono>
#include <cmath>

#include "eager/nn/kernels.hpp"
#include "eager/util/csv.hpp"

namespace eager::qa {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Encoded {
  std::vector<int> question;
  const uint8_t* obs;
  int t;
  std::vector<int> actions;
  int target;
};

Encoded encode_example(const dataset::QaDataset& ds,
                       const dataset::QaExample& ex) {
  Encoded e;
  e.question = ds.vocab.encode(ex.question.tokens);
  const bot::Trajectory& traj = ds.trajectories.at(ex.traj_id);
  e.obs = traj.observations.front().data.data();
  e.t = traj.length();
  e.actions.resize(e.t);
  for (int i = 0; i < e.t; ++i)
    e.actions[i] = static_cast<int>(traj.actions[i]);
  e.target = ds.answers.id_of(ex.answer);
  return e;
}

}  // namespace

double evaluate(QaModel& model, const dataset::QaDataset& ds,
                dataset::Split split,
                std::map<std::string, std::map<std::string, int>>* confusion) {
  std::vector<int> idx;
  for (int i = 0; i < static_cast<int>(ds.examples.size()); ++i)
    if (ds.examples[i].split == split) idx.push_back(i);
  if (idx.empty()) throw DataError("evaluation split is empty");
  std::vector<int> predicted(idx.size());
  const bool was_parallel = nn::kernels::parallel_enabled();
  nn::kernels::parallel_enabled() = false;
#pragma omp parallel for schedule(dynamic, 16)
  for (size_t j = 0; j < idx.size(); ++j) {
    const Encoded e = encode_example(ds, ds.examples[idx[j]]);
    const std::vector<double> probs =
        model.probs(e.question, e.obs, e.t, e.actions);
    predicted[j] = pick_answer(probs, false, ds.answers.no_answer_id()).id;
  }
  nn::kernels::parallel_enabled() = was_parallel;
  int correct = 0;
  for (size_t j = 0; j < idx.size(); ++j) {
    const auto& ex = ds.examples[idx[j]];
    const std::string& pred = ds.answers.answers.at(predicted[j]);
    correct += pred == ex.answer;
    if (confusion) (*confusion)[ex.answer][pred]++;
  }
  return static_cast<double>(correct) / static_cast<double>(idx.size());
}

TrainResult train(QaModel& model, const dataset::QaDataset& ds,
                  const TrainConfig& cfg) {
  std::vector<int> train_idx;
  for (int i = 0; i < static_cast<int>(ds.examples.size()); ++i)
    if (ds.examples[i].split == dataset::Split::Train) train_idx.push_back(i);
  if (train_idx.empty()) throw DataError("training split is empty");

  nn::Adam adam;
  adam.lr = cfg.lr;
  TrainResult result;
  std::unique_ptr<CsvWriter> csv;
  if (!cfg.log_csv.empty())
    csv = std::make_unique<CsvWriter>(
        cfg.log_csv,
        std::vector<std::string>{"epoch", "train_loss", "test_SR"});

  const auto t0 = Clock::now();
  // Per-example gradient buffers keep accumulation order fixed no matter
  // how many threads run the batch.
  auto& params = model.params();
  std::vector<nn::Parameter*> plist;
  for (auto& p : params.all()) plist.push_back(p.get());

  std::vector<double> snapshot;
  auto snapshot_params = [&] {
    snapshot.clear();
    for (auto* p : plist)
      snapshot.insert(snapshot.end(), p->v.d.begin(), p->v.d.end());
  };
  auto restore_params = [&] {
    size_t off = 0;
    for (auto* p : plist) {
      std::copy_n(snapshot.begin() + off, p->v.numel(), p->v.d.begin());
      off += p->v.numel();
    }
  };

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    snapshot_params();
    adam.lr = cfg.lr * std::pow(cfg.lr_decay, epoch / cfg.lr_decay_every);
    Rng shuffle_rng(derive_seed(cfg.seed, "epoch") + epoch);
    std::vector<int> order = train_idx;
    shuffle_rng.shuffle(order);

    double loss_sum = 0.0;
    long loss_count = 0;
    const bool was_parallel = nn::kernels::parallel_enabled();
    nn::kernels::parallel_enabled() = false;  // batch-level parallelism
    for (size_t start = 0; start < order.size();
         start += cfg.batch_size) {
      const int b =
          std::min<size_t>(cfg.batch_size, order.size() - start);
      std::vector<std::vector<nn::Tensor>> grads(b);
      std::vector<double> losses(b);
#pragma omp parallel for schedule(dynamic, 1)
      for (int e = 0; e < b; ++e) {
        const Encoded enc =
            encode_example(ds, ds.examples[order[start + e]]);
        nn::Graph g;
        nn::Node* logits =
            model.forward(g, enc.question, enc.obs, enc.t, enc.actions);
        nn::Node* loss = g.mean_all(
            g.cross_entropy_rows(logits, {enc.target}));
        nn::Node* scaled = g.affine(loss, 1.0 / b, 0.0);
        g.backward(scaled, /*accumulate_params=*/false);
        losses[e] = loss->scalar();
        grads[e].resize(plist.size());
        for (auto [param, grad] : g.param_grads()) {
          for (size_t pi = 0; pi < plist.size(); ++pi) {
            if (plist[pi] != param) continue;
            if (grads[e][pi].d.empty())
              grads[e][pi] = *grad;
            else
              for (int64_t k = 0; k < grad->numel(); ++k)
                grads[e][pi].d[k] += grad->d[k];
            break;
          }
        }
      }
      params.zero_grad();
      for (int e = 0; e < b; ++e)
        for (size_t pi = 0; pi < plist.size(); ++pi) {
          if (grads[e][pi].d.empty()) continue;
          for (int64_t k = 0; k < grads[e][pi].numel(); ++k)
            plist[pi]->g.d[k] += grads[e][pi].d[k];
        }
      double batch_loss = 0.0;
      for (int e = 0; e < b; ++e) batch_loss += losses[e];
      batch_loss /= b;
      if (!std::isfinite(batch_loss)) {
        restore_params();
        nn::kernels::parallel_enabled() = was_parallel;
        throw NumericError("QA training diverged at epoch " +
                           std::to_string(epoch));
      }
      loss_sum += batch_loss * b;
      loss_count += b;
      adam.step(params);
      if (cfg.max_minutes > 0.0 &&
          seconds_since(t0) > cfg.max_minutes * 60.0)
        break;
    }
    nn::kernels::parallel_enabled() = was_parallel;

    bool has_test = false;
    for (const auto& e : ds.examples)
      has_test |= e.split == dataset::Split::TestSeen;
    EpochLog log;
    log.epoch = epoch;
    log.train_loss = loss_sum / std::max(1L, loss_count);
    log.test_sr =
        has_test ? evaluate(model, ds, dataset::Split::TestSeen) : -1.0;
    log.seconds = seconds_since(t0);
    result.log.push_back(log);
    result.final_sr = log.test_sr;
    if (csv)
      csv->write_row({static_cast<double>(log.epoch), log.train_loss,
                      log.test_sr});
    if (cfg.target_sr > 0.0 && log.test_sr >= cfg.target_sr) {
      result.stopped_early = true;
      break;
    }
    if (cfg.max_minutes > 0.0 &&
        seconds_since(t0) > cfg.max_minutes * 60.0)
      break;
  }
  return result;
}

}  // namespace eager::qa
