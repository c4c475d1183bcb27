#include "eager/qa/model.hpp"

#include <cmath>

#include "eager/grid/types.hpp"
#include "eager/nn/kernels.hpp"
#include "eager/nn/serialize.hpp"

namespace eager::qa {

using nn::Graph;
using nn::Node;

nlohmann::json QaConfig::to_json() const {
  return {{"d_model", d_model},
          {"heads", heads},
          {"layers", layers},
          {"ffn", ffn},
          {"cell_embed", cell_embed},
          {"conv1", conv1},
          {"conv2", conv2},
          {"max_question_len", max_question_len},
          {"max_steps", max_steps},
          {"vocab_size", vocab_size},
          {"n_answers", n_answers},
          {"activation", activation},
          {"init_seed", init_seed}};
}

QaConfig QaConfig::from_json(const nlohmann::json& j) {
  QaConfig c;
  c.d_model = j.at("d_model");
  c.heads = j.at("heads");
  c.layers = j.at("layers");
  c.ffn = j.at("ffn");
  c.cell_embed = j.at("cell_embed");
  c.conv1 = j.at("conv1");
  c.conv2 = j.at("conv2");
  c.max_question_len = j.at("max_question_len");
  c.max_steps = j.at("max_steps");
  c.vocab_size = j.at("vocab_size");
  c.n_answers = j.at("n_answers");
  c.activation = j.at("activation");
  c.init_seed = j.at("init_seed");
  return c;
}

QaModel::QaModel(const QaConfig& cfg) : cfg_(cfg) {
  if (cfg_.vocab_size < 2 || cfg_.n_answers < 2)
    throw ConfigError("QA model needs vocabulary and answer sizes");
  if (cfg_.d_model % cfg_.heads != 0)
    throw ConfigError("d_model must be divisible by heads");
  Rng rng(derive_seed(cfg_.init_seed, "qa-init"));
  const int d = cfg_.d_model;
  tok_ = &nn::add_embedding(ps_, "tok", cfg_.vocab_size, d, rng);
  qpos_ = &nn::add_embedding(ps_, "qpos", cfg_.max_question_len, d, rng);
  tpos_ = &nn::add_embedding(ps_, "tpos", cfg_.max_steps, d, rng);
  act_ = &nn::add_embedding(ps_, "act", grid::kNumActions, d, rng);
  mod_ = &nn::add_embedding(ps_, "mod", 3, d, rng);
  cls_ = &nn::add_embedding(ps_, "cls", 1, d, rng);
  cell_shape_ = &nn::add_embedding(ps_, "cell.shape", 8, cfg_.cell_embed, rng);
  cell_color_ = &nn::add_embedding(ps_, "cell.color", 6, cfg_.cell_embed, rng);
  cell_state_ = &nn::add_embedding(ps_, "cell.state", 3, cfg_.cell_embed, rng);
  conv1_ = nn::Conv3x3(ps_, "obs.conv1", cfg_.cell_embed, cfg_.conv1, 2, rng);
  conv2_ = nn::Conv3x3(ps_, "obs.conv2", cfg_.conv1, cfg_.conv2, 2, rng);
  obs_proj_ = nn::Linear(ps_, "obs.proj", 4 * cfg_.conv2, d, rng);
  for (int l = 0; l < cfg_.layers; ++l)
    blocks_.emplace_back(ps_, "blk" + std::to_string(l), d, cfg_.heads,
                         cfg_.ffn, cfg_.activation, rng);
  final_ln_ = nn::LayerNormP(ps_, "final_ln", d);
  head_ = nn::Linear(ps_, "head", d, cfg_.n_answers, rng);
}

Node* QaModel::forward(Graph& g, const std::vector<int>& question_ids,
                       const uint8_t* obs, int t,
                       const std::vector<int>& action_ids) {
  const int L = static_cast<int>(question_ids.size());
  if (L < 1 || L > cfg_.max_question_len)
    throw UsageError("question length out of range");
  if (t < 1 || t > cfg_.max_steps)
    throw UsageError("trajectory length out of range");
  if (static_cast<int>(action_ids.size()) != t)
    throw UsageError("observation/action count mismatch");

  Node* tok_tab = g.param(*tok_);
  Node* qpos_tab = g.param(*qpos_);
  Node* tpos_tab = g.param(*tpos_);
  Node* mod_tab = g.param(*mod_);

  std::vector<int> qpos_ids(L), tpos_ids(t);
  for (int i = 0; i < L; ++i) qpos_ids[i] = i;
  for (int i = 0; i < t; ++i) tpos_ids[i] = i;

  // Question stream.
  Node* q = g.add(g.embed(tok_tab, question_ids), g.embed(qpos_tab, qpos_ids));
  q = g.add_bias(q, g.row(mod_tab, 0));

  // Observation stream: per-cell summed embeddings -> two strided convs.
  Node* cells = g.grid_embed(g.param(*cell_shape_), g.param(*cell_color_),
                             g.param(*cell_state_), obs,
                             t * grid::kViewSize * grid::kViewSize);
  Node* c1 = nn::activate(
      g, conv1_(g, cells, t, grid::kViewSize, grid::kViewSize),
      cfg_.activation);
  Node* c2 = nn::activate(g, conv2_(g, c1, t, 4, 4), cfg_.activation);
  Node* flat = g.reshape(c2, t, 4 * cfg_.conv2);
  Node* v = g.add(obs_proj_(g, flat), g.embed(tpos_tab, tpos_ids));
  v = g.add_bias(v, g.row(mod_tab, 1));

  // Action stream.
  Node* a = g.add(g.embed(g.param(*act_), action_ids),
                  g.embed(tpos_tab, tpos_ids));
  a = g.add_bias(a, g.row(mod_tab, 2));

  Node* x = g.concat_rows({g.embed(g.param(*cls_), {0}), q, v, a});
  for (const auto& blk : blocks_) x = blk(g, x);
  x = final_ln_(g, x);
  return head_(g, g.mean_rows(x));
}

std::vector<double> QaModel::probs(const std::vector<int>& question_ids,
                                   const uint8_t* obs, int t,
                                   const std::vector<int>& action_ids) {
  Graph g;
  Node* logits = forward(g, question_ids, obs, t, action_ids);
  std::vector<double> out(cfg_.n_answers);
  nn::kernels::softmax_rows(logits->v.data(), out.data(), 1, cfg_.n_answers);
  return out;
}

void QaModel::save(const std::string& path) const {
  nlohmann::json meta = {{"kind", "qa-model"}, {"config", cfg_.to_json()}};
  nn::save_checkpoint(path, ps_, meta);
}

std::unique_ptr<QaModel> QaModel::load_file(const std::string& path) {
  nlohmann::json meta = nn::read_checkpoint_meta(path);
  if (!meta.contains("kind") || meta.at("kind") != "qa-model")
    throw DataError("not a QA checkpoint: " + path);
  auto model = std::make_unique<QaModel>(QaConfig::from_json(meta.at("config")));
  nn::load_checkpoint(path, model->params());
  return model;
}

void save_bundle(const QaModel& model, const lang::Vocab& vocab,
                 const lang::AnswerVocab& answers, const std::string& path) {
  nlohmann::json meta = {{"kind", "qa-model"},
                         {"config", model.config().to_json()},
                         {"vocab", vocab.tokens},
                         {"answers", answers.answers}};
  nn::save_checkpoint(path, model.params(), meta);
}

QaBundle load_bundle(const std::string& path) {
  nlohmann::json meta = nn::read_checkpoint_meta(path);
  if (!meta.contains("kind") || meta.at("kind") != "qa-model")
    throw DataError("not a QA checkpoint: " + path);
  if (!meta.contains("vocab") || !meta.contains("answers"))
    throw DataError("QA checkpoint lacks vocabularies: " + path);
  QaBundle bundle;
  bundle.model =
      std::make_unique<QaModel>(QaConfig::from_json(meta.at("config")));
  nn::load_checkpoint(path, bundle.model->params());
  for (const auto& t : meta.at("vocab")) {
    bundle.vocab.index[t] = static_cast<int>(bundle.vocab.tokens.size());
    bundle.vocab.tokens.push_back(t);
  }
  for (const auto& a : meta.at("answers")) {
    bundle.answers.index[a] =
        static_cast<int>(bundle.answers.answers.size());
    bundle.answers.answers.push_back(a);
  }
  return bundle;
}

Picked pick_answer(const std::vector<double>& probs, bool suppress_no_answer,
                   int no_answer_id) {
  Picked best;
  best.id = -1;
  for (int i = 0; i < static_cast<int>(probs.size()); ++i) {
    if (suppress_no_answer && i == no_answer_id) continue;
    if (best.id < 0 || probs[i] > best.confidence) {  // ties keep lower index
      best.id = i;
      best.confidence = probs[i];
    }
  }
  return best;
}

LearnedQa::LearnedQa(QaModel* model, const lang::Vocab* vocab,
                     const lang::AnswerVocab* answers,
                     bool suppress_no_answer)
    : model_(model),
      vocab_(vocab),
      answers_(answers),
      suppress_no_answer_(suppress_no_answer) {
  if (!model_ || !vocab_ || !answers_)
    throw ConfigError("learned QA backend needs model and vocabularies");
}

std::vector<shaping::QaAnswer> LearnedQa::answer(
    const std::vector<const lang::Question*>& questions,
    const shaping::EpisodeContext& ctx) {
  if (!ctx.observations || !ctx.actions)
    throw UsageError("learned backend needs the trajectory prefix");
  const int t = ctx.t;
  std::vector<uint8_t> obs(static_cast<size_t>(t) * grid::kObsLen);
  for (int i = 0; i < t; ++i)
    std::copy((*ctx.observations)[i].data.begin(),
              (*ctx.observations)[i].data.end(),
              obs.begin() + static_cast<size_t>(i) * grid::kObsLen);
  std::vector<int> acts(t);
  for (int i = 0; i < t; ++i) acts[i] = static_cast<int>((*ctx.actions)[i]);

  std::vector<shaping::QaAnswer> out(questions.size());
  for (size_t i = 0; i < questions.size(); ++i) {
    const std::vector<int> qids = vocab_->encode(questions[i]->tokens);
    const std::vector<double> probs =
        model_->probs(qids, obs.data(), t, acts);
    const Picked p =
        pick_answer(probs, suppress_no_answer_, answers_->no_answer_id());
    out[i] = {answers_->answers.at(p.id), p.confidence};
  }
  return out;
}

}  // namespace eager::qa
