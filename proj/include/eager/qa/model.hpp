#pragma once

#include <memory>
#include <string>
#include <vector>

#include "json.hpp"

#include "eager/lang/lang.hpp"
#include "eager/nn/graph.hpp"
#include "eager/nn/layers.hpp"
#include "eager/shaping/shaping.hpp"

namespace eager::qa {

// Multimodal sequence classifier over (question, observations, actions).
// Question tokens, encoded observations and embedded actions are
// concatenated with modality and position markers, run through self
// attention over the whole episode, pooled and classified over the answer
// vocabulary.
struct QaConfig {
  int d_model = 48;
  int heads = 4;
  int layers = 2;
  int ffn = 96;
  int cell_embed = 8;
  int conv1 = 16;
  int conv2 = 32;
  int max_question_len = 24;
  int max_steps = 513;
  int vocab_size = 0;
  int n_answers = 0;
  std::string activation = "relu";
  uint64_t init_seed = 1;

  nlohmann::json to_json() const;
  static QaConfig from_json(const nlohmann::json& j);
};

class QaModel {
 public:
  explicit QaModel(const QaConfig& cfg);

  const QaConfig& config() const { return cfg_; }
  nn::ParamSet& params() { return ps_; }
  const nn::ParamSet& params() const { return ps_; }

  // Logits [1, n_answers] for one (question, prefix) pair. obs points at
  // t packed 8x8x3 id grids.
  nn::Node* forward(nn::Graph& g, const std::vector<int>& question_ids,
                    const uint8_t* obs, int t,
                    const std::vector<int>& action_ids);
  std::vector<double> probs(const std::vector<int>& question_ids,
                            const uint8_t* obs, int t,
                            const std::vector<int>& action_ids);

  void save(const std::string& path) const;
  static std::unique_ptr<QaModel> load_file(const std::string& path);

 private:
  QaConfig cfg_;
  nn::ParamSet ps_;
  nn::Parameter* tok_ = nullptr;
  nn::Parameter* qpos_ = nullptr;
  nn::Parameter* tpos_ = nullptr;
  nn::Parameter* act_ = nullptr;
  nn::Parameter* mod_ = nullptr;  // [3, d] question/observation/action
  nn::Parameter* cls_ = nullptr;
  nn::Parameter* cell_shape_ = nullptr;
  nn::Parameter* cell_color_ = nullptr;
  nn::Parameter* cell_state_ = nullptr;
  nn::Conv3x3 conv1_, conv2_;
  nn::Linear obs_proj_;
  std::vector<nn::TransformerBlock> blocks_;
  nn::LayerNormP final_ln_;
  nn::Linear head_;
};

// Greedy answer with ties broken toward the lowest vocabulary index.
struct Picked {
  int id = 0;
  double confidence = 0.0;
};
Picked pick_answer(const std::vector<double>& probs, bool suppress_no_answer,
                   int no_answer_id);

// Checkpoint bundling the model with the vocabularies it was trained on,
// so shaping can reconstruct the full inference path from one file.
struct QaBundle {
  std::unique_ptr<QaModel> model;
  lang::Vocab vocab;
  lang::AnswerVocab answers;
};
void save_bundle(const QaModel& model, const lang::Vocab& vocab,
                 const lang::AnswerVocab& answers, const std::string& path);
QaBundle load_bundle(const std::string& path);

// Adapter exposing a trained model as a shaping backend.
class LearnedQa : public shaping::QaBackend {
 public:
  LearnedQa(QaModel* model, const lang::Vocab* vocab,
            const lang::AnswerVocab* answers, bool suppress_no_answer = false);
  std::vector<shaping::QaAnswer> answer(
      const std::vector<const lang::Question*>& questions,
      const shaping::EpisodeContext& ctx) override;
  std::string name() const override { return "learned"; }

 private:
  QaModel* model_;
  const lang::Vocab* vocab_;
  const lang::AnswerVocab* answers_;
  bool suppress_no_answer_;
};

}  // namespace eager::qa
