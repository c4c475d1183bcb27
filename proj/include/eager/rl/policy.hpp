#pragma once

#include <memory>
#include <string>
#include <vector>

#include "json.hpp"

#include "eager/lang/lang.hpp"
#include "eager/nn/graph.hpp"
#include "eager/nn/layers.hpp"

namespace eager::rl {

// Recurrent instruction-conditioned actor-critic: convolutional grid
// encoder, instruction embedding driving a per-channel affine modulation
// of the image features, gated recurrent memory, actor and critic heads.
struct PolicyConfig {
  int cell_embed = 8;
  int conv1 = 16;
  int conv2 = 16;
  int instr_embed = 16;
  int instr_dim = 32;
  int instr_len = 24;  // padded instruction length
  int mem_dim = 128;
  int n_actions = 7;
  int vocab_size = 0;
  std::string activation = "relu";
  uint64_t init_seed = 1;

  nlohmann::json to_json() const;
  static PolicyConfig from_json(const nlohmann::json& j);
};

class Policy {
 public:
  explicit Policy(const PolicyConfig& cfg);

  struct Out {
    nn::Node* logits = nullptr;  // [B, n_actions]
    nn::Node* value = nullptr;   // [B, 1]
    nn::Node* memory = nullptr;  // [B, mem_dim]
  };

  // Batched step. obs holds B packed 8x8x3 grids; instr_ids/instr_w are
  // [B * instr_len] padded token ids and weights (1/len on real tokens).
  Out forward(nn::Graph& g, const uint8_t* obs, int batch,
              const std::vector<int>& instr_ids,
              const std::vector<double>& instr_w, nn::Node* memory) const;

  // Packs instructions into padded id/weight rows.
  void encode_instruction(const std::vector<std::string>& tokens,
                          int* ids_out, double* w_out) const;

  // Modulation scales/shifts for a single instruction (activation probe).
  std::vector<double> modulation(
      const std::vector<std::string>& tokens) const;

  const PolicyConfig& config() const { return cfg_; }
  nn::ParamSet& params() { return ps_; }
  const nn::ParamSet& params() const { return ps_; }

  void save(const std::string& path) const;
  static std::unique_ptr<Policy> load_file(const std::string& path);

 private:
  PolicyConfig cfg_;
  lang::Vocab vocab_;
  nn::ParamSet ps_;
  nn::Parameter* cell_shape_ = nullptr;
  nn::Parameter* cell_color_ = nullptr;
  nn::Parameter* cell_state_ = nullptr;
  nn::Parameter* tok_ = nullptr;
  nn::Parameter* tok_pos_ = nullptr;
  nn::Conv3x3 conv1_, conv2_;
  nn::Linear instr_proj_, film_proj_;
  nn::GruCell gru_;
  nn::Linear actor_, critic_;
};

}  // namespace eager::rl
