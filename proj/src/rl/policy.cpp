#include "eager/rl/policy.hpp"

#include "eager/grid/types.hpp"
#include "eager/nn/serialize.hpp"

namespace eager::rl {

using nn::Graph;
using nn::Node;

nlohmann::json PolicyConfig::to_json() const {
  return {{"cell_embed", cell_embed}, {"conv1", conv1},
          {"conv2", conv2},           {"instr_embed", instr_embed},
          {"instr_dim", instr_dim},   {"instr_len", instr_len},
          {"mem_dim", mem_dim},       {"n_actions", n_actions},
          {"vocab_size", vocab_size}, {"activation", activation},
          {"init_seed", init_seed}};
}

PolicyConfig PolicyConfig::from_json(const nlohmann::json& j) {
  PolicyConfig c;
  c.cell_embed = j.at("cell_embed");
  c.conv1 = j.at("conv1");
  c.conv2 = j.at("conv2");
  c.instr_embed = j.at("instr_embed");
  c.instr_dim = j.at("instr_dim");
  c.instr_len = j.at("instr_len");
  c.mem_dim = j.at("mem_dim");
  c.n_actions = j.at("n_actions");
  c.vocab_size = j.at("vocab_size");
  c.activation = j.at("activation");
  c.init_seed = j.at("init_seed");
  return c;
}

Policy::Policy(const PolicyConfig& cfg) : cfg_(cfg) {
  vocab_ = lang::Vocab::standard();
  if (cfg_.vocab_size == 0) cfg_.vocab_size = vocab_.size();
  if (cfg_.vocab_size != vocab_.size())
    throw ConfigError("policy vocabulary size mismatch");
  Rng rng(derive_seed(cfg_.init_seed, "policy-init"));
  cell_shape_ =
      &nn::add_embedding(ps_, "cell.shape", 8, cfg_.cell_embed, rng);
  cell_color_ =
      &nn::add_embedding(ps_, "cell.color", 6, cfg_.cell_embed, rng);
  cell_state_ =
      &nn::add_embedding(ps_, "cell.state", 3, cfg_.cell_embed, rng);
  tok_ = &nn::add_embedding(ps_, "tok", cfg_.vocab_size, cfg_.instr_embed,
                            rng);
  tok_pos_ =
      &nn::add_embedding(ps_, "tok.pos", cfg_.instr_len, cfg_.instr_embed,
                         rng);
  conv1_ = nn::Conv3x3(ps_, "conv1", cfg_.cell_embed, cfg_.conv1, 2, rng);
  conv2_ = nn::Conv3x3(ps_, "conv2", cfg_.conv1, cfg_.conv2, 1, rng);
  instr_proj_ =
      nn::Linear(ps_, "instr", cfg_.instr_embed, cfg_.instr_dim, rng);
  film_proj_ = nn::Linear(ps_, "film", cfg_.instr_dim, 2 * cfg_.conv2, rng);
  gru_ = nn::GruCell(ps_, "mem", cfg_.conv2, cfg_.mem_dim, rng);
  actor_ = nn::Linear(ps_, "actor", cfg_.mem_dim, cfg_.n_actions, rng);
  critic_ = nn::Linear(ps_, "critic", cfg_.mem_dim, 1, rng);
}

void Policy::encode_instruction(const std::vector<std::string>& tokens,
                                int* ids_out, double* w_out) const {
  const int len = static_cast<int>(tokens.size());
  if (len > cfg_.instr_len)
    throw UsageError("instruction longer than instr_len");
  const double w = len > 0 ? 1.0 / len : 0.0;
  for (int i = 0; i < cfg_.instr_len; ++i) {
    ids_out[i] = i < len ? vocab_.id_of(tokens[i]) : 0;
    w_out[i] = i < len ? w : 0.0;
  }
}

Policy::Out Policy::forward(Graph& g, const uint8_t* obs, int batch,
                            const std::vector<int>& instr_ids,
                            const std::vector<double>& instr_w,
                            Node* memory) const {
  const int cells_per = grid::kViewSize * grid::kViewSize;
  if (static_cast<int>(instr_ids.size()) != batch * cfg_.instr_len)
    throw UsageError("instruction batch shape mismatch");

  // Image pathway.
  Node* cells = g.grid_embed(g.param(*cell_shape_), g.param(*cell_color_),
                             g.param(*cell_state_), obs, batch * cells_per);
  Node* c1 = nn::activate(
      g, conv1_(g, cells, batch, grid::kViewSize, grid::kViewSize),
      cfg_.activation);
  Node* c2 = conv2_(g, c1, batch, 4, 4);  // [batch*16, conv2]

  // Instruction pathway: weighted positional bag, then projection.
  std::vector<int> pos_ids(instr_ids.size());
  for (size_t i = 0; i < instr_ids.size(); ++i)
    pos_ids[i] = static_cast<int>(i % cfg_.instr_len);
  Node* tok = g.add(g.embed(g.param(*tok_), instr_ids),
                    g.embed(g.param(*tok_pos_), pos_ids));
  Node* w = g.constant(nn::Tensor({batch * cfg_.instr_len, 1},
                                  std::vector<double>(instr_w)));
  Node* pooled = g.mean_rows_grouped(g.mul_colvec(tok, w), cfg_.instr_len);
  Node* instr = g.tanh_(
      instr_proj_(g, g.affine(pooled, cfg_.instr_len, 0.0)));

  // Feature-wise modulation of the image features by the instruction.
  Node* gb = film_proj_(g, instr);
  Node* gamma = g.slice_cols(gb, 0, cfg_.conv2);
  Node* beta = g.slice_cols(gb, cfg_.conv2, 2 * cfg_.conv2);
  Node* modulated =
      nn::activate(g, g.film(c2, gamma, beta, 16), cfg_.activation);
  Node* img = g.mean_rows_grouped(modulated, 16);  // [batch, conv2]

  Out out;
  out.memory = gru_.step(g, img, memory);
  out.logits = actor_(g, out.memory);
  out.value = critic_(g, out.memory);
  return out;
}

std::vector<double> Policy::modulation(
    const std::vector<std::string>& tokens) const {
  std::vector<int> ids(cfg_.instr_len);
  std::vector<double> w(cfg_.instr_len);
  encode_instruction(tokens, ids.data(), w.data());
  Graph g;
  std::vector<int> pos_ids(cfg_.instr_len);
  for (int i = 0; i < cfg_.instr_len; ++i) pos_ids[i] = i;
  Node* tok = g.add(g.embed(g.param(*tok_), ids),
                    g.embed(g.param(*tok_pos_), pos_ids));
  Node* wn = g.constant(nn::Tensor({cfg_.instr_len, 1}, std::move(w)));
  Node* pooled = g.mean_rows_grouped(g.mul_colvec(tok, wn), cfg_.instr_len);
  Node* instr =
      g.tanh_(instr_proj_(g, g.affine(pooled, cfg_.instr_len, 0.0)));
  Node* gb = film_proj_(g, instr);
  return gb->v.d;
}

void Policy::save(const std::string& path) const {
  nlohmann::json meta = {{"kind", "policy-model"},
                         {"config", cfg_.to_json()}};
  nn::save_checkpoint(path, ps_, meta);
}

std::unique_ptr<Policy> Policy::load_file(const std::string& path) {
  nlohmann::json meta = nn::read_checkpoint_meta(path);
  if (!meta.contains("kind") || meta.at("kind") != "policy-model")
    throw DataError("not a policy checkpoint: " + path);
  auto policy =
      std::make_unique<Policy>(PolicyConfig::from_json(meta.at("config")));
  nn::load_checkpoint(path, policy->params());
  return policy;
}

}  // namespace eager::rl
