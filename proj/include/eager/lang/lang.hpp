#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "eager/grid/task.hpp"

namespace eager::lang {

inline const std::string kMaskToken = "<<question>>";
inline const std::string kPadToken = "<eps>";
inline const std::string kNoAnswerToken = "no_answer";

using Tokens = std::vector<std::string>;

std::string join(const Tokens& tokens);
Tokens tokenize(const std::string& text);  // whitespace split, lowercased

// The closed lexicon standing in for POS tagging: colour adjectives and
// object nouns of the synthetic grammar.
bool is_lexicon_word(const std::string& token);
bool is_function_word(const std::string& token);

// Deterministic template fill for a bound goal.
Tokens instruct(const grid::Goal& goal);

struct Question {
  Tokens tokens;       // instruction with one token masked
  std::string answer;  // the masked token
  int mask_pos = 0;

  bool operator==(const Question&) const = default;
};

// One question per lexicon hit, left to right. Throws ConfigError on a
// token outside the lexicon and function words.
std::vector<Question> qg(const Tokens& instruction);

struct AnswerVocab {
  std::vector<std::string> answers;  // masked tokens in first-occurrence
                                     // order, then no_answer last
  std::unordered_map<std::string, int> index;

  int id_of(const std::string& a) const;
  int no_answer_id() const { return static_cast<int>(answers.size()) - 1; }
  int size() const { return static_cast<int>(answers.size()); }

  static AnswerVocab build(const std::vector<Tokens>& corpus);
  void save(const std::string& path) const;
  static AnswerVocab load(const std::string& path);
};

// Token vocabulary for model input. Id 0 is the pad symbol, id 1 the mask.
struct Vocab {
  std::vector<std::string> tokens;
  std::unordered_map<std::string, int> index;

  int id_of(const std::string& t) const;
  std::vector<int> encode(const Tokens& toks) const;
  int size() const { return static_cast<int>(tokens.size()); }

  static Vocab standard();  // covers every template over all colours/nouns
  void save(const std::string& path) const;
  static Vocab load(const std::string& path);
};

// Which clause and which lexicon slot a mask position refers to; lets the
// ground-truth oracle map questions onto simulator events.
struct MaskRole {
  int clause_index = 0;   // 0 or 1
  grid::ClauseKind kind = grid::ClauseKind::PickUp;
  int hit_index = 0;  // index among the clause's lexicon hits
};
MaskRole role_of(const Tokens& instruction, int mask_pos);

}  // namespace eager::lang
