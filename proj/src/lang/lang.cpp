#include "eager/lang/lang.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "eager/util/errors.hpp"

namespace eager::lang {

namespace {

const std::vector<std::string>& color_words() {
  static const std::vector<std::string> w = {"red",    "green",  "blue",
                                             "purple", "yellow", "grey"};
  return w;
}

const std::vector<std::string>& noun_words() {
  static const std::vector<std::string> w = {"ball", "box", "key", "door"};
  return w;
}

const std::vector<std::string>& function_words() {
  static const std::vector<std::string> w = {
      "put", "the", "a", "next", "to", "pick", "up", "open",
      "before", "after", "you"};
  return w;
}

Tokens clause_tokens(const grid::Clause& c) {
  using grid::ClauseKind;
  switch (c.kind) {
    case ClauseKind::PutNext:
      return {"put", "the", grid::color_name(c.move.color),
              grid::kind_noun(c.move.kind), "next", "to", "the",
              grid::color_name(c.anchor.color),
              grid::kind_noun(c.anchor.kind)};
    case ClauseKind::PickUp:
      return {"pick", "up", "a", grid::color_name(c.move.color),
              grid::kind_noun(c.move.kind)};
    case ClauseKind::Open:
    case ClauseKind::Unlock:
      return {"open", "the", grid::color_name(c.door_color), "door"};
  }
  throw UsageError("bad clause kind");
}

}  // namespace

std::string join(const Tokens& tokens) {
  std::string out;
  for (size_t i = 0; i < tokens.size(); ++i) {
    if (i) out += ' ';
    out += tokens[i];
  }
  return out;
}

Tokens tokenize(const std::string& text) {
  Tokens out;
  std::stringstream ss(text);
  std::string tok;
  while (ss >> tok) {
    std::transform(tok.begin(), tok.end(), tok.begin(),
                   [](unsigned char c) { return std::tolower(c); });
    out.push_back(tok);
  }
  return out;
}

bool is_lexicon_word(const std::string& token) {
  const auto& cs = color_words();
  const auto& ns = noun_words();
  return std::find(cs.begin(), cs.end(), token) != cs.end() ||
         std::find(ns.begin(), ns.end(), token) != ns.end();
}

bool is_function_word(const std::string& token) {
  const auto& fs = function_words();
  return std::find(fs.begin(), fs.end(), token) != fs.end();
}

Tokens instruct(const grid::Goal& goal) {
  Tokens out = clause_tokens(goal.clauses.at(0));
  if (goal.is_sequence()) {
    out.push_back(goal.order == grid::SeqOrder::Before ? "before" : "after");
    out.push_back("you");
    Tokens second = clause_tokens(goal.clauses.at(1));
    out.insert(out.end(), second.begin(), second.end());
  }
  return out;
}

std::vector<Question> qg(const Tokens& instruction) {
  std::vector<Question> out;
  for (size_t i = 0; i < instruction.size(); ++i) {
    const std::string& tok = instruction[i];
    if (is_lexicon_word(tok)) {
      Question q;
      q.tokens = instruction;
      q.tokens[i] = kMaskToken;
      q.answer = tok;
      q.mask_pos = static_cast<int>(i);
      out.push_back(std::move(q));
    } else if (!is_function_word(tok)) {
      throw ConfigError("token outside lexicon: " + tok);
    }
  }
  return out;
}

int AnswerVocab::id_of(const std::string& a) const {
  auto it = index.find(a);
  if (it == index.end()) throw DataError("unknown answer token: " + a);
  return it->second;
}

AnswerVocab AnswerVocab::build(const std::vector<Tokens>& corpus) {
  AnswerVocab v;
  for (const auto& instr : corpus) {
    for (const auto& q : qg(instr)) {
      if (!v.index.count(q.answer)) {
        v.index[q.answer] = static_cast<int>(v.answers.size());
        v.answers.push_back(q.answer);
      }
    }
  }
  if (v.answers.empty())
    std::fprintf(stderr,
                 "warning: answer vocabulary built from a corpus with no "
                 "maskable tokens\n");
  v.index[kNoAnswerToken] = static_cast<int>(v.answers.size());
  v.answers.push_back(kNoAnswerToken);
  return v;
}

void AnswerVocab::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write: " + path);
  for (const auto& a : answers) out << a << '\n';
}

AnswerVocab AnswerVocab::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open: " + path);
  AnswerVocab v;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    v.index[line] = static_cast<int>(v.answers.size());
    v.answers.push_back(line);
  }
  if (v.answers.empty() || v.answers.back() != kNoAnswerToken)
    throw DataError("answer vocabulary malformed: " + path);
  return v;
}

int Vocab::id_of(const std::string& t) const {
  auto it = index.find(t);
  if (it == index.end()) throw DataError("token not in vocabulary: " + t);
  return it->second;
}

std::vector<int> Vocab::encode(const Tokens& toks) const {
  std::vector<int> out;
  out.reserve(toks.size());
  for (const auto& t : toks) out.push_back(id_of(t));
  return out;
}

Vocab Vocab::standard() {
  Vocab v;
  auto push = [&v](const std::string& t) {
    if (!v.index.count(t)) {
      v.index[t] = static_cast<int>(v.tokens.size());
      v.tokens.push_back(t);
    }
  };
  push(kPadToken);
  push(kMaskToken);
  for (const auto& t : function_words()) push(t);
  for (const auto& t : color_words()) push(t);
  for (const auto& t : noun_words()) push(t);
  return v;
}

void Vocab::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write: " + path);
  for (const auto& t : tokens) out << t << '\n';
}

Vocab Vocab::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open: " + path);
  Vocab v;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    v.index[line] = static_cast<int>(v.tokens.size());
    v.tokens.push_back(line);
  }
  if (v.size() < 2 || v.tokens[0] != kPadToken || v.tokens[1] != kMaskToken)
    throw DataError("vocabulary malformed: " + path);
  return v;
}

MaskRole role_of(const Tokens& instruction, int mask_pos) {
  int split = -1;
  for (size_t i = 0; i < instruction.size(); ++i) {
    if (instruction[i] == "before" || instruction[i] == "after") {
      split = static_cast<int>(i);
      break;
    }
  }
  MaskRole role;
  int begin = 0, end = static_cast<int>(instruction.size());
  if (split >= 0 && mask_pos > split) {
    role.clause_index = 1;
    begin = split + 2;  // skip the connector and "you"
  } else if (split >= 0) {
    end = split;
  }
  const std::string& head = instruction[begin];
  if (head == "put")
    role.kind = grid::ClauseKind::PutNext;
  else if (head == "pick")
    role.kind = grid::ClauseKind::PickUp;
  else if (head == "open")
    role.kind = grid::ClauseKind::Open;
  else
    throw ConfigError("unrecognised instruction template: " + head);
  int hits = 0;
  for (int i = begin; i < end; ++i) {
    if (i == mask_pos) {
      role.hit_index = hits;
      return role;
    }
    if (is_lexicon_word(instruction[i]) || instruction[i] == kMaskToken)
      ++hits;
  }
  throw UsageError("mask position outside its clause");
}

}  // namespace eager::lang
