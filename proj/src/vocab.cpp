#include "bgen/vocab.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace bgen {

namespace {

const char* kReservedTokens[] = {"[PAD]", "[UNK]", "[MASK]", "[SEP]", "[STOP]", "[IMG]"};

bool looks_like_specifier(const std::string& tok) {
  if (tok.size() < 3 || tok.front() != '[' || tok.back() != ']') return false;
  for (std::size_t i = 1; i + 1 < tok.size(); ++i) {
    if (!std::isupper(static_cast<unsigned char>(tok[i]))) return false;
  }
  return true;
}

}  // namespace

std::string Vocabulary::lowercase(std::string text) {
  std::transform(text.begin(), text.end(), text.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return text;
}

std::vector<std::string> Vocabulary::split_words(const std::string& text) {
  std::istringstream in(text);
  std::vector<std::string> words;
  std::string w;
  while (in >> w) words.push_back(w);
  return words;
}

std::string Vocabulary::specifier_token(const std::string& language) {
  if (language.empty()) throw std::invalid_argument("vocab: empty language name");
  std::string up = language;
  std::transform(up.begin(), up.end(), up.begin(),
                 [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
  return "[" + up + "]";
}

void Vocabulary::add_token(const std::string& token) {
  if (token_to_id_.count(token)) throw std::invalid_argument("vocab: duplicate token '" + token + "'");
  token_to_id_.emplace(token, static_cast<int>(id_to_token_.size()));
  id_to_token_.push_back(token);
}

Vocabulary Vocabulary::build(const std::vector<std::string>& lines,
                             const std::vector<std::string>& languages) {
  if (lines.empty()) throw std::invalid_argument("vocab: empty corpus");
  Vocabulary v;
  for (const char* t : kReservedTokens) v.add_token(t);
  for (const std::string& lang : languages) {
    v.add_token(specifier_token(lang));
    v.languages_.push_back(lowercase(lang));
  }
  std::size_t words_seen = 0;
  for (const std::string& line : lines) {
    for (const std::string& w : split_words(lowercase(line))) {
      ++words_seen;
      if (!v.token_to_id_.count(w)) v.add_token(w);
    }
  }
  if (words_seen == 0) throw std::invalid_argument("vocab: corpus has no words");
  return v;
}

Vocabulary Vocabulary::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("vocab: cannot open " + path);
  Vocabulary v;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    v.add_token(line);
  }
  if (v.size() < kReserved) throw std::runtime_error("vocab: file " + path + " lacks reserved block");
  for (int i = 0; i < kReserved; ++i) {
    if (v.id_to_token_[i] != kReservedTokens[i]) {
      throw std::runtime_error("vocab: file " + path + " has wrong reserved token at id " + std::to_string(i));
    }
  }
  // Specifiers sit immediately after the reserved block; corpus words are
  // lowercased so they can never match the bracketed uppercase pattern.
  for (int i = kReserved; i < v.size() && looks_like_specifier(v.id_to_token_[i]); ++i) {
    const std::string& tok = v.id_to_token_[i];
    v.languages_.push_back(lowercase(tok.substr(1, tok.size() - 2)));
  }
  return v;
}

void Vocabulary::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("vocab: cannot write " + path);
  for (const std::string& tok : id_to_token_) out << tok << "\n";
  if (!out) throw std::runtime_error("vocab: write failed for " + path);
}

bool Vocabulary::contains(const std::string& token) const { return token_to_id_.count(token) > 0; }

int Vocabulary::id(const std::string& token) const {
  auto it = token_to_id_.find(token);
  if (it == token_to_id_.end()) throw std::invalid_argument("vocab: unknown token '" + token + "'");
  return it->second;
}

const std::string& Vocabulary::token(int id) const {
  if (id < 0 || id >= size()) {
    throw std::invalid_argument("vocab: id " + std::to_string(id) + " out of range [0," +
                                std::to_string(size()) + ")");
  }
  return id_to_token_[id];
}

int Vocabulary::specifier(const std::string& language) const {
  const std::string tok = specifier_token(language);
  auto it = token_to_id_.find(tok);
  if (it == token_to_id_.end()) {
    throw std::invalid_argument("vocab: no specifier for language '" + language + "'");
  }
  return it->second;
}

bool Vocabulary::is_specifier(int id) const {
  return id >= kReserved && id < kReserved + static_cast<int>(languages_.size());
}

std::vector<int> Vocabulary::encode(const std::string& text) const {
  std::vector<int> ids;
  for (const std::string& w : split_words(lowercase(text))) {
    auto it = token_to_id_.find(w);
    ids.push_back(it == token_to_id_.end() ? kUnk : it->second);
  }
  return ids;
}

std::string Vocabulary::decode(const std::vector<int>& ids) const {
  std::string out;
  for (int id : ids) {
    const std::string& tok = token(id);  // validates the id
    if (id == kPad || id == kMask || id == kSep || id == kStop || id == kImg || is_specifier(id)) {
      continue;
    }
    if (!out.empty()) out += ' ';
    out += tok;
  }
  return out;
}

}  // namespace bgen
