#pragma once

#include <string>
#include <unordered_map>
#include <vector>

namespace bgen {

// Word-level vocabulary. Ids 0..5 are the fixed reserved block, followed by
// one specifier token per declared language ("[EN]", "[DE]", ...), followed
// by corpus word types in first-occurrence order. Immutable once built; safe
// for concurrent reads.
class Vocabulary {
 public:
  static constexpr int kPad = 0;
  static constexpr int kUnk = 1;
  static constexpr int kMask = 2;
  static constexpr int kSep = 3;
  static constexpr int kStop = 4;
  static constexpr int kImg = 5;
  static constexpr int kReserved = 6;

  // Lowercases the corpus, splits on whitespace, and assigns ids to word
  // types in first-occurrence order after the reserved + specifier block.
  static Vocabulary build(const std::vector<std::string>& lines,
                          const std::vector<std::string>& languages);

  // Wire format: one token per line, line number = id.
  static Vocabulary load(const std::string& path);
  void save(const std::string& path) const;

  int size() const { return static_cast<int>(id_to_token_.size()); }
  bool contains(const std::string& token) const;
  int id(const std::string& token) const;  // throws on unknown token
  const std::string& token(int id) const;  // throws on invalid id

  // Specifier token for a language, e.g. "de" -> "[DE]".
  static std::string specifier_token(const std::string& language);
  int specifier(const std::string& language) const;  // throws on undeclared language
  bool is_specifier(int id) const;
  const std::vector<std::string>& languages() const { return languages_; }

  // Lowercase + whitespace split; unknown words map to UNK.
  std::vector<int> encode(const std::string& text) const;
  // Space-join, dropping PAD/MASK/SEP/STOP/IMG and specifiers. UNK renders
  // as its token text. Invalid ids are rejected.
  std::string decode(const std::vector<int>& ids) const;

  static std::string lowercase(std::string text);
  static std::vector<std::string> split_words(const std::string& text);

 private:
  Vocabulary() = default;
  void add_token(const std::string& token);

  std::unordered_map<std::string, int> token_to_id_;
  std::vector<std::string> id_to_token_;
  std::vector<std::string> languages_;
};

}  // namespace bgen
