#pragma once

#include <set>
#include <string>
#include <unordered_map>
#include <vector>

namespace mmda {

// Token <-> id map. Output vocabs reserve <sos>/<eos>/<unk>/<sp> at fixed
// slots; symbolic input vocabs reserve only <unk>. Token order is the id
// order, so serializing the token list reproduces the map exactly.
class Vocab {
 public:
  static constexpr const char* kSos = "<sos>";
  static constexpr const char* kEos = "<eos>";
  static constexpr const char* kUnk = "<unk>";
  static constexpr const char* kBoundary = "<sp>";

  Vocab() = default;

  // Tokens in id order; specials located by token string if present.
  explicit Vocab(std::vector<std::string> tokens);

  // <sos>, <eos>, <unk>, <sp>, then the given tokens sorted.
  static Vocab output_vocab(const std::set<std::string>& tokens);

  // <unk>, then the given tokens sorted.
  static Vocab symbolic_vocab(const std::set<std::string>& tokens);

  int id(const std::string& token) const;         // throws on unknown token
  int id_or_unk(const std::string& token) const;  // falls back to <unk>
  const std::string& token(int id) const;
  bool contains(const std::string& token) const;
  int size() const { return static_cast<int>(tokens_.size()); }
  const std::vector<std::string>& tokens() const { return tokens_; }

  int sos() const { return sos_; }
  int eos() const { return eos_; }
  int unk() const { return unk_; }
  int boundary() const { return boundary_; }

  bool operator==(const Vocab& other) const { return tokens_ == other.tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> index_;
  int sos_ = -1, eos_ = -1, unk_ = -1, boundary_ = -1;
};

}  // namespace mmda
