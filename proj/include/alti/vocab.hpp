#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace alti {

/// Token string <-> id table. Line index in vocab.txt is the id.
class Vocab {
 public:
  Vocab() = default;
  explicit Vocab(std::vector<std::string> tokens);

  static Vocab load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;

  std::optional<int> find(std::string_view token) const;
  const std::string& token(int id) const;
  int size() const { return static_cast<int>(tokens_.size()); }
  const std::vector<std::string>& tokens() const { return tokens_; }

  bool operator==(const Vocab& other) const { return tokens_ == other.tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> ids_;
};

/// Small built-in vocabulary used by fixture bundles: [PAD] [UNK] [CLS] [SEP] [MASK]
/// at ids 0-4, a few hundred common words, punctuation, and single-letter pieces so
/// that any lowercase ASCII word has a WordPiece segmentation.
const Vocab& fixture_vocab();

/// Plain words of fixture_vocab() (no specials, pieces or punctuation), handy for
/// generating random sentences.
const std::vector<std::string>& fixture_words();

}  // namespace alti
