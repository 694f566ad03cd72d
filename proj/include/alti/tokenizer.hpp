#pragma once

#include "alti/model.hpp"

#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace alti {

/// A tokenized sentence: [CLS] pieces... [SEP].
struct EncodedInput {
  std::vector<int> token_ids;
  /// Display strings; "##" continuations keep their prefix, [UNK] shows the source word.
  std::vector<std::string> token_strings;
  /// True for CLS, SEP and MASK positions.
  std::vector<bool> special_mask;

  std::size_t size() const { return token_ids.size(); }
  bool operator==(const EncodedInput&) const = default;
};

class TokenizeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// BERT-style basic tokenization (optional ASCII lowercasing, whitespace and
/// punctuation splitting) followed by greedy longest-match WordPiece.
class WordPieceTokenizer {
 public:
  WordPieceTokenizer(const Vocab& vocab, const SpecialTokens& special, bool lowercase,
                     int max_positions);

  /// Throws TokenizeError for empty text or when the result exceeds max_positions.
  EncodedInput encode(std::string_view text) const;

  /// Word-level split before WordPiece; exposed for tests.
  std::vector<std::string> basic_split(std::string_view text) const;

  /// WordPiece pieces of one word, or {unk token} when no segmentation exists.
  std::vector<std::string> wordpiece(std::string_view word) const;

 private:
  const Vocab& vocab_;
  SpecialTokens special_;
  bool lowercase_;
  int max_positions_;
  std::size_t max_chars_per_word_ = 100;
};

EncodedInput tokenize(std::string_view text, const ModelBundle& bundle);

/// Builds an EncodedInput from raw ids; display strings come from the vocab.
EncodedInput encode_ids(std::span<const int> ids, const ModelBundle& bundle);

/// Replaces a non-special position with [MASK]. Throws for CLS/SEP or out-of-range.
EncodedInput mask_token(const EncodedInput& input, std::size_t position, const ModelBundle& bundle);

/// Deletes the given positions; special positions are always kept.
EncodedInput remove_positions(const EncodedInput& input, std::span<const std::size_t> positions);

/// Keeps the given positions plus every special position.
EncodedInput keep_positions(const EncodedInput& input, std::span<const std::size_t> positions);

/// Non-special display strings joined by spaces, with "##" pieces glued to the previous word.
std::string detokenize(const EncodedInput& input);

}  // namespace alti
