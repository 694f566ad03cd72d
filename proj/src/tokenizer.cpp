#include "alti/tokenizer.hpp"

#include <algorithm>
#include <cctype>
#include <unordered_set>

namespace alti {
namespace {

constexpr std::string_view kMaskLiteral = "[MASK]";

bool is_space(unsigned char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\v' || c == '\f'; }

bool is_ascii_punct(unsigned char c) {
  return (c >= 33 && c <= 47) || (c >= 58 && c <= 64) || (c >= 91 && c <= 96) ||
         (c >= 123 && c <= 126);
}

/// Byte length of the UTF-8 sequence starting with `lead` (1 for invalid leads).
std::size_t utf8_length(unsigned char lead) {
  if (lead < 0x80) return 1;
  if ((lead >> 5) == 0x6) return 2;
  if ((lead >> 4) == 0xE) return 3;
  if ((lead >> 3) == 0x1E) return 4;
  return 1;
}

std::vector<std::size_t> char_boundaries(std::string_view word) {
  std::vector<std::size_t> bounds;
  std::size_t i = 0;
  while (i < word.size()) {
    bounds.push_back(i);
    i += std::min(utf8_length(static_cast<unsigned char>(word[i])), word.size() - i);
  }
  bounds.push_back(word.size());
  return bounds;
}

}  // namespace

WordPieceTokenizer::WordPieceTokenizer(const Vocab& vocab, const SpecialTokens& special,
                                       bool lowercase, int max_positions)
    : vocab_(vocab), special_(special), lowercase_(lowercase), max_positions_(max_positions) {}

std::vector<std::string> WordPieceTokenizer::basic_split(std::string_view text) const {
  std::vector<std::string> words;
  std::string current;
  auto flush = [&] {
    if (!current.empty()) {
      words.push_back(std::move(current));
      current.clear();
    }
  };
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (is_space(c)) {
      flush();
    } else if (is_ascii_punct(c)) {
      flush();
      words.emplace_back(1, ch);
    } else {
      current.push_back(lowercase_ && c < 0x80 ? static_cast<char>(std::tolower(c)) : ch);
    }
  }
  flush();
  return words;
}

std::vector<std::string> WordPieceTokenizer::wordpiece(std::string_view word) const {
  const std::vector<std::size_t> bounds = char_boundaries(word);
  const std::size_t num_chars = bounds.size() - 1;
  if (num_chars > max_chars_per_word_) {
    return {vocab_.token(special_.unk)};
  }
  std::vector<std::string> pieces;
  std::size_t start = 0;
  while (start < num_chars) {
    std::size_t end = num_chars;
    std::string match;
    while (end > start) {
      std::string candidate(word.substr(bounds[start], bounds[end] - bounds[start]));
      if (start > 0) {
        candidate.insert(0, "##");
      }
      if (vocab_.find(candidate)) {
        match = std::move(candidate);
        break;
      }
      --end;
    }
    if (match.empty()) {
      return {vocab_.token(special_.unk)};
    }
    pieces.push_back(std::move(match));
    start = end;
  }
  return pieces;
}

EncodedInput WordPieceTokenizer::encode(std::string_view text) const {
  EncodedInput out;
  out.token_ids.push_back(special_.cls);
  out.token_strings.push_back(vocab_.token(special_.cls));
  out.special_mask.push_back(true);

  auto append_text = [&](std::string_view chunk) {
    for (const std::string& word : basic_split(chunk)) {
      for (const std::string& piece : wordpiece(word)) {
        const int id = *vocab_.find(piece);
        out.token_ids.push_back(id);
        out.token_strings.push_back(id == special_.unk ? word : piece);
        out.special_mask.push_back(false);
      }
    }
  };

  // [MASK] literals survive tokenization as the mask token.
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t hit = text.find(kMaskLiteral, pos);
    append_text(text.substr(pos, hit == std::string_view::npos ? text.size() - pos : hit - pos));
    if (hit == std::string_view::npos) {
      break;
    }
    out.token_ids.push_back(special_.mask);
    out.token_strings.push_back(vocab_.token(special_.mask));
    out.special_mask.push_back(true);
    pos = hit + kMaskLiteral.size();
  }

  if (out.token_ids.size() == 1) {
    throw TokenizeError("tokenize: input text is empty");
  }
  out.token_ids.push_back(special_.sep);
  out.token_strings.push_back(vocab_.token(special_.sep));
  out.special_mask.push_back(true);
  if (static_cast<int>(out.token_ids.size()) > max_positions_) {
    throw TokenizeError("tokenize: " + std::to_string(out.token_ids.size()) +
                        " tokens exceed max_positions " + std::to_string(max_positions_));
  }
  return out;
}

EncodedInput tokenize(std::string_view text, const ModelBundle& bundle) {
  const WordPieceTokenizer tok(bundle.vocab, bundle.config.special, bundle.config.lowercase,
                               bundle.config.max_positions);
  return tok.encode(text);
}

EncodedInput encode_ids(std::span<const int> ids, const ModelBundle& bundle) {
  const SpecialTokens& sp = bundle.config.special;
  EncodedInput out;
  for (int id : ids) {
    out.token_ids.push_back(id);
    out.token_strings.push_back(bundle.vocab.token(id));
    out.special_mask.push_back(id == sp.cls || id == sp.sep || id == sp.mask);
  }
  return out;
}

EncodedInput mask_token(const EncodedInput& input, std::size_t position,
                        const ModelBundle& bundle) {
  if (position >= input.size()) {
    throw std::out_of_range("mask_token: position " + std::to_string(position) +
                            " outside input of length " + std::to_string(input.size()));
  }
  const SpecialTokens& sp = bundle.config.special;
  const int id = input.token_ids[position];
  if (id == sp.mask) {
    return input;
  }
  if (input.special_mask[position]) {
    throw std::invalid_argument("mask_token: cannot mask special token at position " +
                                std::to_string(position));
  }
  EncodedInput out = input;
  out.token_ids[position] = sp.mask;
  out.token_strings[position] = bundle.vocab.token(sp.mask);
  out.special_mask[position] = true;
  return out;
}

namespace {

EncodedInput filter_positions(const EncodedInput& input, std::span<const std::size_t> positions,
                              bool keep_listed) {
  const std::unordered_set<std::size_t> listed(positions.begin(), positions.end());
  EncodedInput out;
  for (std::size_t i = 0; i < input.size(); ++i) {
    const bool in_list = listed.contains(i);
    if (input.special_mask[i] || in_list == keep_listed) {
      out.token_ids.push_back(input.token_ids[i]);
      out.token_strings.push_back(input.token_strings[i]);
      out.special_mask.push_back(input.special_mask[i]);
    }
  }
  return out;
}

}  // namespace

EncodedInput remove_positions(const EncodedInput& input, std::span<const std::size_t> positions) {
  return filter_positions(input, positions, false);
}

EncodedInput keep_positions(const EncodedInput& input, std::span<const std::size_t> positions) {
  return filter_positions(input, positions, true);
}

std::string detokenize(const EncodedInput& input) {
  std::string out;
  for (std::size_t i = 0; i < input.size(); ++i) {
    if (input.special_mask[i]) {
      continue;
    }
    const std::string& s = input.token_strings[i];
    if (s.starts_with("##")) {
      out += s.substr(2);
    } else {
      if (!out.empty()) out += ' ';
      out += s;
    }
  }
  return out;
}

}  // namespace alti
