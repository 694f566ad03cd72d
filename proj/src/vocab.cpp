#include "alti/vocab.hpp"

#include <fstream>
#include <stdexcept>
#include <unordered_set>

namespace alti {

Vocab::Vocab(std::vector<std::string> tokens) : tokens_(std::move(tokens)) {
  ids_.reserve(tokens_.size());
  for (std::size_t i = 0; i < tokens_.size(); ++i) {
    // First occurrence wins, as in reference WordPiece vocab loaders.
    ids_.emplace(tokens_[i], static_cast<int>(i));
  }
}

Vocab Vocab::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw std::runtime_error("cannot open vocab file " + path.string());
  }
  std::vector<std::string> tokens;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') {
      line.pop_back();
    }
    tokens.push_back(line);
  }
  return Vocab(std::move(tokens));
}

void Vocab::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw std::runtime_error("cannot write vocab file " + path.string());
  }
  for (const auto& t : tokens_) {
    out << t << '\n';
  }
}

std::optional<int> Vocab::find(std::string_view token) const {
  auto it = ids_.find(std::string(token));
  if (it == ids_.end()) {
    return std::nullopt;
  }
  return it->second;
}

const std::string& Vocab::token(int id) const {
  if (id < 0 || id >= size()) {
    throw std::out_of_range("token id " + std::to_string(id) + " outside vocab of size " +
                            std::to_string(size()));
  }
  return tokens_[static_cast<std::size_t>(id)];
}

const std::vector<std::string>& fixture_words() {
  static const std::vector<std::string> words = {
      "the",     "a",       "an",      "and",     "or",      "but",     "of",
      "to",      "in",      "on",      "at",      "for",     "with",    "from",
      "by",      "it",      "is",      "was",     "are",     "were",    "be",
      "this",    "that",    "these",   "those",   "i",       "you",     "he",
      "she",     "we",      "they",    "my",      "your",    "his",     "her",
      "our",     "their",   "not",     "no",      "very",    "really",  "just",
      "so",      "too",     "quite",   "rather",  "film",    "movie",   "story",
      "plot",    "actor",   "actors",  "scene",   "scenes",  "music",   "ending",
      "food",    "place",   "service", "staff",   "price",   "prices",  "room",
      "book",    "time",    "day",     "night",   "year",    "people",  "thing",
      "things",  "way",     "work",    "world",   "life",    "man",     "woman",
      "good",    "bad",     "great",   "awful",   "nice",    "poor",    "fine",
      "clever",  "dull",    "funny",   "boring",  "sweet",   "dark",    "bright",
      "long",    "short",   "slow",    "fast",    "new",     "old",     "young",
      "big",     "small",   "little",  "whole",   "best",    "worst",   "better",
      "worse",   "blend",   "fact",    "fiction", "players", "draft",   "coaches",
      "now",     "then",    "here",    "there",   "all",     "some",    "every",
      "one",     "two",     "three",   "four",    "least",   "most",    "more",
      "less",    "has",     "have",    "had",     "do",      "does",    "did",
      "make",    "makes",   "made",    "see",     "seen",    "feel",    "felt",
      "think",   "guess",   "plan",    "returning", "okay",  "decent",  "narrow",
      "cleaning", "depressing", "otherwise", "right", "um",   "everything", "needs",
      "if",      "as",      "than",    "about",   "into",    "over",    "after",
      "before",  "again",   "never",   "always",  "often",   "still",   "yet",
      "love",    "hate",    "like",    "enjoy",   "watch",   "read",    "eat",
      "city",    "house",   "car",     "road",    "water",   "light",   "sound",
  };
  return words;
}

const Vocab& fixture_vocab() {
  static const Vocab vocab = [] {
    std::vector<std::string> tokens = {"[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]"};
    for (const auto& w : fixture_words()) {
      tokens.push_back(w);
    }
    for (const char* p : {".", ",", "!", "?", "'", "\"", "-", ":", ";", "(", ")"}) {
      tokens.emplace_back(p);
    }
    for (char c = 'a'; c <= 'z'; ++c) {
      tokens.emplace_back(1, c);
    }
    for (char c = 'a'; c <= 'z'; ++c) {
      tokens.push_back(std::string("##") + c);
    }
    for (const char* piece : {"##ly", "##ing", "##ed", "##er", "##est", "##right"}) {
      tokens.emplace_back(piece);
    }
    tokens.emplace_back("sp");
    std::vector<std::string> unique;
    std::unordered_set<std::string> seen;
    for (auto& t : tokens) {
      if (seen.insert(t).second) {
        unique.push_back(std::move(t));
      }
    }
    return Vocab(std::move(unique));
  }();
  return vocab;
}

}  // namespace alti
