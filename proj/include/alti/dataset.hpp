#pragma once

#include "alti/encoder.hpp"

#include <cstdint>
#include <filesystem>
#include <vector>

namespace alti {

struct Example {
  std::string text;
  int label = -1;  // -1 when the line has no label
};

class DatasetError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// One JSON object per line with "text" (string) and optional "label" (int).
/// Blank lines are skipped; errors carry the line number.
std::vector<Example> load_dataset(const std::filesystem::path& path);
void save_dataset(const std::vector<Example>& examples, const std::filesystem::path& path);

/// Sentences of `min_words`..`max_words` words drawn from fixture_words(), unlabeled.
std::vector<Example> random_sentences(std::size_t count, std::uint64_t seed, int min_words = 4,
                                      int max_words = 14);

/// Reference output recorded by the checkpoint exporter: {text, token_ids, logits}.
struct ReferenceFixture {
  std::string text;
  std::vector<int> token_ids;
  std::vector<double> logits;
};

/// Reads a JSON array of fixtures (an empty array is valid).
std::vector<ReferenceFixture> load_reference_fixtures(const std::filesystem::path& path);
void save_reference_fixtures(const std::vector<ReferenceFixture>& fixtures, const std::filesystem::path& path);

struct ParityResult {
  std::string text;
  bool tokens_match = false;
  double max_logit_error = 0.0;
};

/// Tokenizes and runs each fixture text through the core encoder.
std::vector<ParityResult> check_parity(const ModelBundle& bundle, const std::vector<ReferenceFixture>& fixtures);

}  // namespace alti
