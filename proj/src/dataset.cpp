#include "alti/dataset.hpp"

#include "json.hpp"

#include <fstream>
#include <random>

namespace alti {

using nlohmann::json;

std::vector<Example> load_dataset(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw DatasetError("cannot open dataset '" + path.string() + "'");
  }
  std::vector<Example> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = path.string() + ":" + std::to_string(line_no);
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw DatasetError(where + ": invalid JSON (" + e.what() + ")");
    }
    if (!j.is_object() || !j.contains("text") || !j["text"].is_string()) {
      throw DatasetError(where + ": missing string field 'text'");
    }
    Example ex{j["text"].get<std::string>(), -1};
    if (j.contains("label")) {
      if (!j["label"].is_number_integer()) {
        throw DatasetError(where + ": field 'label' must be an integer");
      }
      ex.label = j["label"].get<int>();
    }
    out.push_back(std::move(ex));
  }
  return out;
}

void save_dataset(const std::vector<Example>& examples, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) {
    throw DatasetError("cannot write dataset '" + path.string() + "'");
  }
  for (const auto& ex : examples) {
    json j{{"text", ex.text}};
    if (ex.label >= 0) j["label"] = ex.label;
    out << j.dump() << '\n';
  }
}

std::vector<Example> random_sentences(std::size_t count, std::uint64_t seed, int min_words, int max_words) {
  if (min_words < 1 || max_words < min_words) {
    throw std::invalid_argument("random_sentences: bad word range");
  }
  const auto& words = fixture_words();
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> len(min_words, max_words);
  std::uniform_int_distribution<std::size_t> pick(0, words.size() - 1);
  std::vector<Example> out;
  out.reserve(count);
  for (std::size_t s = 0; s < count; ++s) {
    std::string text;
    const int n = len(rng);
    for (int w = 0; w < n; ++w) {
      if (w > 0) text += ' ';
      text += words[pick(rng)];
    }
    out.push_back({std::move(text), -1});
  }
  return out;
}

std::vector<ReferenceFixture> load_reference_fixtures(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw DatasetError("cannot open fixtures '" + path.string() + "'");
  }
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw DatasetError(path.string() + ": invalid JSON (" + e.what() + ")");
  }
  if (!j.is_array()) {
    throw DatasetError(path.string() + ": expected a JSON array of fixtures");
  }
  std::vector<ReferenceFixture> out;
  for (std::size_t i = 0; i < j.size(); ++i) {
    const auto& f = j[i];
    try {
      out.push_back({f.at("text").get<std::string>(), f.at("token_ids").get<std::vector<int>>(),
                     f.at("logits").get<std::vector<double>>()});
    } catch (const json::exception& e) {
      throw DatasetError(path.string() + ": fixture " + std::to_string(i) + ": " + e.what());
    }
  }
  return out;
}

void save_reference_fixtures(const std::vector<ReferenceFixture>& fixtures, const std::filesystem::path& path) {
  json arr = json::array();
  for (const auto& f : fixtures) {
    arr.push_back({{"text", f.text}, {"token_ids", f.token_ids}, {"logits", f.logits}});
  }
  std::ofstream out(path);
  if (!out) {
    throw DatasetError("cannot write fixtures '" + path.string() + "'");
  }
  out << arr.dump(2) << '\n';
}

std::vector<ParityResult> check_parity(const ModelBundle& bundle, const std::vector<ReferenceFixture>& fixtures) {
  std::vector<ParityResult> out;
  for (const auto& f : fixtures) {
    ParityResult r{f.text, false, 0.0};
    const EncodedInput enc = tokenize(f.text, bundle);
    r.tokens_match = enc.token_ids == f.token_ids;
    const ForwardTrace trace = forward(bundle, encode_ids(f.token_ids, bundle));
    if (static_cast<std::size_t>(trace.logits.size()) != f.logits.size()) {
      r.max_logit_error = std::numeric_limits<double>::infinity();
    } else {
      for (std::size_t c = 0; c < f.logits.size(); ++c) {
        r.max_logit_error =
            std::max(r.max_logit_error, std::abs(trace.logits(static_cast<Eigen::Index>(c)) - f.logits[c]));
      }
    }
    out.push_back(r);
  }
  return out;
}

}  // namespace alti
