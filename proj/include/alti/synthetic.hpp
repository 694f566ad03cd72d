#pragma once

#include "alti/dataset.hpp"

namespace alti {

/// Hand-built 2-layer classifier whose prediction depends only on the sentiment
/// keyword ("good" -> class 1, "bad" -> class 0).
///
/// Layer 1 has two heads. Head 0 attends almost entirely to the distractor token
/// "." but has a zero value projection. Head 1 attends mostly to the keyword and
/// copies its sentiment direction. Layer 2 and every FFN are zero, so they pass
/// the hidden states through unchanged.
ModelBundle planted_keyword_bundle(std::uint64_t seed = 0);

/// `count` labeled sentences: 6-16 random filler words, one keyword and one ".",
/// in shuffled order.
std::vector<Example> planted_keyword_dataset(std::size_t count, std::uint64_t seed = 0);

const std::vector<std::string>& planted_keywords();
inline constexpr const char* kPlantedDistractor = ".";

/// Position of the first keyword piece, if any.
std::optional<std::size_t> keyword_position(const EncodedInput& input);

}  // namespace alti
