#pragma once

#include "alti/aggregation.hpp"

#include <string>
#include <vector>

namespace alti {

inline constexpr int kHeatBuckets = 5;

/// Bucket 0..4 per token from its score as a fraction of the sentence maximum:
/// [0, 20%) -> 0, ..., [80%, 100%] -> 4. An all-zero vector maps to bucket 0.
std::vector<int> heat_buckets(const Vector& scores);

/// Tokens with 256-color ANSI backgrounds, separated by spaces, with a reset at the end.
std::string render_ansi(const EncodedInput& input, const AttributionVector& attr);

/// One <span> per token with an inline background-color.
std::string render_html(const EncodedInput& input, const AttributionVector& attr);

std::string html_escape(std::string_view s);

}  // namespace alti
