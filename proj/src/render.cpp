#include "alti/render.hpp"

#include <algorithm>
#include <array>
#include <cmath>

namespace alti {
namespace {

constexpr std::array<int, kHeatBuckets> kAnsiBackground = {231, 224, 217, 210, 203};
constexpr std::array<const char*, kHeatBuckets> kHtmlBackground = {"#ffffff", "#fde0dd", "#fcbba1",
                                                                   "#fc9272", "#ef3b2c"};

void check_aligned(const EncodedInput& input, const AttributionVector& attr) {
  if (static_cast<std::size_t>(attr.scores.size()) != input.size()) {
    throw ShapeError("render: " + std::to_string(attr.scores.size()) + " scores for " +
                     std::to_string(input.size()) + " tokens");
  }
}

}  // namespace

std::vector<int> heat_buckets(const Vector& scores) {
  std::vector<int> out(static_cast<std::size_t>(scores.size()), 0);
  if (scores.size() == 0) return out;
  const double top = scores.maxCoeff();
  if (!(top > 0.0)) return out;
  for (Eigen::Index i = 0; i < scores.size(); ++i) {
    const double frac = std::max(0.0, scores(i)) / top;
    out[static_cast<std::size_t>(i)] = std::min(kHeatBuckets - 1, static_cast<int>(std::floor(frac * kHeatBuckets)));
  }
  return out;
}

std::string render_ansi(const EncodedInput& input, const AttributionVector& attr) {
  check_aligned(input, attr);
  const auto buckets = heat_buckets(attr.scores);
  std::string out;
  for (std::size_t i = 0; i < input.size(); ++i) {
    if (i > 0) out += ' ';
    out += "\x1b[30;48;5;" + std::to_string(kAnsiBackground[static_cast<std::size_t>(buckets[i])]) + "m";
    out += input.token_strings[i];
    out += "\x1b[0m";
  }
  return out;
}

std::string html_escape(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (const char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      case '\'': out += "&#39;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string render_html(const EncodedInput& input, const AttributionVector& attr) {
  check_aligned(input, attr);
  const auto buckets = heat_buckets(attr.scores);
  std::string out = "<div class=\"saliency\" data-method=\"" + html_escape(attr.method) + "\">";
  for (std::size_t i = 0; i < input.size(); ++i) {
    out += "<span style=\"background-color:";
    out += kHtmlBackground[static_cast<std::size_t>(buckets[i])];
    out += "\" data-bucket=\"" + std::to_string(buckets[i]) + "\">";
    out += html_escape(input.token_strings[i]);
    out += "</span> ";
  }
  out += "</div>";
  return out;
}

}  // namespace alti
