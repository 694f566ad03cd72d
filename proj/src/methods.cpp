#include "alti/methods.hpp"

#include <cctype>

#include <random>

namespace alti {
namespace {

struct MethodEntry {
  Method method;
  const char* name;
};

constexpr MethodEntry kMethods[] = {
    {Method::alti, "alti"},       {Method::alti_l2, "alti-l2"}, {Method::norms, "norms"},
    {Method::globenc, "globenc"}, {Method::rollout, "rollout"}, {Method::grad_l2, "grad-l2"},
    {Method::gxi_l2, "gxi-l2"},   {Method::gxi_mean, "gxi-mean"}, {Method::ig_l2, "ig-l2"},
    {Method::ig_mean, "ig-mean"}, {Method::random, "random"},
};

std::string method_label(Method m, const AttributionOptions& o) {
  std::string name = method_name(m);
  if (m == Method::alti && o.alti_norm == Norm::l2) {
    name = "alti-l2";
  }
  if (o.ln2 && (m == Method::alti || m == Method::alti_l2 || m == Method::norms)) {
    name += "+ln2";
  }
  return name;
}

}  // namespace

const char* method_name(Method m) {
  for (const auto& e : kMethods) {
    if (e.method == m) return e.name;
  }
  return "unknown";
}

Method parse_method(std::string_view s) {
  for (const auto& e : kMethods) {
    if (s == e.name) return e.method;
  }
  throw std::invalid_argument("unknown method '" + std::string(s) + "'");
}

std::vector<Method> parse_method_list(std::string_view csv) {
  std::vector<Method> out;
  std::size_t start = 0;
  while (start <= csv.size()) {
    const std::size_t comma = csv.find(',', start);
    std::string_view item = csv.substr(start, comma == std::string_view::npos ? csv.size() - start : comma - start);
    while (!item.empty() && std::isspace(static_cast<unsigned char>(item.front()))) item.remove_prefix(1);
    while (!item.empty() && std::isspace(static_cast<unsigned char>(item.back()))) item.remove_suffix(1);
    if (!item.empty()) {
      out.push_back(parse_method(item));
    }
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  if (out.empty()) {
    throw std::invalid_argument("empty method list");
  }
  return out;
}

const std::vector<Method>& all_methods() {
  static const std::vector<Method> methods = [] {
    std::vector<Method> v;
    for (const auto& e : kMethods) v.push_back(e.method);
    return v;
  }();
  return methods;
}

bool is_layerwise(Method m) {
  return m == Method::alti || m == Method::alti_l2 || m == Method::norms || m == Method::globenc ||
         m == Method::rollout;
}

std::vector<Matrix> layer_matrices(const ModelBundle& bundle, const ForwardTrace& trace, Method method,
                                   const AttributionOptions& options) {
  if (!is_layerwise(method)) {
    throw std::invalid_argument(std::string("layer_matrices: ") + method_name(method) +
                                " is not a layer-wise method");
  }
  std::vector<Matrix> mats;
  mats.reserve(trace.layers.size());
  for (std::size_t l = 0; l < trace.layers.size(); ++l) {
    const LayerTrace& layer = trace.layers[l];
    if (method == Method::rollout) {
      mats.push_back(augment_residual(average_heads(layer.attention)));
      continue;
    }
    const LayerWeights& w = bundle.layers[l];
    const bool with_ln2 = method == Method::globenc || options.ln2;
    TransformedSet ts = transformed_vectors(layer, w);
    if (with_ln2) {
      ts = extend_ln2(ts, layer, w);
    }
    const Matrix& y = with_ln2 ? layer.layer_out : layer.attn_block_out;
    switch (method) {
      case Method::alti:
        mats.push_back(contributions_alti(ts, y, options.alti_norm).C);
        break;
      case Method::alti_l2:
        mats.push_back(contributions_alti(ts, y, Norm::l2).C);
        break;
      default:
        mats.push_back(contributions_norms(ts).C);
        break;
    }
  }
  return mats;
}

AttributionVector attribute(const ModelBundle& bundle, const ForwardTrace& trace, Method method,
                            const AttributionOptions& options) {
  if (is_layerwise(method)) {
    const std::vector<Matrix> mats = layer_matrices(bundle, trace, method, options);
    return attribution_from_relevance(rollout(mats, static_cast<int>(mats.size())), trace,
                                      method_label(method, options));
  }
  const EncodedInput& input = trace.encoded;
  switch (method) {
    case Method::grad_l2:
      return grad_l2(bundle, input, options.target);
    case Method::gxi_l2:
      return grad_x_input(bundle, input, Aggregation::l2, options.target);
    case Method::gxi_mean:
      return grad_x_input(bundle, input, Aggregation::mean_abs, options.target);
    case Method::ig_l2:
      return integrated_gradients(bundle, input, {options.ig_steps, Aggregation::l2}, options.target);
    case Method::ig_mean:
      return integrated_gradients(bundle, input, {options.ig_steps, Aggregation::mean_abs},
                                  options.target);
    case Method::random: {
      std::mt19937_64 rng(options.seed);
      std::uniform_real_distribution<double> unif(0.0, 1.0);
      Vector raw(static_cast<Eigen::Index>(input.size()));
      for (Eigen::Index i = 0; i < raw.size(); ++i) raw(i) = unif(rng);
      return normalize_attribution(raw, "random", trace.predicted_class);
    }
    default:
      break;
  }
  throw std::invalid_argument("attribute: unsupported method");
}

AttributionVector attribute(const ModelBundle& bundle, const EncodedInput& input, Method method,
                            const AttributionOptions& options) {
  return attribute(bundle, forward(bundle, input, options.target), method, options);
}

}  // namespace alti
