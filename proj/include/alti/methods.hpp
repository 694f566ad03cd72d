#pragma once

#include "alti/decomposition.hpp"
#include "alti/gradients.hpp"

#include <cstdint>
#include <optional>
#include <vector>

namespace alti {

enum class Method {
  alti,
  alti_l2,
  norms,
  globenc,
  rollout,
  grad_l2,
  gxi_l2,
  gxi_mean,
  ig_l2,
  ig_mean,
  random,  // seeded uniform scores; a floor for faithfulness comparisons
};

/// CLI spelling, e.g. "alti-l2".
const char* method_name(Method m);
Method parse_method(std::string_view s);
std::vector<Method> parse_method_list(std::string_view csv);
const std::vector<Method>& all_methods();

/// True for methods that aggregate per-layer matrices with rollout.
bool is_layerwise(Method m);

struct AttributionOptions {
  Target target = Target::cls;
  /// Norm used by `alti`; `alti-l2` always uses l2.
  Norm alti_norm = Norm::l1;
  /// Extend alti / alti-l2 / norms through LN2. globenc always does.
  bool ln2 = false;
  int ig_steps = 100;
  std::uint64_t seed = 0;
};

/// Per-layer mixing matrices (layer 1 first) for a layer-wise method.
std::vector<Matrix> layer_matrices(const ModelBundle& bundle, const ForwardTrace& trace, Method method,
                                   const AttributionOptions& options);

/// Attribution from an existing trace (layer-wise and random methods only need the trace).
AttributionVector attribute(const ModelBundle& bundle, const ForwardTrace& trace, Method method,
                            const AttributionOptions& options);

AttributionVector attribute(const ModelBundle& bundle, const EncodedInput& input, Method method,
                            const AttributionOptions& options);

}  // namespace alti
