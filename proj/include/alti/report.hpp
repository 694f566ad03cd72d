#pragma once

#include "alti/ablation.hpp"
#include "alti/harness.hpp"

#include "json.hpp"

namespace alti {

inline constexpr int kSchemaVersion = 1;

nlohmann::json to_json(const EncodedInput& input, const AttributionVector& attr);
nlohmann::json to_json(const FaithfulnessReport& report);
nlohmann::json to_json(const SentenceFaithfulness& s);
nlohmann::json to_json(const std::vector<LayerAnisotropy>& profile);
nlohmann::json to_json(const AblationReport& report);
nlohmann::json to_json(const PairAgreement& agreement);

/// Top-level report: {"schema_version": 1, "command": ..., <body fields>}.
nlohmann::json make_report(const std::string& command, nlohmann::json body);

}  // namespace alti
