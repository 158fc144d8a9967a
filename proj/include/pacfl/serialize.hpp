#pragma once

#include <string>

#include "json.hpp"
#include "pacfl/attacker.hpp"
#include "pacfl/verify.hpp"

namespace pacfl {

using Json = nlohmann::json;

// Config types: to_json writes every field; from_json starts from defaults,
// reads the keys present and rejects unknown keys with a ConfigError.
void to_json(Json& j, const ModelSpec& v);
void from_json(const Json& j, ModelSpec& v);
void to_json(Json& j, const DatasetSpec& v);
void from_json(const Json& j, DatasetSpec& v);
void to_json(Json& j, const AttackConfig& v);
void from_json(const Json& j, AttackConfig& v);
void to_json(Json& j, const MechanismConfig& v);
void from_json(const Json& j, MechanismConfig& v);
void to_json(Json& j, const ConstantsOptions& v);
void from_json(const Json& j, ConstantsOptions& v);
void to_json(Json& j, const AdvSearch& v);
void from_json(const Json& j, AdvSearch& v);
void to_json(Json& j, const Scenario& v);
void from_json(const Json& j, Scenario& v);
void to_json(Json& j, const ConstantsEstimate& v);
void from_json(const Json& j, ConstantsEstimate& v);

// Output records.
void to_json(Json& j, const TrialResult& v);
void to_json(Json& j, const BoundReport& v);
void to_json(Json& j, const Phase2Report& v);

// Per-iteration summary of an attack: one object per iteration t.
Json trace_summary(const AttackTrace& trace);

std::string to_string(LearningRateSchedule s);
LearningRateSchedule schedule_from_string(const std::string& name);

// Parses JSON text, turning syntax and type errors into ConfigError.
Json parse_config_text(const std::string& text);

}  // namespace pacfl
