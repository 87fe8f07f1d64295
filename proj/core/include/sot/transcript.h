#pragma once

#include <filesystem>
#include <string>

#include <nlohmann/json.hpp>

#include "sot/expansion.h"
#include "sot/latency_model.h"
#include "sot/router.h"

namespace sot {

using ordered_json = nlohmann::ordered_json;

// Stable-key-order JSON for every record a run writes to disk. Durations are
// stored as seconds and restored to the nanosecond.
ordered_json to_json(const RequestPayload& payload);
ordered_json to_json(const CallRecord& call);
ordered_json to_json(const Skeleton& skeleton);
ordered_json to_json(const SotAnswer& answer);
ordered_json to_json(const NormalAnswer& answer);
ordered_json to_json(const RouterDecision& decision);
ordered_json to_json(const SotLatencyEstimate& estimate);

RequestPayload payload_from_json(const ordered_json& j);
CallRecord call_from_json(const ordered_json& j);
Skeleton skeleton_from_json(const ordered_json& j);
SotAnswer sot_answer_from_json(const ordered_json& j);
NormalAnswer normal_answer_from_json(const ordered_json& j);
RouterDecision decision_from_json(const ordered_json& j);
SotLatencyEstimate estimate_from_json(const ordered_json& j);

// Writes `doc` as indented JSON with a trailing newline.
void write_json_file(const std::filesystem::path& path, const ordered_json& doc);
ordered_json read_json_file(const std::filesystem::path& path);

}  // namespace sot
