#ifndef LOADLORD_REPORT_HPP
#define LOADLORD_REPORT_HPP

#include <string>

#include "loadlord/analysis.hpp"
#include "loadlord/simulator.hpp"

#include "json.hpp"

namespace loadlord {

// All reports use insertion-ordered JSON with hex-string addresses so
// identical inputs serialize byte-identically.
using Json = nlohmann::ordered_json;
inline constexpr int kSchemaVersion = 1;

std::string hex_addr(uint64_t addr);
uint64_t parse_hex_addr(const std::string& s); // throws Error

Json artifacts_to_json(const Artifacts& artifacts);
// Rebuild artifacts from an analyze bundle. The image carries segment
// metadata only (no bytes); everything the simulator needs is present.
Artifacts artifacts_from_json(const Json& j);

Json sim_report_to_json(const SimReport& report);
Json sweep_to_json(const SweepResult& sweep);
Json attack_report_to_json(const AttackReport& report);
Json policy_event_to_json(const PolicyEvent& ev); // one JSON-lines record

// Table-style per-class totals summary printed by `analyze`.
std::string totals_summary(const Artifacts& artifacts);

} // namespace loadlord

#endif
