#ifndef LOADLORD_SIMULATOR_HPP
#define LOADLORD_SIMULATOR_HPP

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "loadlord/analysis.hpp"
#include "loadlord/policy.hpp"
#include "loadlord/trace.hpp"

namespace loadlord {

// 100 * (1 - survive/total), rounded to 2 decimals. Throws ZeroTotal when
// total == 0 and Error when survive > total.
double measure_reduction(uint64_t total, uint64_t survive);

struct SimViolation {
    uint32_t seq = 0;
    uint64_t addr = 0;
    Origin origin = Origin::program;
};

struct SimReport {
    uint64_t total_gadgets = 0;
    uint64_t survive_gadgets = 0; // max resident total observed
    uint64_t survive_final = 0;
    double survive_mean = 0.0;
    double reduce_percent = 0.0; // from survive_gadgets (the max)
    uint32_t resident_loadmem_max = 0;
    uint64_t loads = 0;
    uint64_t unloads = 0;
    std::vector<SimViolation> violations;
    std::vector<SimViolation> known_escapes; // attacker probes that were legal
    bool halted_on_violation = false;        // strict mode stop
    uint64_t events_processed = 0;
    std::vector<PolicyEvent> timeline;
    std::string limit_str; // config echo for reports
};

// Replay a trace through a fresh policy engine. Deterministic: identical
// inputs give identical reports.
SimReport replay(const std::vector<TraceEvent>& trace, const Artifacts& artifacts,
                 const PolicyConfig& cfg);

struct SweepResult {
    std::vector<std::pair<Fraction, SimReport>> reports; // in input order
    bool survive_monotone = true; // survive max non-decreasing in effective limit
};
SweepResult sweep_limits(const std::vector<TraceEvent>& trace, const Artifacts& artifacts,
                         const PolicyConfig& base_cfg, const std::vector<Fraction>& fractions);

// RIPE-style probe scenarios generated from the artifacts themselves.
struct AttackScenario {
    enum class Family : uint8_t {
        mid_function_gadget, // (a) gadget start inside a function, not legal
        forged_return,       // (b) mid-function address that is no call return
        function_entry,      // (c) return-to-libc analogue: a function start
    };
    Family family;
    uint64_t probe_addr = 0;
    std::vector<TraceEvent> trace;
    bool expect_violation = false; // family (c) expects a tolerated known-escape
};
const char* attack_family_name(AttackScenario::Family f);

// Throws Error if the gadget index is empty.
std::vector<AttackScenario> generate_attack_suite(const Artifacts& artifacts);

struct AttackOutcome {
    AttackScenario scenario;
    bool violated = false;
    bool known_escape = false;
    bool as_expected = false;
};
struct AttackReport {
    std::vector<AttackOutcome> outcomes;
    size_t family_counts[3] = {0, 0, 0};
    size_t family_violations[3] = {0, 0, 0};
    bool all_as_expected = true;
};
AttackReport run_attack_suite(const Artifacts& artifacts, const PolicyConfig& cfg);

} // namespace loadlord

#endif
