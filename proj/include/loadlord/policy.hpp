#ifndef LOADLORD_POLICY_HPP
#define LOADLORD_POLICY_HPP

#include <cstdint>
#include <deque>
#include <optional>
#include <string>
#include <vector>

#include "loadlord/function_map.hpp"
#include "loadlord/gadget.hpp"

namespace loadlord {

// Exact rational loading limit, e.g. 1/16. Kept as integers so the
// effective limit never suffers float rounding.
struct Fraction {
    uint64_t num = 1;
    uint64_t den = 16;

    bool valid() const { return num > 0 && den > 0 && num <= den; }
    std::string str() const;
};
// Parse "1/16" or "3/4". Throws Error on malformed input.
Fraction parse_fraction(const std::string& text);

enum class ChainPredicate : uint8_t {
    loadmem_only,     // chain-capable iff any LoadMemG resident
    loadmem_and_sysg, // ... and additionally a SYSG or JumpG resident
};

struct PolicyConfig {
    std::optional<Fraction> limit_fraction; // default 1/16 when neither set
    std::optional<uint32_t> limit_absolute; // mutually exclusive with fraction
    bool semantic_unload_enabled = true;
    ChainPredicate chain_predicate = ChainPredicate::loadmem_and_sysg;
    int max_gadget_len = kDefaultMaxGadgetLen;
    bool strict = false; // stop on first violation (simulator/supervisor honor this)

    // max(1, floor(fraction * total_functions)), or the absolute limit.
    uint32_t effective_limit(size_t total_functions) const;
};

enum class LoadReason : uint8_t { new_function, return_reload, cross_jump };
enum class Origin : uint8_t { program, attacker };
const char* load_reason_name(LoadReason r);

struct LoadOutcome {
    enum class Kind : uint8_t { already_resident, loaded, violation };
    Kind kind = Kind::already_resident;
    std::optional<uint32_t> function; // resolved function (absent on violation)
    std::vector<uint32_t> evicted;    // non-empty only when kind == loaded
    LoadReason reason = LoadReason::new_function;
};

struct PolicyEvent {
    enum class Kind : uint8_t { load, unload, violation, residual_risk, noop };
    uint64_t clock = 0;
    Kind kind = Kind::load;
    uint64_t addr = 0;                // request address (0 for unload events)
    std::optional<uint32_t> function;
    std::vector<uint32_t> evicted;    // functions evicted by a load event
    std::array<uint32_t, kGadgetClassCount> class_counters{}; // snapshot after the event
    LoadReason reason = LoadReason::new_function;
    Origin origin = Origin::program;
    enum class UnloadTrigger : uint8_t { none, fifo, semantic } trigger = UnloadTrigger::none;
};

// The resident-set state machine: FIFO loading limit (the upper-limit
// trigger) plus semantics-based unloading (the chain-condition trigger),
// with every load address checked against the legal-address table.
// Single-writer: callers serialize events.
class PolicyEngine {
public:
    // Throws InconsistentArtifacts if index/legal don't match the map.
    PolicyEngine(const FunctionMap& map, const GadgetIndex& index,
                 const LegalAddressTable& legal, const PolicyConfig& cfg);

    // Validate addr against the legal-address table, resolve the owning
    // function, evict per FIFO until there is room, load, then run the
    // semantic unload if the resident set became chain-capable. Throws
    // UnknownAddress if a legal address lies outside every function.
    LoadOutcome request_load(uint64_t addr, LoadReason reason = LoadReason::new_function,
                             Origin origin = Origin::program);

    // Return-address reload: identical to request_load with
    // reason = return_reload.
    LoadOutcome handle_return(uint64_t ret_addr, Origin origin = Origin::program);

    // True when the resident gadget classes satisfy the chain predicate.
    bool chain_capable() const;

    // Evict LoadMemG-heavy chain contributors (ties: oldest) until the
    // chain predicate is false. Calling while not chain-capable is a
    // no-op. Returns evicted ids.
    std::vector<uint32_t> semantic_unload();

    // Remove and return the FIFO head. Throws EmptyResidentSet.
    uint32_t evict_for_room();

    // Recount resident gadgets from scratch out of the index; oracle for
    // the incrementally maintained counters.
    ClassCounts resident_gadget_census() const;

    // Inspection.
    const std::deque<uint32_t>& resident_fifo() const { return resident_; }
    bool is_resident(uint32_t function_id) const;
    const std::array<uint32_t, kGadgetClassCount>& class_counters() const { return counters_; }
    uint32_t resident_gadget_total() const { return resident_total_; }
    uint32_t effective_limit() const { return limit_; }
    uint64_t clock() const { return clock_; }
    const std::vector<PolicyEvent>& event_log() const { return events_; }
    const PolicyConfig& config() const { return cfg_; }

private:
    std::vector<uint32_t> semantic_unload_impl(std::optional<uint32_t> in_flight);
    void add_resident(uint32_t id);
    void remove_counters(uint32_t id);
    bool contributes_to_chain(uint32_t id) const;
    PolicyEvent& push_event(PolicyEvent::Kind kind);

    const FunctionMap& map_;
    const GadgetIndex& index_;
    const LegalAddressTable& legal_;
    PolicyConfig cfg_;
    uint32_t limit_ = 1;

    std::deque<uint32_t> resident_; // FIFO order, head = oldest
    std::vector<uint64_t> load_seq_; // per-function latest load sequence number
    std::vector<uint8_t> resident_flag_;
    std::array<uint32_t, kGadgetClassCount> counters_{};
    uint32_t resident_total_ = 0;
    uint64_t clock_ = 0;
    uint64_t next_load_seq_ = 1;
    std::vector<PolicyEvent> events_;
};

} // namespace loadlord

#endif
