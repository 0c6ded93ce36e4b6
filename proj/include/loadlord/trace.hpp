#ifndef LOADLORD_TRACE_HPP
#define LOADLORD_TRACE_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "loadlord/analysis.hpp"

namespace loadlord {

// One control-transfer event driven through the policy engine. `probe`
// is an attacker-controlled transfer (the RIPE-style redirect).
struct TraceEvent {
    enum class Kind : uint8_t { call, ret, jump, probe };
    Kind kind = Kind::call;
    uint64_t addr = 0;
    uint32_t seq = 0;
};
const char* trace_kind_name(TraceEvent::Kind k);

// Line format: `call 0x1000` | `ret 0x1046` | `jmp 0x2000` | `probe 0x1033`.
// Blank lines and '#' comments skipped. Throws ParseError.
std::vector<TraceEvent> parse_trace(const std::string& text);
std::string format_trace(const std::vector<TraceEvent>& trace);

// Deterministic random walk over the direct-call graph: descend into a
// callee or return to the pending return address, bounded by `depth`.
// Identical (artifacts, seed, depth, max_events) give identical traces.
std::vector<TraceEvent> random_walk_trace(const Artifacts& artifacts, uint64_t seed,
                                          int depth = 8, size_t max_events = 256);

} // namespace loadlord

#endif
