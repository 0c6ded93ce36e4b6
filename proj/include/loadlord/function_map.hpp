#ifndef LOADLORD_FUNCTION_MAP_HPP
#define LOADLORD_FUNCTION_MAP_HPP

#include <cstdint>
#include <set>
#include <string>
#include <vector>

#include "loadlord/image.hpp"
#include "loadlord/insn.hpp"

namespace loadlord {

enum class Provenance : uint8_t { symbol_seed, heuristic_seed, call_split };

struct FunctionRecord {
    uint32_t id = 0;
    uint64_t start = 0;
    uint64_t end = 0; // exclusive
    Provenance provenance = Provenance::heuristic_seed;
    std::string name; // empty unless seeded from symbols or a boundary file

    bool contains(uint64_t vaddr) const { return vaddr >= start && vaddr < end; }
    uint64_t size() const { return end - start; }
};

// Non-overlapping function extents sorted by start; ids are dense indexes
// into `records`.
struct FunctionMap {
    std::vector<FunctionRecord> records;

    size_t size() const { return records.size(); }
    const FunctionRecord& by_id(uint32_t id) const { return records[id]; }
};

// The unique record with start <= vaddr < end, or nullptr.
const FunctionRecord* owning_function(const FunctionMap& map, uint64_t vaddr);

// Externally supplied boundary seed (one `hex_start hex_end [name]` per
// line; '#' comments allowed). Throws ParseError.
struct BoundarySeed {
    uint64_t start = 0;
    uint64_t end = 0;
    std::string name;
};
std::vector<BoundarySeed> parse_boundary_seeds(const std::string& text);

// Identify function extents. Seed tier: explicit `seeds` if non-empty,
// else the image's function symbols, else call-target closure plus
// prologue heuristics. Then the call-target splitting rule runs to
// fixpoint: any direct call whose target lands strictly inside a record
// splits it at the target. Throws EmptyCodeRegion if `instrs` holds no
// decodable instruction.
FunctionMap identify_functions(const LoadableImage& image,
                               const std::vector<InstructionRecord>& instrs,
                               const std::vector<BoundarySeed>& seeds = {});

// The three legal load-address classes.
struct LegalAddressTable {
    std::set<uint64_t> function_starts;
    std::set<uint64_t> call_returns;
    std::set<uint64_t> cross_jump_targets;

    bool is_legal(uint64_t addr) const {
        return function_starts.count(addr) || call_returns.count(addr) ||
               cross_jump_targets.count(addr);
    }
};

// function_starts = every record start; call_returns = the address after
// every call instruction; cross_jump_targets = direct jmp/jcc targets
// owned by a different function than the jump itself.
LegalAddressTable build_legal_addresses(const FunctionMap& map,
                                        const std::vector<InstructionRecord>& instrs);

} // namespace loadlord

#endif
