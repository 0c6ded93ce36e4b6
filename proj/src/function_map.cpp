#include "loadlord/function_map.hpp"

#include <algorithm>
#include <map>
#include <sstream>

#include "loadlord/errors.hpp"

namespace loadlord {

namespace {

bool in_executable_segment(const LoadableImage& image, uint64_t vaddr) {
    const Segment* seg = image.segment_containing(vaddr);
    return seg && seg->perms.execute;
}

uint64_t exec_region_end(const LoadableImage& image, uint64_t vaddr) {
    const Segment* seg = image.segment_containing(vaddr);
    return seg ? seg->mem_end() : vaddr;
}

struct Extent {
    uint64_t start;
    uint64_t end;
    Provenance provenance;
    std::string name;
};

// Tile [seed_i, seed_{i+1}) within each segment; explicit sizes cap the
// extent, zero sizes run to the next seed or the segment end.
std::vector<Extent> extents_from_seeds(const LoadableImage& image,
                                       std::vector<Extent> seeds) {
    std::sort(seeds.begin(), seeds.end(),
              [](const Extent& a, const Extent& b) { return a.start < b.start; });
    seeds.erase(std::unique(seeds.begin(), seeds.end(),
                            [](const Extent& a, const Extent& b) { return a.start == b.start; }),
                seeds.end());
    std::vector<Extent> out;
    for (size_t i = 0; i < seeds.size(); ++i) {
        Extent e = seeds[i];
        uint64_t cap = exec_region_end(image, e.start);
        if (i + 1 < seeds.size() && seeds[i + 1].start < cap) cap = seeds[i + 1].start;
        if (e.end == 0 || e.end > cap) e.end = cap;
        if (e.end > e.start) out.push_back(std::move(e));
    }
    return out;
}

} // namespace

const FunctionRecord* owning_function(const FunctionMap& map, uint64_t vaddr) {
    auto it = std::upper_bound(map.records.begin(), map.records.end(), vaddr,
                               [](uint64_t v, const FunctionRecord& r) { return v < r.start; });
    if (it == map.records.begin()) return nullptr;
    --it;
    return it->contains(vaddr) ? &*it : nullptr;
}

std::vector<BoundarySeed> parse_boundary_seeds(const std::string& text) {
    std::vector<BoundarySeed> out;
    std::istringstream lines(text);
    std::string line;
    size_t line_no = 0;
    while (std::getline(lines, line)) {
        ++line_no;
        size_t hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        std::istringstream fields(line);
        std::string start_tok, end_tok, name;
        if (!(fields >> start_tok)) continue; // blank
        if (!(fields >> end_tok)) throw ParseError(line_no, "expected `hex_start hex_end [name]`");
        fields >> name;
        BoundarySeed seed;
        try {
            seed.start = std::stoull(start_tok, nullptr, 16);
            seed.end = std::stoull(end_tok, nullptr, 16);
        } catch (const std::exception&) {
            throw ParseError(line_no, "bad hex address");
        }
        if (seed.end <= seed.start) throw ParseError(line_no, "end not past start");
        seed.name = std::move(name);
        out.push_back(std::move(seed));
    }
    return out;
}

FunctionMap identify_functions(const LoadableImage& image,
                               const std::vector<InstructionRecord>& instrs,
                               const std::vector<BoundarySeed>& seeds) {
    bool any_decoded = std::any_of(instrs.begin(), instrs.end(),
                                   [](const InstructionRecord& i) { return i.decoded; });
    if (!any_decoded) throw EmptyCodeRegion("no decodable instructions");

    std::vector<uint64_t> call_targets;
    for (const auto& insn : instrs)
        if (insn.op_class == OpClass::call_dir && insn.has_branch_target)
            call_targets.push_back(insn.branch_target);
    std::sort(call_targets.begin(), call_targets.end());
    call_targets.erase(std::unique(call_targets.begin(), call_targets.end()),
                       call_targets.end());

    std::vector<Extent> seed_extents;
    if (!seeds.empty()) {
        for (const auto& s : seeds)
            if (in_executable_segment(image, s.start))
                seed_extents.push_back({s.start, s.end, Provenance::symbol_seed, s.name});
    } else if (!image.function_symbols.empty()) {
        for (const auto& sym : image.function_symbols)
            seed_extents.push_back(
                {sym.addr, sym.size ? sym.addr + sym.size : 0, Provenance::symbol_seed, sym.name});
    } else {
        // call-target closure plus prologue pattern, plus the entry point
        std::vector<Extent> heur;
        if (in_executable_segment(image, image.entry))
            heur.push_back({image.entry, 0, Provenance::heuristic_seed, ""});
        for (uint64_t t : call_targets)
            if (in_executable_segment(image, t))
                heur.push_back({t, 0, Provenance::heuristic_seed, ""});
        // push rbp; mov rbp, rsp
        for (size_t i = 0; i + 1 < instrs.size(); ++i) {
            const auto& a = instrs[i];
            const auto& b = instrs[i + 1];
            if (a.op_class == OpClass::push && a.src.is_reg() && a.src.reg == kRegRbp &&
                b.vaddr == a.end() && b.op_class == OpClass::move_reg &&
                b.dst.is_reg() && b.dst.reg == kRegRbp && b.src.is_reg() &&
                b.src.reg == kRegRsp)
                heur.push_back({a.vaddr, 0, Provenance::heuristic_seed, ""});
        }
        seed_extents = std::move(heur);
    }

    FunctionMap map;
    for (auto& e : extents_from_seeds(image, std::move(seed_extents))) {
        FunctionRecord rec;
        rec.start = e.start;
        rec.end = e.end;
        rec.provenance = e.provenance;
        rec.name = std::move(e.name);
        map.records.push_back(std::move(rec));
    }

    // Call-target splitting to fixpoint: a direct call into the middle of
    // a record splits it at the target.
    bool changed = true;
    while (changed) {
        changed = false;
        for (uint64_t target : call_targets) {
            if (!in_executable_segment(image, target)) continue; // data target: no split
            const FunctionRecord* owner = owning_function(map, target);
            if (!owner || owner->start == target) continue;
            size_t idx = static_cast<size_t>(owner - map.records.data());
            FunctionRecord tail;
            tail.start = target;
            tail.end = map.records[idx].end;
            tail.provenance = Provenance::call_split;
            map.records[idx].end = target;
            map.records.insert(map.records.begin() + idx + 1, std::move(tail));
            changed = true;
        }
    }

    std::sort(map.records.begin(), map.records.end(),
              [](const FunctionRecord& a, const FunctionRecord& b) { return a.start < b.start; });
    for (size_t i = 0; i < map.records.size(); ++i)
        map.records[i].id = static_cast<uint32_t>(i);
    return map;
}

LegalAddressTable build_legal_addresses(const FunctionMap& map,
                                        const std::vector<InstructionRecord>& instrs) {
    LegalAddressTable table;
    for (const auto& rec : map.records) table.function_starts.insert(rec.start);
    for (const auto& insn : instrs) {
        if (insn.is_call()) table.call_returns.insert(insn.end());
        if (insn.op_class == OpClass::jmp_dir && insn.has_branch_target) {
            const FunctionRecord* from = owning_function(map, insn.vaddr);
            const FunctionRecord* to = owning_function(map, insn.branch_target);
            if (from && to && from->id != to->id)
                table.cross_jump_targets.insert(insn.branch_target);
        }
    }
    return table;
}

} // namespace loadlord
