#include "loadlord/analysis.hpp"

#include "loadlord/decoder.hpp"
#include "loadlord/listing.hpp"

namespace loadlord {

std::vector<CallSite> collect_call_sites(const std::vector<InstructionRecord>& instrs,
                                         const LoadableImage& image) {
    std::vector<CallSite> out;
    for (const auto& insn : instrs) {
        if (insn.op_class != OpClass::call_dir || !insn.has_branch_target) continue;
        const Segment* seg = image.segment_containing(insn.branch_target);
        if (!seg || !seg->perms.execute) continue;
        out.push_back({insn.vaddr, insn.branch_target, insn.end()});
    }
    return out;
}

Artifacts analyze_image(LoadableImage image, const AnalysisOptions& opts) {
    Artifacts a;
    a.image = std::move(image);
    a.entry = a.image.entry;
    a.max_gadget_len = opts.max_gadget_len;

    std::vector<InstructionRecord> instrs = opts.listing_text.empty()
                                                ? decode_stream(a.image)
                                                : ingest_listing(opts.listing_text);
    std::vector<BoundarySeed> seeds;
    if (!opts.seeds_text.empty()) seeds = parse_boundary_seeds(opts.seeds_text);

    a.map = identify_functions(a.image, instrs, seeds);
    a.legal = build_legal_addresses(a.map, instrs);
    a.call_sites = collect_call_sites(instrs, a.image);
    a.index = build_gadget_index(scan_gadgets(a.image, opts.max_gadget_len), a.map);
    return a;
}

Artifacts analyze_file(const std::string& path, const AnalysisOptions& opts) {
    return analyze_image(parse_image_file(path), opts);
}

} // namespace loadlord
