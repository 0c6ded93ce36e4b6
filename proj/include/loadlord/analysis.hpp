#ifndef LOADLORD_ANALYSIS_HPP
#define LOADLORD_ANALYSIS_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "loadlord/function_map.hpp"
#include "loadlord/gadget.hpp"
#include "loadlord/image.hpp"

namespace loadlord {

// One direct call site; feeds call_returns, the splitting rule, and the
// random-walk trace generator.
struct CallSite {
    uint64_t vaddr = 0;       // address of the call instruction
    uint64_t target = 0;      // callee address
    uint64_t return_addr = 0; // address of the next instruction
};

// Everything the policy engine and the simulator consume, derived from
// one image.
struct Artifacts {
    LoadableImage image;
    FunctionMap map;
    LegalAddressTable legal;
    GadgetIndex index;
    std::vector<CallSite> call_sites; // direct calls with in-image targets
    uint64_t entry = 0;
    int max_gadget_len = kDefaultMaxGadgetLen;
};

struct AnalysisOptions {
    int max_gadget_len = kDefaultMaxGadgetLen;
    std::string listing_text;  // non-empty: use instead of the built-in decoder
    std::string seeds_text;    // non-empty: boundary seeds file content
};

// Full pipeline: decode (or ingest), identify functions, build the legal
// table, scan and classify gadgets, attribute them.
Artifacts analyze_image(LoadableImage image, const AnalysisOptions& opts = {});
Artifacts analyze_file(const std::string& path, const AnalysisOptions& opts = {});

std::vector<CallSite> collect_call_sites(const std::vector<InstructionRecord>& instrs,
                                         const LoadableImage& image);

} // namespace loadlord

#endif
