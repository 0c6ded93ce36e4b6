#include "loadlord/trace.hpp"

#include <random>
#include <sstream>

#include "loadlord/errors.hpp"

namespace loadlord {

const char* trace_kind_name(TraceEvent::Kind k) {
    switch (k) {
    case TraceEvent::Kind::call: return "call";
    case TraceEvent::Kind::ret: return "ret";
    case TraceEvent::Kind::jump: return "jmp";
    case TraceEvent::Kind::probe: return "probe";
    }
    return "?";
}

std::vector<TraceEvent> parse_trace(const std::string& text) {
    std::vector<TraceEvent> out;
    std::istringstream lines(text);
    std::string line;
    size_t line_no = 0;
    while (std::getline(lines, line)) {
        ++line_no;
        size_t hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        std::istringstream fields(line);
        std::string kind_tok, addr_tok;
        if (!(fields >> kind_tok)) continue;
        if (!(fields >> addr_tok)) throw ParseError(line_no, "missing address");

        TraceEvent ev;
        if (kind_tok == "call") ev.kind = TraceEvent::Kind::call;
        else if (kind_tok == "ret") ev.kind = TraceEvent::Kind::ret;
        else if (kind_tok == "jmp" || kind_tok == "jump") ev.kind = TraceEvent::Kind::jump;
        else if (kind_tok == "probe") ev.kind = TraceEvent::Kind::probe;
        else throw ParseError(line_no, "unknown event kind: " + kind_tok);

        try {
            ev.addr = std::stoull(addr_tok, nullptr, 0); // 0x... or decimal
        } catch (const std::exception&) {
            throw ParseError(line_no, "bad address: " + addr_tok);
        }
        ev.seq = static_cast<uint32_t>(out.size());
        out.push_back(ev);
    }
    return out;
}

std::string format_trace(const std::vector<TraceEvent>& trace) {
    std::ostringstream out;
    for (const auto& ev : trace) {
        out << trace_kind_name(ev.kind) << " 0x" << std::hex << ev.addr << std::dec << "\n";
    }
    return out.str();
}

std::vector<TraceEvent> random_walk_trace(const Artifacts& artifacts, uint64_t seed,
                                          int depth, size_t max_events) {
    // call sites grouped per function, sorted so the walk is reproducible
    std::vector<std::vector<const CallSite*>> sites_by_function(artifacts.map.size());
    for (const auto& site : artifacts.call_sites) {
        const FunctionRecord* from = owning_function(artifacts.map, site.vaddr);
        const FunctionRecord* to = owning_function(artifacts.map, site.target);
        if (from && to) sites_by_function[from->id].push_back(&site);
    }

    std::vector<TraceEvent> out;
    auto emit = [&](TraceEvent::Kind kind, uint64_t addr) {
        TraceEvent ev;
        ev.kind = kind;
        ev.addr = addr;
        ev.seq = static_cast<uint32_t>(out.size());
        out.push_back(ev);
    };

    const FunctionRecord* entry_fn = owning_function(artifacts.map, artifacts.entry);
    if (!entry_fn || max_events == 0) return out;

    std::mt19937_64 rng(seed);
    struct Frame {
        uint32_t caller;
        uint64_t return_addr;
    };
    std::vector<Frame> stack;
    uint32_t current = entry_fn->id;
    emit(TraceEvent::Kind::call, entry_fn->start);

    while (out.size() < max_events) {
        const auto& sites = sites_by_function[current];
        bool can_descend = !sites.empty() && static_cast<int>(stack.size()) < depth;
        bool can_return = !stack.empty();
        if (!can_descend && !can_return) break;

        bool descend = can_descend && (!can_return || rng() % 5 < 3);
        if (descend) {
            const CallSite* site = sites[rng() % sites.size()];
            stack.push_back({current, site->return_addr});
            emit(TraceEvent::Kind::call, site->target);
            current = owning_function(artifacts.map, site->target)->id;
        } else {
            Frame frame = stack.back();
            stack.pop_back();
            emit(TraceEvent::Kind::ret, frame.return_addr);
            current = frame.caller;
        }
    }
    return out;
}

} // namespace loadlord
