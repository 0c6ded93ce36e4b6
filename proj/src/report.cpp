#include "loadlord/report.hpp"

#include <cinttypes>
#include <cstdio>
#include <sstream>

#include "loadlord/errors.hpp"

namespace loadlord {

namespace {

const char* provenance_name(Provenance p) {
    switch (p) {
    case Provenance::symbol_seed: return "symbol-seed";
    case Provenance::heuristic_seed: return "heuristic-seed";
    case Provenance::call_split: return "call-split";
    }
    return "?";
}

Provenance provenance_from(const std::string& s) {
    if (s == "symbol-seed") return Provenance::symbol_seed;
    if (s == "call-split") return Provenance::call_split;
    return Provenance::heuristic_seed;
}

TerminatorKind terminator_from(const std::string& s) {
    if (s == "jmp_ind") return TerminatorKind::jmp_ind;
    if (s == "call_ind") return TerminatorKind::call_ind;
    if (s == "syscall") return TerminatorKind::syscall_term;
    return TerminatorKind::ret;
}

Json addr_set_to_json(const std::set<uint64_t>& addrs) {
    Json arr = Json::array();
    for (uint64_t a : addrs) arr.push_back(hex_addr(a));
    return arr;
}

std::set<uint64_t> addr_set_from_json(const Json& arr) {
    std::set<uint64_t> out;
    for (const auto& v : arr) out.insert(parse_hex_addr(v.get<std::string>()));
    return out;
}

Json counts_to_json(const ClassCounts& counts) {
    Json j;
    for (size_t i = 0; i < kGadgetClassCount; ++i)
        j[gadget_class_name(static_cast<GadgetClass>(i))] = counts.per_class[i];
    j["total"] = counts.total;
    return j;
}

Json classes_to_json(const GadgetClassSet& classes) {
    Json arr = Json::array();
    for (size_t i = 0; i < kGadgetClassCount; ++i)
        if (classes.bits & (1u << i)) arr.push_back(gadget_class_name(static_cast<GadgetClass>(i)));
    return arr;
}

GadgetClassSet classes_from_json(const Json& arr) {
    GadgetClassSet out;
    for (const auto& name : arr) {
        std::string s = name.get<std::string>();
        for (size_t i = 0; i < kGadgetClassCount; ++i)
            if (s == gadget_class_name(static_cast<GadgetClass>(i)))
                out.add(static_cast<GadgetClass>(i));
    }
    return out;
}

Json gadget_to_json(const Gadget& g) {
    Json j;
    j["start"] = hex_addr(g.start);
    j["terminator"] = terminator_name(g.terminator);
    j["classes"] = classes_to_json(g.classes);
    j["insns"] = g.instrs.size();
    return j;
}

Gadget gadget_from_json(const Json& j, std::optional<uint32_t> owner) {
    Gadget g;
    g.start = parse_hex_addr(j.at("start").get<std::string>());
    g.terminator = terminator_from(j.at("terminator").get<std::string>());
    g.classes = classes_from_json(j.at("classes"));
    g.owner = owner;
    // instruction bodies are not round-tripped; record the count only
    g.instrs.resize(j.at("insns").get<size_t>());
    return g;
}

Json violations_to_json(const std::vector<SimViolation>& vs) {
    Json arr = Json::array();
    for (const auto& v : vs) {
        Json j;
        j["seq"] = v.seq;
        j["addr"] = hex_addr(v.addr);
        j["origin"] = v.origin == Origin::attacker ? "attacker" : "program";
        arr.push_back(std::move(j));
    }
    return arr;
}

} // namespace

std::string hex_addr(uint64_t addr) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "0x%" PRIx64, addr);
    return buf;
}

uint64_t parse_hex_addr(const std::string& s) {
    try {
        return std::stoull(s, nullptr, 16);
    } catch (const std::exception&) {
        throw Error("bad address: " + s);
    }
}

Json artifacts_to_json(const Artifacts& artifacts) {
    Json j;
    j["schema_version"] = kSchemaVersion;
    j["kind"] = "loadlord-bundle";

    Json image;
    image["entry"] = hex_addr(artifacts.entry);
    image["machine"] = artifacts.image.machine;
    Json segments = Json::array();
    for (const auto& seg : artifacts.image.segments) {
        Json s;
        s["vaddr"] = hex_addr(seg.vaddr);
        s["file_offset"] = seg.file_offset;
        s["file_size"] = seg.file_size;
        s["mem_size"] = seg.mem_size;
        std::string perms;
        perms += seg.perms.read ? 'r' : '-';
        perms += seg.perms.write ? 'w' : '-';
        perms += seg.perms.execute ? 'x' : '-';
        s["perms"] = perms;
        segments.push_back(std::move(s));
    }
    image["segments"] = std::move(segments);
    j["image"] = std::move(image);

    Json functions = Json::array();
    for (const auto& rec : artifacts.map.records) {
        Json f;
        f["id"] = rec.id;
        f["start"] = hex_addr(rec.start);
        f["end"] = hex_addr(rec.end);
        f["provenance"] = provenance_name(rec.provenance);
        if (!rec.name.empty()) f["name"] = rec.name;
        functions.push_back(std::move(f));
    }
    j["functions"] = std::move(functions);

    Json legal;
    legal["function_starts"] = addr_set_to_json(artifacts.legal.function_starts);
    legal["call_returns"] = addr_set_to_json(artifacts.legal.call_returns);
    legal["cross_jump_targets"] = addr_set_to_json(artifacts.legal.cross_jump_targets);
    j["legal_addresses"] = std::move(legal);

    Json call_sites = Json::array();
    for (const auto& site : artifacts.call_sites) {
        Json s;
        s["vaddr"] = hex_addr(site.vaddr);
        s["target"] = hex_addr(site.target);
        s["return"] = hex_addr(site.return_addr);
        call_sites.push_back(std::move(s));
    }
    j["call_sites"] = std::move(call_sites);

    Json gadgets;
    gadgets["max_len"] = artifacts.max_gadget_len;
    gadgets["totals"] = counts_to_json(artifacts.index.totals);
    Json by_function = Json::array();
    for (size_t id = 0; id < artifacts.index.by_function.size(); ++id) {
        Json f;
        f["function"] = id;
        f["counts"] = counts_to_json(artifacts.index.class_counts[id]);
        Json list = Json::array();
        for (const auto& g : artifacts.index.by_function[id]) list.push_back(gadget_to_json(g));
        f["gadgets"] = std::move(list);
        by_function.push_back(std::move(f));
    }
    gadgets["by_function"] = std::move(by_function);
    Json unattributed = Json::array();
    for (const auto& g : artifacts.index.unattributed) unattributed.push_back(gadget_to_json(g));
    gadgets["unattributed"] = std::move(unattributed);
    j["gadgets"] = std::move(gadgets);
    return j;
}

Artifacts artifacts_from_json(const Json& j) {
    if (!j.contains("kind") || j.at("kind") != "loadlord-bundle")
        throw Error("not a loadlord bundle");
    if (j.at("schema_version").get<int>() != kSchemaVersion)
        throw Error("unsupported bundle schema version");

    Artifacts a;
    a.entry = parse_hex_addr(j.at("image").at("entry").get<std::string>());
    a.image.entry = a.entry;
    a.image.machine = j.at("image").at("machine").get<std::string>();
    for (const auto& s : j.at("image").at("segments")) {
        Segment seg;
        seg.vaddr = parse_hex_addr(s.at("vaddr").get<std::string>());
        seg.file_offset = s.at("file_offset").get<uint64_t>();
        seg.file_size = s.at("file_size").get<uint64_t>();
        seg.mem_size = s.at("mem_size").get<uint64_t>();
        std::string perms = s.at("perms").get<std::string>();
        seg.perms.read = perms.size() > 0 && perms[0] == 'r';
        seg.perms.write = perms.size() > 1 && perms[1] == 'w';
        seg.perms.execute = perms.size() > 2 && perms[2] == 'x';
        // bundle carries segment metadata, not bytes
        a.image.segments.push_back(std::move(seg));
    }

    for (const auto& f : j.at("functions")) {
        FunctionRecord rec;
        rec.id = f.at("id").get<uint32_t>();
        rec.start = parse_hex_addr(f.at("start").get<std::string>());
        rec.end = parse_hex_addr(f.at("end").get<std::string>());
        rec.provenance = provenance_from(f.at("provenance").get<std::string>());
        if (f.contains("name")) rec.name = f.at("name").get<std::string>();
        a.map.records.push_back(std::move(rec));
    }

    const Json& legal = j.at("legal_addresses");
    a.legal.function_starts = addr_set_from_json(legal.at("function_starts"));
    a.legal.call_returns = addr_set_from_json(legal.at("call_returns"));
    a.legal.cross_jump_targets = addr_set_from_json(legal.at("cross_jump_targets"));

    for (const auto& s : j.at("call_sites")) {
        CallSite site;
        site.vaddr = parse_hex_addr(s.at("vaddr").get<std::string>());
        site.target = parse_hex_addr(s.at("target").get<std::string>());
        site.return_addr = parse_hex_addr(s.at("return").get<std::string>());
        a.call_sites.push_back(site);
    }

    const Json& gadgets = j.at("gadgets");
    a.max_gadget_len = gadgets.at("max_len").get<int>();
    a.index.by_function.resize(a.map.size());
    a.index.class_counts.resize(a.map.size());
    for (const auto& f : gadgets.at("by_function")) {
        uint32_t id = f.at("function").get<uint32_t>();
        if (id >= a.map.size()) throw Error("bundle gadget references unknown function");
        for (const auto& g : f.at("gadgets")) {
            Gadget gadget = gadget_from_json(g, id);
            a.index.class_counts[id].add(gadget.classes);
            a.index.totals.add(gadget.classes);
            a.index.by_function[id].push_back(std::move(gadget));
        }
    }
    for (const auto& g : gadgets.at("unattributed")) {
        Gadget gadget = gadget_from_json(g, std::nullopt);
        a.index.unattributed_counts.add(gadget.classes);
        a.index.totals.add(gadget.classes);
        a.index.unattributed.push_back(std::move(gadget));
    }
    return a;
}

Json sim_report_to_json(const SimReport& report) {
    Json j;
    j["schema_version"] = kSchemaVersion;
    j["kind"] = "loadlord-sim-report";
    j["limit"] = report.limit_str;
    j["total_gadgets"] = report.total_gadgets;
    j["survive_gadgets"] = report.survive_gadgets;
    j["survive_final"] = report.survive_final;
    j["survive_mean"] = report.survive_mean;
    j["reduce_percent"] = report.reduce_percent;
    j["resident_loadmem_max"] = report.resident_loadmem_max;
    j["loads"] = report.loads;
    j["unloads"] = report.unloads;
    j["events_processed"] = report.events_processed;
    j["halted_on_violation"] = report.halted_on_violation;
    j["violations"] = violations_to_json(report.violations);
    j["known_escapes"] = violations_to_json(report.known_escapes);
    Json timeline = Json::array();
    for (const auto& ev : report.timeline) timeline.push_back(policy_event_to_json(ev));
    j["timeline"] = std::move(timeline);
    return j;
}

Json policy_event_to_json(const PolicyEvent& ev) {
    Json j;
    j["clock"] = ev.clock;
    switch (ev.kind) {
    case PolicyEvent::Kind::load: j["kind"] = "load"; break;
    case PolicyEvent::Kind::unload: j["kind"] = "unload"; break;
    case PolicyEvent::Kind::violation: j["kind"] = "violation"; break;
    case PolicyEvent::Kind::residual_risk: j["kind"] = "residual_risk"; break;
    case PolicyEvent::Kind::noop: j["kind"] = "noop"; break;
    }
    j["addr"] = hex_addr(ev.addr);
    if (ev.function) j["function"] = *ev.function;
    else j["function"] = nullptr;
    Json evicted = Json::array();
    for (uint32_t id : ev.evicted) evicted.push_back(id);
    j["evicted"] = std::move(evicted);
    Json counters;
    for (size_t i = 0; i < kGadgetClassCount; ++i)
        counters[gadget_class_name(static_cast<GadgetClass>(i))] = ev.class_counters[i];
    j["class_counters"] = std::move(counters);
    if (ev.kind == PolicyEvent::Kind::load || ev.kind == PolicyEvent::Kind::violation) {
        j["reason"] = load_reason_name(ev.reason);
        j["origin"] = ev.origin == Origin::attacker ? "attacker" : "program";
    }
    if (ev.kind == PolicyEvent::Kind::unload)
        j["trigger"] =
            ev.trigger == PolicyEvent::UnloadTrigger::semantic ? "semantic" : "fifo";
    return j;
}

Json sweep_to_json(const SweepResult& sweep) {
    Json j;
    j["schema_version"] = kSchemaVersion;
    j["kind"] = "loadlord-sweep";
    Json reports = Json::array();
    for (const auto& [fraction, report] : sweep.reports) {
        Json r;
        r["fraction"] = fraction.str();
        Json body = sim_report_to_json(report);
        body.erase("timeline"); // per-fraction timelines would dwarf the sweep
        r["report"] = std::move(body);
        reports.push_back(std::move(r));
    }
    j["reports"] = std::move(reports);
    j["survive_monotone"] = sweep.survive_monotone;
    return j;
}

Json attack_report_to_json(const AttackReport& report) {
    Json j;
    j["schema_version"] = kSchemaVersion;
    j["kind"] = "loadlord-attack-report";
    Json outcomes = Json::array();
    for (const auto& o : report.outcomes) {
        Json s;
        s["family"] = attack_family_name(o.scenario.family);
        s["probe"] = hex_addr(o.scenario.probe_addr);
        s["expected"] = o.scenario.expect_violation ? "violation" : "known_escape";
        s["actual"] = o.violated ? "violation" : "known_escape";
        s["as_expected"] = o.as_expected;
        outcomes.push_back(std::move(s));
    }
    j["scenarios"] = std::move(outcomes);
    Json families;
    const char* names[3] = {"mid_function_gadget", "forged_return", "function_entry"};
    for (int fam = 0; fam < 3; ++fam) {
        Json f;
        f["count"] = report.family_counts[fam];
        f["violations"] = report.family_violations[fam];
        families[names[fam]] = std::move(f);
    }
    j["families"] = std::move(families);
    j["all_as_expected"] = report.all_as_expected;
    return j;
}

std::string totals_summary(const Artifacts& artifacts) {
    std::ostringstream out;
    const ClassCounts& t = artifacts.index.totals;
    out << "functions: " << artifacts.map.size() << "\n";
    out << "gadgets:   " << t.total << " total";
    if (t.total > 0) {
        out << " (";
        bool first = true;
        for (size_t i = 0; i < kGadgetClassCount; ++i) {
            if (!first) out << ", ";
            out << gadget_class_name(static_cast<GadgetClass>(i)) << " " << t.per_class[i];
            first = false;
        }
        out << ")";
    }
    out << "\n";
    out << "legal:     " << artifacts.legal.function_starts.size() << " starts, "
        << artifacts.legal.call_returns.size() << " call returns, "
        << artifacts.legal.cross_jump_targets.size() << " cross-jump targets\n";
    return out.str();
}

} // namespace loadlord
