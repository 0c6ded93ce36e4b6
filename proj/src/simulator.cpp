#include "loadlord/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <future>

#include "loadlord/errors.hpp"

namespace loadlord {

double measure_reduction(uint64_t total, uint64_t survive) {
    if (total == 0) throw ZeroTotal("no gadgets to reduce");
    if (survive > total) throw Error("survive count exceeds total");
    double percent = 100.0 * (1.0 - static_cast<double>(survive) / static_cast<double>(total));
    return std::round(percent * 100.0) / 100.0;
}

SimReport replay(const std::vector<TraceEvent>& trace, const Artifacts& artifacts,
                 const PolicyConfig& cfg) {
    PolicyEngine engine(artifacts.map, artifacts.index, artifacts.legal, cfg);
    SimReport report;
    report.total_gadgets = artifacts.index.totals.total;
    report.limit_str = cfg.limit_absolute
                           ? std::to_string(*cfg.limit_absolute)
                           : cfg.limit_fraction.value_or(Fraction{1, 16}).str();

    uint64_t survive_sum = 0;
    for (const auto& ev : trace) {
        LoadOutcome outcome;
        Origin origin = ev.kind == TraceEvent::Kind::probe ? Origin::attacker : Origin::program;
        switch (ev.kind) {
        case TraceEvent::Kind::call:
            outcome = engine.request_load(ev.addr, LoadReason::new_function, origin);
            break;
        case TraceEvent::Kind::jump:
            outcome = engine.request_load(ev.addr, LoadReason::cross_jump, origin);
            break;
        case TraceEvent::Kind::ret:
            outcome = engine.handle_return(ev.addr, origin);
            break;
        case TraceEvent::Kind::probe:
            outcome = engine.request_load(ev.addr, LoadReason::new_function, origin);
            break;
        }
        ++report.events_processed;

        uint64_t resident_now = engine.resident_gadget_total();
        report.survive_gadgets = std::max(report.survive_gadgets, resident_now);
        report.resident_loadmem_max =
            std::max(report.resident_loadmem_max,
                     engine.class_counters()[static_cast<int>(GadgetClass::LoadMemG)]);
        survive_sum += resident_now;

        if (outcome.kind == LoadOutcome::Kind::violation) {
            report.violations.push_back({ev.seq, ev.addr, origin});
            if (cfg.strict) {
                report.halted_on_violation = true;
                break;
            }
        } else if (ev.kind == TraceEvent::Kind::probe) {
            report.known_escapes.push_back({ev.seq, ev.addr, origin});
        }
    }

    report.survive_final = engine.resident_gadget_total();
    report.survive_mean =
        report.events_processed == 0
            ? 0.0
            : std::round(100.0 * static_cast<double>(survive_sum) /
                         static_cast<double>(report.events_processed)) /
                  100.0;
    report.reduce_percent = report.total_gadgets == 0
                                ? 0.0
                                : measure_reduction(report.total_gadgets, report.survive_gadgets);
    for (const auto& ev : engine.event_log()) {
        report.loads += ev.kind == PolicyEvent::Kind::load;
        report.unloads += ev.kind == PolicyEvent::Kind::unload;
    }
    report.timeline = engine.event_log();
    return report;
}

SweepResult sweep_limits(const std::vector<TraceEvent>& trace, const Artifacts& artifacts,
                         const PolicyConfig& base_cfg, const std::vector<Fraction>& fractions) {
    SweepResult result;
    std::vector<std::future<SimReport>> futures;
    futures.reserve(fractions.size());
    for (const Fraction& f : fractions) {
        PolicyConfig cfg = base_cfg;
        cfg.limit_absolute.reset();
        cfg.limit_fraction = f;
        futures.push_back(std::async(std::launch::async, [&trace, &artifacts, cfg] {
            return replay(trace, artifacts, cfg);
        }));
    }
    for (size_t i = 0; i < fractions.size(); ++i)
        result.reports.emplace_back(fractions[i], futures[i].get());

    // survive max must be non-decreasing in the effective limit
    std::vector<std::pair<uint32_t, uint64_t>> by_limit;
    for (const auto& [fraction, report] : result.reports) {
        PolicyConfig cfg = base_cfg;
        cfg.limit_absolute.reset();
        cfg.limit_fraction = fraction;
        by_limit.emplace_back(cfg.effective_limit(artifacts.map.size()), report.survive_gadgets);
    }
    std::sort(by_limit.begin(), by_limit.end());
    for (size_t i = 1; i < by_limit.size(); ++i)
        if (by_limit[i].second < by_limit[i - 1].second) result.survive_monotone = false;
    return result;
}

const char* attack_family_name(AttackScenario::Family f) {
    switch (f) {
    case AttackScenario::Family::mid_function_gadget: return "mid_function_gadget";
    case AttackScenario::Family::forged_return: return "forged_return";
    case AttackScenario::Family::function_entry: return "function_entry";
    }
    return "?";
}

std::vector<AttackScenario> generate_attack_suite(const Artifacts& artifacts) {
    if (artifacts.index.totals.total == 0)
        throw Error("attack suite needs a non-empty gadget index");

    constexpr size_t kPerFamilyCap = 64;
    std::vector<AttackScenario> out;
    auto add = [&](AttackScenario::Family family, uint64_t addr, bool expect_violation) {
        AttackScenario sc;
        sc.family = family;
        sc.probe_addr = addr;
        sc.expect_violation = expect_violation;
        TraceEvent probe;
        probe.kind = TraceEvent::Kind::probe;
        probe.addr = addr;
        probe.seq = 0;
        sc.trace.push_back(probe);
        out.push_back(std::move(sc));
    };

    std::set<uint64_t> gadget_starts;
    for (const auto& gadgets : artifacts.index.by_function)
        for (const auto& g : gadgets) gadget_starts.insert(g.start);

    // (a) gadget starts strictly inside a function and not legal
    size_t count = 0;
    for (uint64_t addr : gadget_starts) {
        if (count >= kPerFamilyCap) break;
        const FunctionRecord* owner = owning_function(artifacts.map, addr);
        if (!owner || owner->start == addr) continue;
        if (artifacts.legal.is_legal(addr)) continue;
        add(AttackScenario::Family::mid_function_gadget, addr, true);
        ++count;
    }

    // (b) forged returns: mid-function addresses that are neither legal
    // nor gadget starts
    count = 0;
    for (const auto& rec : artifacts.map.records) {
        if (count >= kPerFamilyCap) break;
        for (uint64_t addr = rec.start + 1; addr < rec.end; ++addr) {
            if (artifacts.legal.is_legal(addr) || gadget_starts.count(addr)) continue;
            add(AttackScenario::Family::forged_return, addr, true);
            ++count;
            break; // one per function
        }
    }

    // (c) return-to-libc analogue: whole-function entry, legal by design
    count = 0;
    for (const auto& rec : artifacts.map.records) {
        if (count >= kPerFamilyCap) break;
        add(AttackScenario::Family::function_entry, rec.start, false);
        ++count;
    }
    return out;
}

AttackReport run_attack_suite(const Artifacts& artifacts, const PolicyConfig& cfg) {
    AttackReport report;
    for (auto& scenario : generate_attack_suite(artifacts)) {
        SimReport sim = replay(scenario.trace, artifacts, cfg);
        AttackOutcome outcome;
        outcome.violated = !sim.violations.empty();
        outcome.known_escape = !outcome.violated;
        outcome.as_expected = outcome.violated == scenario.expect_violation;
        int fam = static_cast<int>(scenario.family);
        ++report.family_counts[fam];
        report.family_violations[fam] += outcome.violated;
        report.all_as_expected = report.all_as_expected && outcome.as_expected;
        outcome.scenario = std::move(scenario);
        report.outcomes.push_back(std::move(outcome));
    }
    return report;
}

} // namespace loadlord
