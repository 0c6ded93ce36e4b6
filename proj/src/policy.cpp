#include "loadlord/policy.hpp"

#include <algorithm>

#include "loadlord/errors.hpp"

namespace loadlord {

std::string Fraction::str() const {
    return std::to_string(num) + "/" + std::to_string(den);
}

Fraction parse_fraction(const std::string& text) {
    size_t slash = text.find('/');
    if (slash == std::string::npos) throw Error("fraction must look like 1/16: " + text);
    Fraction f;
    try {
        f.num = std::stoull(text.substr(0, slash));
        f.den = std::stoull(text.substr(slash + 1));
    } catch (const std::exception&) {
        throw Error("bad fraction: " + text);
    }
    if (!f.valid()) throw Error("fraction out of (0,1]: " + text);
    return f;
}

uint32_t PolicyConfig::effective_limit(size_t total_functions) const {
    if (limit_absolute) return std::max<uint32_t>(1, *limit_absolute);
    Fraction f = limit_fraction.value_or(Fraction{1, 16});
    uint64_t floor_val = (static_cast<uint64_t>(total_functions) * f.num) / f.den;
    return static_cast<uint32_t>(std::max<uint64_t>(1, floor_val));
}

const char* load_reason_name(LoadReason r) {
    switch (r) {
    case LoadReason::new_function: return "new_function";
    case LoadReason::return_reload: return "return_reload";
    case LoadReason::cross_jump: return "cross_jump";
    }
    return "?";
}

PolicyEngine::PolicyEngine(const FunctionMap& map, const GadgetIndex& index,
                           const LegalAddressTable& legal, const PolicyConfig& cfg)
    : map_(map), index_(index), legal_(legal), cfg_(cfg) {
    if (cfg_.limit_fraction && cfg_.limit_absolute)
        throw Error("fractional and absolute limits are mutually exclusive");
    if (index_.by_function.size() != map_.size() || index_.class_counts.size() != map_.size())
        throw InconsistentArtifacts("gadget index does not match the function map");
    for (const auto& gadgets : index_.by_function)
        for (const auto& g : gadgets)
            if (!g.owner || *g.owner >= map_.size())
                throw InconsistentArtifacts("gadget references an unknown function id");
    for (uint64_t start : legal_.function_starts)
        if (!owning_function(map_, start))
            throw InconsistentArtifacts("legal function start outside every function");
    limit_ = cfg_.effective_limit(map_.size());
    load_seq_.assign(map_.size(), 0);
    resident_flag_.assign(map_.size(), 0);
}

bool PolicyEngine::is_resident(uint32_t function_id) const {
    return function_id < resident_flag_.size() && resident_flag_[function_id] != 0;
}

PolicyEvent& PolicyEngine::push_event(PolicyEvent::Kind kind) {
    PolicyEvent ev;
    ev.clock = ++clock_;
    ev.kind = kind;
    events_.push_back(std::move(ev));
    return events_.back();
}

void PolicyEngine::add_resident(uint32_t id) {
    resident_.push_back(id);
    resident_flag_[id] = 1;
    load_seq_[id] = next_load_seq_++;
    const ClassCounts& c = index_.class_counts[id];
    for (size_t i = 0; i < kGadgetClassCount; ++i) counters_[i] += c.per_class[i];
    resident_total_ += c.total;
}

void PolicyEngine::remove_counters(uint32_t id) {
    resident_flag_[id] = 0;
    const ClassCounts& c = index_.class_counts[id];
    for (size_t i = 0; i < kGadgetClassCount; ++i) counters_[i] -= c.per_class[i];
    resident_total_ -= c.total;
}

uint32_t PolicyEngine::evict_for_room() {
    if (resident_.empty()) throw EmptyResidentSet("no resident function to evict");
    uint32_t id = resident_.front();
    resident_.pop_front();
    remove_counters(id);
    PolicyEvent& ev = push_event(PolicyEvent::Kind::unload);
    ev.function = id;
    ev.trigger = PolicyEvent::UnloadTrigger::fifo;
    ev.class_counters = counters_;
    return id;
}

bool PolicyEngine::chain_capable() const {
    bool loadmem = counters_[static_cast<int>(GadgetClass::LoadMemG)] > 0;
    if (cfg_.chain_predicate == ChainPredicate::loadmem_only) return loadmem;
    bool dispatch = counters_[static_cast<int>(GadgetClass::SYSG)] > 0 ||
                    counters_[static_cast<int>(GadgetClass::JumpG)] > 0;
    return loadmem && dispatch;
}

bool PolicyEngine::contributes_to_chain(uint32_t id) const {
    const ClassCounts& c = index_.class_counts[id];
    if (c[GadgetClass::LoadMemG] > 0) return true;
    if (cfg_.chain_predicate == ChainPredicate::loadmem_and_sysg)
        return c[GadgetClass::SYSG] > 0 || c[GadgetClass::JumpG] > 0;
    return false;
}

std::vector<uint32_t> PolicyEngine::semantic_unload() {
    if (!chain_capable()) {
        PolicyEvent& ev = push_event(PolicyEvent::Kind::noop);
        ev.class_counters = counters_;
        return {};
    }
    return semantic_unload_impl(std::nullopt);
}

std::vector<uint32_t> PolicyEngine::semantic_unload_impl(std::optional<uint32_t> in_flight) {
    std::vector<uint32_t> evicted;
    while (chain_capable()) {
        // victim: the chain contributor with the most LoadMemG gadgets,
        // oldest first on ties; the in-flight function is exempt
        std::optional<size_t> victim_pos;
        uint32_t best_count = 0;
        for (size_t pos = 0; pos < resident_.size(); ++pos) {
            uint32_t id = resident_[pos];
            if (in_flight && id == *in_flight) continue;
            if (!contributes_to_chain(id)) continue;
            uint32_t count = index_.class_counts[id][GadgetClass::LoadMemG];
            if (!victim_pos || count > best_count) {
                victim_pos = pos;
                best_count = count;
            }
        }
        if (!victim_pos) {
            // the in-flight function alone satisfies the predicate; all
            // other contributors are already gone
            PolicyEvent& ev = push_event(PolicyEvent::Kind::residual_risk);
            ev.function = in_flight;
            ev.class_counters = counters_;
            break;
        }
        uint32_t id = resident_[*victim_pos];
        resident_.erase(resident_.begin() + static_cast<long>(*victim_pos));
        remove_counters(id);
        evicted.push_back(id);
        PolicyEvent& ev = push_event(PolicyEvent::Kind::unload);
        ev.function = id;
        ev.trigger = PolicyEvent::UnloadTrigger::semantic;
        ev.class_counters = counters_;
    }
    return evicted;
}

LoadOutcome PolicyEngine::request_load(uint64_t addr, LoadReason reason, Origin origin) {
    LoadOutcome outcome;
    outcome.reason = reason;

    if (!legal_.is_legal(addr)) {
        outcome.kind = LoadOutcome::Kind::violation;
        PolicyEvent& ev = push_event(PolicyEvent::Kind::violation);
        ev.addr = addr;
        ev.reason = reason;
        ev.origin = origin;
        ev.class_counters = counters_;
        return outcome;
    }

    const FunctionRecord* owner = owning_function(map_, addr);
    if (!owner) throw UnknownAddress("legal address lies outside every function");
    uint32_t id = owner->id;
    outcome.function = id;

    if (is_resident(id)) {
        outcome.kind = LoadOutcome::Kind::already_resident;
        return outcome;
    }

    outcome.kind = LoadOutcome::Kind::loaded;
    while (resident_.size() >= limit_) outcome.evicted.push_back(evict_for_room());
    add_resident(id);

    PolicyEvent& load_ev = push_event(PolicyEvent::Kind::load);
    load_ev.addr = addr;
    load_ev.function = id;
    load_ev.evicted = outcome.evicted;
    load_ev.reason = reason;
    load_ev.origin = origin;
    load_ev.class_counters = counters_;

    if (cfg_.semantic_unload_enabled && chain_capable()) {
        auto semantic = semantic_unload_impl(id);
        outcome.evicted.insert(outcome.evicted.end(), semantic.begin(), semantic.end());
    }
    return outcome;
}

LoadOutcome PolicyEngine::handle_return(uint64_t ret_addr, Origin origin) {
    return request_load(ret_addr, LoadReason::return_reload, origin);
}

ClassCounts PolicyEngine::resident_gadget_census() const {
    ClassCounts counts;
    for (uint32_t id : resident_) counts.add_counts(index_.class_counts[id]);
    return counts;
}

} // namespace loadlord
