#include "loadlord/gadget.hpp"

#include <algorithm>

#include "loadlord/decoder.hpp"

namespace loadlord {

namespace {

TerminatorKind terminator_kind(const InstructionRecord& insn) {
    switch (insn.op_class) {
    case OpClass::jmp_ind: return TerminatorKind::jmp_ind;
    case OpClass::call_ind: return TerminatorKind::call_ind;
    case OpClass::syscall_op: return TerminatorKind::syscall_term;
    default: return TerminatorKind::ret;
    }
}

// Decode forward from `start`; the candidate is a gadget iff every
// instruction decodes, only the last transfers control, and that last one
// starts exactly at `term_off`.
bool walk_to_terminator(std::span<const uint8_t> bytes, uint64_t base, size_t start,
                        size_t term_off, const InstructionRecord& term, int max_len,
                        std::vector<InstructionRecord>& out) {
    out.clear();
    size_t pos = start;
    while (pos < term_off) {
        InstructionRecord insn = decode_one(bytes.subspan(pos), base + pos);
        if (!insn.decoded || insn.is_control_transfer()) return false;
        out.push_back(insn);
        if (static_cast<int>(out.size()) > max_len - 1) return false; // terminator needs a slot
        pos += insn.length;
    }
    if (pos != term_off) return false;
    out.push_back(term);
    return true;
}

} // namespace

std::vector<Gadget> scan_gadgets(const LoadableImage& image, int max_len) {
    if (max_len < 1) max_len = 1;
    std::vector<Gadget> out;
    const size_t window = static_cast<size_t>(kScanBytesPerSlot) * (max_len - 1);

    for (const auto& seg : image.segments) {
        if (!seg.perms.execute) continue;
        std::vector<uint8_t> bytes = bytes_at(image, seg.vaddr, seg.mem_size);
        std::span<const uint8_t> view(bytes);

        for (size_t t = 0; t < bytes.size(); ++t) {
            InstructionRecord term = decode_one(view.subspan(t), seg.vaddr + t);
            if (!term.decoded || !term.is_terminator()) continue;

            size_t lo = t > window ? t - window : 0;
            std::vector<InstructionRecord> instrs;
            for (size_t s = lo; s <= t; ++s) {
                if (!walk_to_terminator(view, seg.vaddr, s, t, term, max_len, instrs))
                    continue;
                Gadget g;
                g.start = seg.vaddr + s;
                g.instrs = instrs;
                g.terminator = terminator_kind(term);
                g.classes = classify_gadget(g);
                out.push_back(std::move(g));
            }
        }
    }
    std::sort(out.begin(), out.end(),
              [](const Gadget& a, const Gadget& b) { return a.start < b.start; });
    return out;
}

GadgetClassSet classify_gadget(const Gadget& g) {
    GadgetClassSet classes;
    for (const auto& insn : g.instrs) {
        switch (insn.op_class) {
        case OpClass::pop:
            if (insn.dst.is_reg()) classes.add(GadgetClass::LoadMemG);
            break;
        case OpClass::load_mem: // mov reg <- [reg+off], leave
            if (insn.dst.is_reg() && insn.src.is_mem_with_reg_base())
                classes.add(GadgetClass::LoadMemG);
            break;
        case OpClass::arith:
            if (insn.dst.is_reg()) {
                classes.add(GadgetClass::ArithmeticG);
                // add/sub reg, [reg+off] also loads from memory
                if ((insn.mnemonic == Mnemonic::add || insn.mnemonic == Mnemonic::sub) &&
                    insn.src.is_mem_with_reg_base())
                    classes.add(GadgetClass::LoadMemG);
            } else if (insn.dst.is_mem_with_reg_base() && insn.src.is_reg()) {
                classes.add(GadgetClass::StoreMemG);
            }
            break;
        case OpClass::store_mem:
            if (insn.dst.is_mem_with_reg_base() && insn.src.is_reg())
                classes.add(GadgetClass::StoreMemG);
            break;
        case OpClass::move_reg:
            if (insn.dst.is_reg() &&
                (insn.src.is_reg() || insn.src.kind == Operand::Kind::imm))
                classes.add(GadgetClass::MoveRegG);
            break;
        default:
            break;
        }
    }
    switch (g.terminator) {
    case TerminatorKind::syscall_term: classes.add(GadgetClass::SYSG); break;
    case TerminatorKind::jmp_ind:
    case TerminatorKind::call_ind: classes.add(GadgetClass::JumpG); break;
    case TerminatorKind::ret: break;
    }
    return classes;
}

GadgetIndex build_gadget_index(std::vector<Gadget> gadgets, const FunctionMap& map) {
    GadgetIndex index;
    index.by_function.resize(map.size());
    index.class_counts.resize(map.size());
    for (auto& g : gadgets) {
        const FunctionRecord* owner = owning_function(map, g.start);
        index.totals.add(g.classes);
        if (owner) {
            g.owner = owner->id;
            index.class_counts[owner->id].add(g.classes);
            index.by_function[owner->id].push_back(std::move(g));
        } else {
            g.owner.reset();
            index.unattributed_counts.add(g.classes);
            index.unattributed.push_back(std::move(g));
        }
    }
    return index;
}

const char* gadget_class_name(GadgetClass c) {
    switch (c) {
    case GadgetClass::ArithmeticG: return "ArithmeticG";
    case GadgetClass::LoadMemG: return "LoadMemG";
    case GadgetClass::StoreMemG: return "StoreMemG";
    case GadgetClass::MoveRegG: return "MoveRegG";
    case GadgetClass::SYSG: return "SYSG";
    case GadgetClass::JumpG: return "JumpG";
    }
    return "?";
}

const char* terminator_name(TerminatorKind t) {
    switch (t) {
    case TerminatorKind::ret: return "ret";
    case TerminatorKind::jmp_ind: return "jmp_ind";
    case TerminatorKind::call_ind: return "call_ind";
    case TerminatorKind::syscall_term: return "syscall";
    }
    return "?";
}

} // namespace loadlord
