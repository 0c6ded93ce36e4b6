#include "loadlord/decoder.hpp"

#include <algorithm>

namespace loadlord {

namespace {

constexpr size_t kMaxInsnLen = 15;

struct Reader {
    std::span<const uint8_t> bytes;
    size_t pos = 0;
    bool ok = true;

    uint8_t u8() {
        if (pos >= bytes.size()) { ok = false; return 0; }
        return bytes[pos++];
    }
    int64_t s8() { return static_cast<int8_t>(u8()); }
    int64_t s16() {
        uint16_t v = u8();
        v |= uint16_t(u8()) << 8;
        return static_cast<int16_t>(v);
    }
    int64_t s32() {
        uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= uint32_t(u8()) << (8 * i);
        return static_cast<int32_t>(v);
    }
    int64_t s64() {
        uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= uint64_t(u8()) << (8 * i);
        return static_cast<int64_t>(v);
    }
};

bool is_legacy_prefix(uint8_t b) {
    switch (b) {
    case 0x66: case 0x67:
    case 0x2e: case 0x36: case 0x3e: case 0x26: case 0x64: case 0x65:
    case 0xf0: case 0xf2: case 0xf3:
        return true;
    default:
        return false;
    }
}

struct Rex {
    bool present = false;
    bool w = false, r = false, x = false, b = false;
};

struct ModRM {
    int mod = 0;
    int reg = 0; // REX.R applied
    Operand rm;  // reg or mem operand, REX.B applied
};

bool parse_modrm(Reader& rd, const Rex& rex, ModRM& out) {
    uint8_t m = rd.u8();
    if (!rd.ok) return false;
    out.mod = m >> 6;
    out.reg = ((m >> 3) & 7) | (rex.r ? 8 : 0);
    int rm = m & 7;

    if (out.mod == 3) {
        out.rm = Operand::make_reg(rm | (rex.b ? 8 : 0));
        return true;
    }
    int base = kRegNone;
    int64_t disp = 0;
    if (rm == 4) { // SIB
        uint8_t sib = rd.u8();
        if (!rd.ok) return false;
        int sib_base = (sib & 7) | (rex.b ? 8 : 0);
        if (out.mod == 0) {
            if ((sib & 7) == 5) disp = rd.s32(); // no base, disp32
            else base = sib_base;
        } else {
            base = sib_base;
            disp = (out.mod == 1) ? rd.s8() : rd.s32();
        }
    } else if (rm == 5 && out.mod == 0) {
        base = kRegRip;
        disp = rd.s32();
    } else {
        base = rm | (rex.b ? 8 : 0);
        if (out.mod == 1) disp = rd.s8();
        else if (out.mod == 2) disp = rd.s32();
    }
    out.rm = rd.ok ? Operand::make_mem(base, disp) : Operand{};
    return rd.ok;
}

struct ArithOp {
    Mnemonic mnemonic;
    bool classified; // member of the fixed operator set
};
// Index = (opcode >> 3) & 7 for the 00..3d family and the group-1 /reg field.
constexpr ArithOp kArithFamily[8] = {
    {Mnemonic::add, true},  {Mnemonic::or_, true},  {Mnemonic::other, false}, // adc
    {Mnemonic::other, false},                                                 // sbb
    {Mnemonic::and_, true}, {Mnemonic::sub, true},  {Mnemonic::xor_, true},
    {Mnemonic::other, false},                                                 // cmp
};

// mov-family class from operand shapes.
OpClass mov_class(const Operand& dst, const Operand& src) {
    if (dst.kind == Operand::Kind::mem) return OpClass::store_mem;
    if (src.kind == Operand::Kind::mem) return OpClass::load_mem;
    return OpClass::move_reg;
}

} // namespace

InstructionRecord decode_one(std::span<const uint8_t> bytes, uint64_t vaddr) {
    InstructionRecord insn;
    insn.vaddr = vaddr;
    insn.length = 1;
    insn.decoded = false;
    if (bytes.empty()) return insn;

    Reader rd{bytes};
    Rex rex;
    bool opsize16 = false;
    // Legacy prefixes in any order; a REX byte only counts when it
    // immediately precedes the opcode.
    for (;;) {
        if (rd.pos >= bytes.size() || rd.pos >= kMaxInsnLen) return insn;
        uint8_t b = bytes[rd.pos];
        if (is_legacy_prefix(b)) {
            if (b == 0x66) opsize16 = true;
            rex = Rex{};
            ++rd.pos;
        } else if (b >= 0x40 && b <= 0x4f) {
            rex.present = true;
            rex.w = b & 8;
            rex.r = b & 4;
            rex.x = b & 2;
            rex.b = b & 1;
            ++rd.pos;
        } else {
            break;
        }
    }

    auto imm_z = [&]() -> int64_t { // z-immediate: 16 with 0x66, else 32
        return (opsize16 && !rex.w) ? rd.s16() : rd.s32();
    };
    auto finish = [&](OpClass cls, Mnemonic mn, Operand dst = {}, Operand src = {}) {
        if (!rd.ok || rd.pos > kMaxInsnLen) return insn; // leaves decoded=false
        InstructionRecord out;
        out.vaddr = vaddr;
        out.length = static_cast<uint8_t>(rd.pos);
        out.decoded = true;
        out.op_class = cls;
        out.mnemonic = mn;
        out.dst = dst;
        out.src = src;
        return out;
    };
    auto finish_branch = [&](OpClass cls, Mnemonic mn, int64_t rel) {
        InstructionRecord out = finish(cls, mn);
        if (out.decoded) {
            out.has_branch_target = true;
            out.branch_target = vaddr + out.length + rel;
        }
        return out;
    };

    uint8_t op = rd.u8();
    if (!rd.ok) return insn;

    // 00..3d with low octet 0..5: the classic arith/logic block
    // (add or adc sbb and sub xor cmp); segment pushes and prefixes in
    // that range have low octet 6/7 or were consumed above.
    if (op <= 0x3d && (op & 7) <= 5) {
        ArithOp fam = kArithFamily[(op >> 3) & 7];
        OpClass cls = fam.classified ? OpClass::arith : OpClass::other;
        int form = op & 7;
        if (form <= 3) {
            ModRM mod;
            if (!parse_modrm(rd, rex, mod)) return insn;
            Operand reg_op = Operand::make_reg(mod.reg);
            bool to_rm = form == 0 || form == 1; // MR direction
            Operand dst = to_rm ? mod.rm : reg_op;
            Operand src = to_rm ? reg_op : mod.rm;
            return finish(cls, fam.mnemonic, dst, src);
        }
        // AL/eAX, imm forms
        int64_t imm = (form == 4) ? rd.s8() : imm_z();
        return finish(cls, fam.mnemonic, Operand::make_reg(0), Operand::make_imm(imm));
    }

    switch (op) {
    case 0x0f: { // two-byte map
        uint8_t op2 = rd.u8();
        if (!rd.ok) return insn;
        if (op2 == 0x05)
            return finish(OpClass::syscall_op, Mnemonic::syscall_insn);
        if (op2 >= 0x18 && op2 <= 0x1f) { // hint-nop family (incl. endbr64)
            ModRM mod;
            if (!parse_modrm(rd, rex, mod)) return insn;
            return finish(OpClass::other, Mnemonic::nop);
        }
        if (op2 >= 0x80 && op2 <= 0x8f)
            return finish_branch(OpClass::jmp_dir, Mnemonic::jcc, rd.s32());
        if (op2 >= 0x90 && op2 <= 0x9f) { // setcc r/m8
            ModRM mod;
            if (!parse_modrm(rd, rex, mod)) return insn;
            return finish(OpClass::other, Mnemonic::other, mod.rm);
        }
        switch (op2) {
        case 0xa2: // cpuid
            return finish(OpClass::other, Mnemonic::other);
        case 0xaf: { // imul r, r/m
            ModRM mod;
            if (!parse_modrm(rd, rex, mod)) return insn;
            return finish(OpClass::other, Mnemonic::other, Operand::make_reg(mod.reg), mod.rm);
        }
        case 0xb6: case 0xb7: case 0xbe: case 0xbf: { // movzx/movsx
            ModRM mod;
            if (!parse_modrm(rd, rex, mod)) return insn;
            return finish(OpClass::other, Mnemonic::other, Operand::make_reg(mod.reg), mod.rm);
        }
        default:
            return insn;
        }
    }

    case 0x50: case 0x51: case 0x52: case 0x53:
    case 0x54: case 0x55: case 0x56: case 0x57:
        return finish(OpClass::push, Mnemonic::push, {},
                      Operand::make_reg((op & 7) | (rex.b ? 8 : 0)));

    case 0x58: case 0x59: case 0x5a: case 0x5b:
    case 0x5c: case 0x5d: case 0x5e: case 0x5f:
        return finish(OpClass::pop, Mnemonic::pop,
                      Operand::make_reg((op & 7) | (rex.b ? 8 : 0)),
                      Operand::make_mem(kRegRsp, 0));

    case 0x63: { // movsxd
        ModRM mod;
        if (!parse_modrm(rd, rex, mod)) return insn;
        return finish(OpClass::other, Mnemonic::other, Operand::make_reg(mod.reg), mod.rm);
    }

    case 0x68:
        return finish(OpClass::push, Mnemonic::push, {}, Operand::make_imm(imm_z()));
    case 0x6a:
        return finish(OpClass::push, Mnemonic::push, {}, Operand::make_imm(rd.s8()));

    case 0x69: { // imul r, r/m, imm_z
        ModRM mod;
        if (!parse_modrm(rd, rex, mod)) return insn;
        int64_t imm = imm_z();
        return finish(OpClass::other, Mnemonic::other, Operand::make_reg(mod.reg),
                      Operand::make_imm(imm));
    }
    case 0x6b: { // imul r, r/m, imm8
        ModRM mod;
        if (!parse_modrm(rd, rex, mod)) return insn;
        int64_t imm = rd.s8();
        return finish(OpClass::other, Mnemonic::other, Operand::make_reg(mod.reg),
                      Operand::make_imm(imm));
    }

    case 0x70: case 0x71: case 0x72: case 0x73:
    case 0x74: case 0x75: case 0x76: case 0x77:
    case 0x78: case 0x79: case 0x7a: case 0x7b:
    case 0x7c: case 0x7d: case 0x7e: case 0x7f:
        return finish_branch(OpClass::jmp_dir, Mnemonic::jcc, rd.s8());

    case 0x80: case 0x81: case 0x83: { // group 1: arith r/m, imm
        ModRM mod;
        if (!parse_modrm(rd, rex, mod)) return insn;
        ArithOp fam = kArithFamily[mod.reg & 7];
        int64_t imm = (op == 0x81) ? imm_z() : rd.s8();
        OpClass cls = fam.classified ? OpClass::arith : OpClass::other;
        return finish(cls, fam.mnemonic, mod.rm, Operand::make_imm(imm));
    }

    case 0x84: case 0x85: case 0x86: case 0x87: { // test / xchg
        ModRM mod;
        if (!parse_modrm(rd, rex, mod)) return insn;
        return finish(OpClass::other, Mnemonic::other, mod.rm, Operand::make_reg(mod.reg));
    }

    case 0x88: case 0x89: { // mov r/m, r
        ModRM mod;
        if (!parse_modrm(rd, rex, mod)) return insn;
        Operand src = Operand::make_reg(mod.reg);
        return finish(mov_class(mod.rm, src), Mnemonic::mov, mod.rm, src);
    }
    case 0x8a: case 0x8b: { // mov r, r/m
        ModRM mod;
        if (!parse_modrm(rd, rex, mod)) return insn;
        Operand dst = Operand::make_reg(mod.reg);
        return finish(mov_class(dst, mod.rm), Mnemonic::mov, dst, mod.rm);
    }

    case 0x8d: { // lea: address computation, not a load
        ModRM mod;
        if (!parse_modrm(rd, rex, mod)) return insn;
        if (mod.mod == 3) return insn; // #UD
        return finish(OpClass::other, Mnemonic::other, Operand::make_reg(mod.reg), mod.rm);
    }

    case 0x8f: { // pop r/m
        ModRM mod;
        if (!parse_modrm(rd, rex, mod)) return insn;
        if ((mod.reg & 7) != 0) return insn;
        return finish(OpClass::pop, Mnemonic::pop, mod.rm, Operand::make_mem(kRegRsp, 0));
    }

    case 0x90: case 0x91: case 0x92: case 0x93:
    case 0x94: case 0x95: case 0x96: case 0x97:
        return finish(OpClass::other, op == 0x90 ? Mnemonic::nop : Mnemonic::other);

    case 0x98: case 0x99: case 0x9c: case 0x9d: // cwde/cdq/pushfq/popfq
        return finish(OpClass::other, Mnemonic::other);

    case 0xa8:
        return finish(OpClass::other, Mnemonic::other, Operand::make_reg(0),
                      Operand::make_imm(rd.s8()));
    case 0xa9:
        return finish(OpClass::other, Mnemonic::other, Operand::make_reg(0),
                      Operand::make_imm(imm_z()));

    case 0xb0: case 0xb1: case 0xb2: case 0xb3:
    case 0xb4: case 0xb5: case 0xb6: case 0xb7:
        return finish(OpClass::move_reg, Mnemonic::mov,
                      Operand::make_reg((op & 7) | (rex.b ? 8 : 0)),
                      Operand::make_imm(rd.s8()));

    case 0xb8: case 0xb9: case 0xba: case 0xbb:
    case 0xbc: case 0xbd: case 0xbe: case 0xbf: {
        int64_t imm = rex.w ? rd.s64() : (opsize16 ? rd.s16() : rd.s32());
        return finish(OpClass::move_reg, Mnemonic::mov,
                      Operand::make_reg((op & 7) | (rex.b ? 8 : 0)), Operand::make_imm(imm));
    }

    case 0xc0: case 0xc1: { // shift group, imm8
        ModRM mod;
        if (!parse_modrm(rd, rex, mod)) return insn;
        int64_t imm = rd.s8();
        return finish(OpClass::other, Mnemonic::other, mod.rm, Operand::make_imm(imm));
    }
    case 0xd0: case 0xd1: case 0xd2: case 0xd3: { // shift group
        ModRM mod;
        if (!parse_modrm(rd, rex, mod)) return insn;
        return finish(OpClass::other, Mnemonic::other, mod.rm);
    }

    case 0xc2: { // ret imm16
        int64_t imm = rd.s16();
        return finish(OpClass::ret, Mnemonic::ret, {}, Operand::make_imm(imm));
    }
    case 0xc3:
        return finish(OpClass::ret, Mnemonic::ret);

    case 0xc6: case 0xc7: { // mov r/m, imm
        ModRM mod;
        if (!parse_modrm(rd, rex, mod)) return insn;
        if ((mod.reg & 7) != 0) return insn;
        int64_t imm = (op == 0xc6) ? rd.s8() : imm_z();
        Operand src = Operand::make_imm(imm);
        OpClass cls = mod.rm.kind == Operand::Kind::mem ? OpClass::store_mem
                                                        : OpClass::move_reg;
        return finish(cls, Mnemonic::mov, mod.rm, src);
    }

    case 0xc9: // leave: rsp <- rbp; rbp <- pop
        return finish(OpClass::load_mem, Mnemonic::leave, Operand::make_reg(kRegRbp),
                      Operand::make_mem(kRegRsp, 0));

    case 0xcc:
        return finish(OpClass::other, Mnemonic::other);
    case 0xcd: { // int imm8
        int64_t imm = rd.s8();
        return finish(OpClass::other, Mnemonic::other, {}, Operand::make_imm(imm));
    }

    case 0xe8:
        return finish_branch(OpClass::call_dir, Mnemonic::call, rd.s32());
    case 0xe9:
        return finish_branch(OpClass::jmp_dir, Mnemonic::jmp, rd.s32());
    case 0xeb:
        return finish_branch(OpClass::jmp_dir, Mnemonic::jmp, rd.s8());

    case 0xf5: case 0xf8: case 0xf9: case 0xfa:
    case 0xfb: case 0xfc: case 0xfd: // flag ops
        return finish(OpClass::other, Mnemonic::other);

    case 0xf6: case 0xf7: { // group 3
        ModRM mod;
        if (!parse_modrm(rd, rex, mod)) return insn;
        int sub = mod.reg & 7;
        if (sub == 0 || sub == 1) { // test r/m, imm
            int64_t imm = (op == 0xf6) ? rd.s8() : imm_z();
            return finish(OpClass::other, Mnemonic::other, mod.rm, Operand::make_imm(imm));
        }
        return finish(OpClass::other, Mnemonic::other, mod.rm);
    }

    case 0xfe: { // inc/dec r/m8
        ModRM mod;
        if (!parse_modrm(rd, rex, mod)) return insn;
        if ((mod.reg & 7) > 1) return insn;
        return finish(OpClass::other, Mnemonic::other, mod.rm);
    }

    case 0xff: { // group 5
        ModRM mod;
        if (!parse_modrm(rd, rex, mod)) return insn;
        switch (mod.reg & 7) {
        case 0: case 1: // inc/dec
            return finish(OpClass::other, Mnemonic::other, mod.rm);
        case 2:
            return finish(OpClass::call_ind, Mnemonic::call, {}, mod.rm);
        case 4:
            return finish(OpClass::jmp_ind, Mnemonic::jmp, {}, mod.rm);
        case 6:
            return finish(OpClass::push, Mnemonic::push, {}, mod.rm);
        default: // far call/jmp and /7 are not decoded
            return insn;
        }
    }

    default:
        return insn;
    }
}

std::vector<InstructionRecord> decode_region(std::span<const uint8_t> bytes, uint64_t vaddr) {
    std::vector<InstructionRecord> out;
    size_t pos = 0;
    while (pos < bytes.size()) {
        InstructionRecord insn = decode_one(bytes.subspan(pos), vaddr + pos);
        out.push_back(insn);
        pos += insn.length;
    }
    return out;
}

std::vector<InstructionRecord> decode_stream(const LoadableImage& image) {
    std::vector<InstructionRecord> out;
    for (const auto& seg : image.segments) {
        if (!seg.perms.execute) continue;
        std::vector<uint8_t> content = bytes_at(image, seg.vaddr, seg.mem_size);
        auto part = decode_region(content, seg.vaddr);
        out.insert(out.end(), part.begin(), part.end());
    }
    std::sort(out.begin(), out.end(),
              [](const InstructionRecord& a, const InstructionRecord& b) {
                  return a.vaddr < b.vaddr;
              });
    return out;
}

const char* op_class_name(OpClass c) {
    switch (c) {
    case OpClass::arith: return "arith";
    case OpClass::load_mem: return "load_mem";
    case OpClass::store_mem: return "store_mem";
    case OpClass::move_reg: return "move_reg";
    case OpClass::pop: return "pop";
    case OpClass::push: return "push";
    case OpClass::syscall_op: return "syscall";
    case OpClass::call_ind: return "call_ind";
    case OpClass::jmp_ind: return "jmp_ind";
    case OpClass::jmp_dir: return "jmp_dir";
    case OpClass::call_dir: return "call_dir";
    case OpClass::ret: return "ret";
    case OpClass::other: return "other";
    }
    return "?";
}

const char* mnemonic_name(Mnemonic m) {
    switch (m) {
    case Mnemonic::add: return "add";
    case Mnemonic::sub: return "sub";
    case Mnemonic::and_: return "and";
    case Mnemonic::or_: return "or";
    case Mnemonic::xor_: return "xor";
    case Mnemonic::mov: return "mov";
    case Mnemonic::pop: return "pop";
    case Mnemonic::push: return "push";
    case Mnemonic::ret: return "ret";
    case Mnemonic::syscall_insn: return "syscall";
    case Mnemonic::jmp: return "jmp";
    case Mnemonic::jcc: return "jcc";
    case Mnemonic::call: return "call";
    case Mnemonic::leave: return "leave";
    case Mnemonic::nop: return "nop";
    case Mnemonic::other: return "other";
    }
    return "?";
}

const char* register_name(int reg) {
    static const char* names[17] = {
        "rax", "rcx", "rdx", "rbx", "rsp", "rbp", "rsi", "rdi",
        "r8",  "r9",  "r10", "r11", "r12", "r13", "r14", "r15", "rip",
    };
    if (reg < 0 || reg > 16) return "?";
    return names[reg];
}

} // namespace loadlord
