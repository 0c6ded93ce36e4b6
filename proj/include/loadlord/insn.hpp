#ifndef LOADLORD_INSN_HPP
#define LOADLORD_INSN_HPP

#include <cstdint>
#include <string>

namespace loadlord {

// Coarse instruction classes. Only what gadget classification and the
// legal-address analysis need; everything else is `other`.
enum class OpClass : uint8_t {
    arith,     // add/sub/and/or/xor
    load_mem,  // register <- memory via mov family (incl. leave)
    store_mem, // memory <- register/immediate via mov family
    move_reg,  // register <- register/immediate via mov family
    pop,
    push,
    syscall_op,
    call_ind,
    jmp_ind,
    jmp_dir, // direct jmp and conditional jcc
    call_dir,
    ret,
    other,
};

enum class Mnemonic : uint8_t {
    add, sub, and_, or_, xor_,
    mov, pop, push, ret, syscall_insn,
    jmp, jcc, call, leave, nop, other,
};

// Register ids: 0..15 = rax,rcx,rdx,rbx,rsp,rbp,rsi,rdi,r8..r15 (low-byte /
// word / dword forms map to the same id). 16 = rip.
inline constexpr int kRegRsp = 4;
inline constexpr int kRegRbp = 5;
inline constexpr int kRegRip = 16;
inline constexpr int kRegNone = -1;

struct Operand {
    enum class Kind : uint8_t { none, reg, mem, imm };
    Kind kind = Kind::none;
    int8_t reg = kRegNone; // register id, or base register for mem (kRegNone = no base)
    int64_t value = 0;     // immediate value, or displacement for mem

    static Operand make_reg(int r) { return {Kind::reg, static_cast<int8_t>(r), 0}; }
    static Operand make_mem(int base, int64_t disp) {
        return {Kind::mem, static_cast<int8_t>(base), disp};
    }
    static Operand make_imm(int64_t v) { return {Kind::imm, kRegNone, v}; }
    bool is_reg() const { return kind == Kind::reg; }
    // A memory operand addressable through an attacker-held register, i.e.
    // [reg + offset] with a general-purpose base (not rip-relative, not
    // absolute).
    bool is_mem_with_reg_base() const {
        return kind == Kind::mem && reg >= 0 && reg < 16;
    }
};

struct InstructionRecord {
    uint64_t vaddr = 0;
    uint8_t length = 1;
    bool decoded = false; // false: undecodable byte kept as a length-1 filler
    OpClass op_class = OpClass::other;
    Mnemonic mnemonic = Mnemonic::other;
    Operand dst;
    Operand src;
    bool has_branch_target = false;
    uint64_t branch_target = 0; // resolved absolute target for jmp_dir/call_dir

    uint64_t end() const { return vaddr + length; }

    bool is_terminator() const {
        return op_class == OpClass::ret || op_class == OpClass::jmp_ind ||
               op_class == OpClass::call_ind || op_class == OpClass::syscall_op;
    }
    bool is_control_transfer() const {
        return is_terminator() || op_class == OpClass::jmp_dir ||
               op_class == OpClass::call_dir;
    }
    bool is_call() const {
        return op_class == OpClass::call_dir || op_class == OpClass::call_ind;
    }
};

const char* op_class_name(OpClass c);
const char* mnemonic_name(Mnemonic m);
const char* register_name(int reg); // 64-bit names; "?" for out of range

} // namespace loadlord

#endif
