#ifndef LOADLORD_TESTS_FIXTURES_HPP
#define LOADLORD_TESTS_FIXTURES_HPP

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace fixtures {

// Tiny x86-64 emitter for hand-assembled fixtures: fixed encodings, byte
// labels, rel32 fixups.
class Asm {
public:
    explicit Asm(uint64_t base) : base_(base) {}

    uint64_t here() const { return base_ + code_.size(); }
    uint64_t base() const { return base_; }
    void label(const std::string& name) { labels_[name] = here(); }
    uint64_t addr_of(const std::string& name) const { return labels_.at(name); }

    void raw(std::initializer_list<uint8_t> bytes) {
        code_.insert(code_.end(), bytes.begin(), bytes.end());
    }
    void pad(size_t count, uint8_t value) { code_.insert(code_.end(), count, value); }
    void le32(uint32_t v) {
        for (int i = 0; i < 4; ++i) code_.push_back(static_cast<uint8_t>(v >> (8 * i)));
    }

    void push_rbp() { raw({0x55}); }
    void pop_rbp() { raw({0x5d}); }
    void mov_rbp_rsp() { raw({0x48, 0x89, 0xe5}); }
    void ret() { raw({0xc3}); }
    void ret_imm16(uint16_t v) {
        raw({0xc2, static_cast<uint8_t>(v & 0xff), static_cast<uint8_t>(v >> 8)});
    }
    void leave() { raw({0xc9}); }
    void nop() { raw({0x90}); }
    void syscall() { raw({0x0f, 0x05}); }
    void mov_rax_mem_rdi8() { raw({0x48, 0x8b, 0x47, 0x08}); }  // mov rax, [rdi+8]
    void mov_mem_rdi8_rax() { raw({0x48, 0x89, 0x47, 0x08}); }  // mov [rdi+8], rax
    void mov_rax_rbx() { raw({0x48, 0x89, 0xd8}); }
    void mov_rax_rcx() { raw({0x48, 0x89, 0xc8}); }
    void add_rax_rbx() { raw({0x48, 0x01, 0xd8}); }
    void jmp_rax() { raw({0xff, 0xe0}); }
    void mov_rax_imm32(uint32_t v) { raw({0x48, 0xc7, 0xc0}); le32(v); } // sign-extended
    void mov_eax_imm32(uint32_t v) { raw({0xb8}); le32(v); }
    void mov_edi_imm32(uint32_t v) { raw({0xbf}); le32(v); }
    void mov_esi_imm32(uint32_t v) { raw({0xbe}); le32(v); }
    void mov_edx_imm32(uint32_t v) { raw({0xba}); le32(v); }
    void push_imm32(uint32_t v) { raw({0x68}); le32(v); }

    void call(const std::string& target) {
        raw({0xe8});
        fixups_.push_back({code_.size(), target});
        le32(0);
    }
    void jmp(const std::string& target) {
        raw({0xe9});
        fixups_.push_back({code_.size(), target});
        le32(0);
    }

    // write(1, message_addr, 1)
    void write_char(uint32_t message_addr) {
        mov_eax_imm32(1);
        mov_edi_imm32(1);
        mov_esi_imm32(message_addr);
        mov_edx_imm32(1);
        syscall();
    }
    void exit_with(uint32_t code) {
        mov_eax_imm32(60);
        mov_edi_imm32(code);
        syscall();
    }

    std::vector<uint8_t> finish() {
        for (const auto& fix : fixups_) {
            uint64_t target = labels_.at(fix.label);
            uint64_t insn_end = base_ + fix.pos + 4;
            int32_t rel = static_cast<int32_t>(static_cast<int64_t>(target) -
                                               static_cast<int64_t>(insn_end));
            for (int i = 0; i < 4; ++i)
                code_[fix.pos + i] = static_cast<uint8_t>(static_cast<uint32_t>(rel) >> (8 * i));
        }
        fixups_.clear();
        return code_;
    }

private:
    struct Fixup {
        size_t pos; // offset of the rel32 field
        std::string label;
    };
    uint64_t base_;
    std::vector<uint8_t> code_;
    std::map<std::string, uint64_t> labels_;
    std::vector<Fixup> fixups_;
};

struct ElfFunctionSym {
    std::string name;
    uint64_t addr = 0;
    uint64_t size = 0;
};

// Minimal static ET_EXEC writer: one RX text segment, optional RW data
// segment, optional .symtab.
struct ElfBuilder {
    uint64_t text_vaddr = 0x401000;
    std::vector<uint8_t> text;
    uint64_t data_vaddr = 0x404000;
    std::vector<uint8_t> data;
    uint64_t entry = 0x401000;
    std::vector<ElfFunctionSym> symbols; // emitted only when with_symtab
    bool with_symtab = false;

    std::vector<uint8_t> build() const;
};

struct Fixture {
    std::string name;
    std::vector<uint8_t> elf;
    uint64_t base = 0x401000;
    std::map<std::string, uint64_t> labels; // function starts and friends
    std::string seeds_text;                 // boundary file (corpus3 only)
};

// Golden-file corpus binary: 24 template functions with hand-enumerated
// gadget profiles, invalid-byte padding, symtab boundaries.
Fixture corpus1();
// Heuristic-seeding corpus: no symbols, prologue + call-target discovery,
// one cross-function jmp, a ret imm16, int3 padding.
Fixture corpus2();
// Seeds-file corpus: 40 generated functions, calls into interiors to
// force splitting, ret-bytes hidden in immediates.
Fixture corpus3();
// Live fixtures: deterministic output + exit code, and a self-redirecting
// overflow victim.
Fixture run8();
Fixture overflow();
// One RX segment of exactly 4096 bytes.
Fixture mini4k();

void write_file(const std::string& path, const std::vector<uint8_t>& bytes,
                bool executable = false);
std::string write_corpus(const std::string& dir); // writes all fixtures, returns dir

} // namespace fixtures

#endif
