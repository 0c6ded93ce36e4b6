#include "fixtures.hpp"

#include <algorithm>
#include <cstdio>
#include <cstring>
#include <elf.h>
#include <fstream>
#include <random>
#include <stdexcept>
#include <sys/stat.h>

namespace fixtures {

namespace {

void put_bytes(std::vector<uint8_t>& out, const void* src, size_t n) {
    const auto* p = static_cast<const uint8_t*>(src);
    out.insert(out.end(), p, p + n);
}

uint64_t align_up(uint64_t v, uint64_t a) { return (v + a - 1) & ~(a - 1); }

} // namespace

std::vector<uint8_t> ElfBuilder::build() const {
    const uint64_t page = 0x1000;
    const uint64_t text_off = page;
    const bool have_data = !data.empty();
    const uint64_t data_off = have_data ? align_up(text_off + text.size(), page) : 0;

    uint16_t phnum = have_data ? 2 : 1;

    Elf64_Ehdr ehdr{};
    std::memcpy(ehdr.e_ident, ELFMAG, SELFMAG);
    ehdr.e_ident[EI_CLASS] = ELFCLASS64;
    ehdr.e_ident[EI_DATA] = ELFDATA2LSB;
    ehdr.e_ident[EI_VERSION] = EV_CURRENT;
    ehdr.e_type = ET_EXEC;
    ehdr.e_machine = EM_X86_64;
    ehdr.e_version = EV_CURRENT;
    ehdr.e_entry = entry;
    ehdr.e_phoff = sizeof(Elf64_Ehdr);
    ehdr.e_ehsize = sizeof(Elf64_Ehdr);
    ehdr.e_phentsize = sizeof(Elf64_Phdr);
    ehdr.e_phnum = phnum;

    std::vector<Elf64_Phdr> phdrs;
    {
        Elf64_Phdr ph{};
        ph.p_type = PT_LOAD;
        ph.p_flags = PF_R | PF_X;
        ph.p_offset = text_off;
        ph.p_vaddr = text_vaddr;
        ph.p_paddr = text_vaddr;
        ph.p_filesz = text.size();
        ph.p_memsz = text.size();
        ph.p_align = page;
        phdrs.push_back(ph);
    }
    if (have_data) {
        Elf64_Phdr ph{};
        ph.p_type = PT_LOAD;
        ph.p_flags = PF_R | PF_W;
        ph.p_offset = data_off;
        ph.p_vaddr = data_vaddr;
        ph.p_paddr = data_vaddr;
        ph.p_filesz = data.size();
        ph.p_memsz = data.size();
        ph.p_align = page;
        phdrs.push_back(ph);
    }

    // optional sections: null, .text, .symtab, .strtab, .shstrtab
    std::vector<uint8_t> symtab_bytes, strtab, shstrtab;
    std::vector<Elf64_Shdr> shdrs;
    uint64_t shoff = 0;
    uint64_t sections_off = have_data ? data_off + data.size() : text_off + text.size();
    if (with_symtab) {
        strtab.push_back(0);
        Elf64_Sym null_sym{};
        put_bytes(symtab_bytes, &null_sym, sizeof(null_sym));
        for (const auto& fn : symbols) {
            Elf64_Sym sym{};
            sym.st_name = static_cast<uint32_t>(strtab.size());
            strtab.insert(strtab.end(), fn.name.begin(), fn.name.end());
            strtab.push_back(0);
            sym.st_info = ELF64_ST_INFO(STB_GLOBAL, STT_FUNC);
            sym.st_shndx = 1; // .text
            sym.st_value = fn.addr;
            sym.st_size = fn.size;
            put_bytes(symtab_bytes, &sym, sizeof(sym));
        }

        const char* names = "\0.text\0.symtab\0.strtab\0.shstrtab\0";
        shstrtab.assign(names, names + 34);

        uint64_t symtab_off = sections_off;
        uint64_t strtab_off = symtab_off + symtab_bytes.size();
        uint64_t shstrtab_off = strtab_off + strtab.size();
        shoff = shstrtab_off + shstrtab.size();

        shdrs.resize(5);
        shdrs[0] = Elf64_Shdr{};
        shdrs[1] = Elf64_Shdr{};
        shdrs[1].sh_name = 1;
        shdrs[1].sh_type = SHT_PROGBITS;
        shdrs[1].sh_flags = SHF_ALLOC | SHF_EXECINSTR;
        shdrs[1].sh_addr = text_vaddr;
        shdrs[1].sh_offset = text_off;
        shdrs[1].sh_size = text.size();
        shdrs[1].sh_addralign = 16;
        shdrs[2] = Elf64_Shdr{};
        shdrs[2].sh_name = 7;
        shdrs[2].sh_type = SHT_SYMTAB;
        shdrs[2].sh_offset = symtab_off;
        shdrs[2].sh_size = symtab_bytes.size();
        shdrs[2].sh_link = 3; // .strtab
        shdrs[2].sh_info = 1; // first global
        shdrs[2].sh_entsize = sizeof(Elf64_Sym);
        shdrs[2].sh_addralign = 8;
        shdrs[3] = Elf64_Shdr{};
        shdrs[3].sh_name = 15;
        shdrs[3].sh_type = SHT_STRTAB;
        shdrs[3].sh_offset = strtab_off;
        shdrs[3].sh_size = strtab.size();
        shdrs[3].sh_addralign = 1;
        shdrs[4] = Elf64_Shdr{};
        shdrs[4].sh_name = 23;
        shdrs[4].sh_type = SHT_STRTAB;
        shdrs[4].sh_offset = shstrtab_off;
        shdrs[4].sh_size = shstrtab.size();
        shdrs[4].sh_addralign = 1;

        ehdr.e_shoff = shoff;
        ehdr.e_shentsize = sizeof(Elf64_Shdr);
        ehdr.e_shnum = 5;
        ehdr.e_shstrndx = 4;
    }

    std::vector<uint8_t> out;
    put_bytes(out, &ehdr, sizeof(ehdr));
    for (const auto& ph : phdrs) put_bytes(out, &ph, sizeof(ph));
    out.resize(text_off, 0);
    put_bytes(out, text.data(), text.size());
    if (have_data) {
        out.resize(data_off, 0);
        put_bytes(out, data.data(), data.size());
    }
    if (with_symtab) {
        out.resize(sections_off, 0);
        put_bytes(out, symtab_bytes.data(), symtab_bytes.size());
        put_bytes(out, strtab.data(), strtab.size());
        put_bytes(out, shstrtab.data(), shstrtab.size());
        for (const auto& sh : shdrs) put_bytes(out, &sh, sizeof(sh));
    }
    return out;
}

namespace {

// corpus1 template bodies; every template ends in a terminator so scans
// cannot run past a function, and the 0x06 inter-function padding is
// undecodable, which keeps each function's gadget set self-contained.
constexpr uint8_t kC1Pad = 0x06;
constexpr size_t kC1PadLen = 16;

struct C1Function {
    const char* name;
    const char* kind;
};

void emit_c1_template(Asm& as, const std::string& kind, const std::string& call_target) {
    if (kind == "plain") {
        as.push_rbp();
        as.mov_rbp_rsp();
        as.pop_rbp();
        as.ret();
    } else if (kind == "loadmem") {
        as.push_rbp();
        as.mov_rbp_rsp();
        as.mov_rax_mem_rdi8();
        as.pop_rbp();
        as.ret();
    } else if (kind == "store") {
        as.push_rbp();
        as.mov_rbp_rsp();
        as.mov_mem_rdi8_rax();
        as.pop_rbp();
        as.ret();
    } else if (kind == "sys") {
        as.mov_rax_imm32(60);
        as.syscall();
        as.ret();
    } else if (kind == "move") {
        as.mov_rax_rbx();
        as.ret();
    } else if (kind == "arith") {
        as.add_rax_rbx();
        as.ret();
    } else if (kind == "jumpg") {
        as.mov_rax_rcx();
        as.jmp_rax();
    } else if (kind == "call") {
        as.push_rbp();
        as.call(call_target);
        as.pop_rbp();
        as.ret();
    } else {
        throw std::logic_error("unknown corpus1 template");
    }
}

} // namespace

Fixture corpus1() {
    const C1Function plan[24] = {
        {"f0", "call"},    {"f1", "plain"},   {"f2", "loadmem"}, {"f3", "sys"},
        {"f4", "store"},   {"f5", "move"},    {"f6", "arith"},   {"f7", "jumpg"},
        {"f8", "call"},    {"f9", "plain"},   {"f10", "loadmem"},{"f11", "sys"},
        {"f12", "call"},   {"f13", "move"},   {"f14", "arith"},  {"f15", "plain"},
        {"f16", "call"},   {"f17", "loadmem"},{"f18", "store"},  {"f19", "plain"},
        {"f20", "move"},   {"f21", "arith"},  {"f22", "jumpg"},  {"f23", "plain"},
    };
    const std::map<std::string, std::string> call_targets = {
        {"f0", "f1"}, {"f8", "f2"}, {"f12", "f10"}, {"f16", "f15"}};

    Asm as(0x401000);
    Fixture fx;
    fx.name = "corpus1";
    std::vector<ElfFunctionSym> syms;
    for (const auto& fn : plan) {
        as.label(fn.name);
        uint64_t start = as.here();
        std::string target;
        if (auto it = call_targets.find(fn.name); it != call_targets.end()) target = it->second;
        emit_c1_template(as, fn.kind, target);
        syms.push_back({fn.name, start, as.here() - start});
        as.pad(kC1PadLen, kC1Pad);
    }

    ElfBuilder eb;
    eb.text = as.finish();
    eb.entry = as.addr_of("f0");
    eb.symbols = syms;
    eb.with_symtab = true;
    fx.elf = eb.build();
    for (const auto& s : syms) fx.labels[s.name] = s.addr;
    return fx;
}

Fixture corpus2() {
    Asm as(0x402000);
    auto pad = [&] { as.pad(8, 0xcc); };

    as.label("g0"); // entry: prologue + five calls
    as.push_rbp();
    as.mov_rbp_rsp();
    as.call("g1");
    as.call("g2");
    as.call("g5");
    as.call("g6");
    as.call("g11");
    as.pop_rbp();
    as.ret();
    pad();

    as.label("g1");
    as.push_rbp();
    as.mov_rbp_rsp();
    as.label("g1_mid"); // cross-jump target inside g1
    as.mov_rax_mem_rdi8();
    as.pop_rbp();
    as.ret();
    pad();

    as.label("g2"); // calls g9, then tail-jumps into g1's interior
    as.push_rbp();
    as.call("g9");
    as.jmp("g1_mid");
    as.pop_rbp();
    as.ret();
    pad();

    as.label("g3");
    as.push_rbp();
    as.mov_rbp_rsp();
    as.mov_mem_rdi8_rax();
    as.pop_rbp();
    as.ret_imm16(8);
    pad();

    as.label("g4");
    as.mov_rax_imm32(60);
    as.syscall();
    as.ret();
    pad();

    as.label("g5");
    as.push_rbp();
    as.mov_rbp_rsp();
    as.call("g4");
    as.call("g8");
    as.pop_rbp();
    as.ret();
    pad();

    as.label("g6");
    as.mov_rax_rbx();
    as.ret();
    pad();

    as.label("g7");
    as.push_rbp();
    as.mov_rbp_rsp();
    as.add_rax_rbx();
    as.pop_rbp();
    as.ret();
    pad();

    as.label("g8");
    as.mov_rax_rcx();
    as.jmp_rax();
    pad();

    as.label("g9");
    as.raw({0x53, 0x5b}); // push rbx; pop rbx
    as.ret();
    pad();

    as.label("g10");
    as.push_rbp();
    as.mov_rbp_rsp();
    as.leave();
    as.ret();
    pad();

    as.label("g11");
    as.push_rbp();
    as.mov_rbp_rsp();
    as.nop();
    as.pop_rbp();
    as.ret();
    pad();

    Fixture fx;
    fx.name = "corpus2";
    ElfBuilder eb;
    eb.text_vaddr = 0x402000;
    eb.entry = 0x402000;
    eb.text = as.finish();
    fx.base = 0x402000;
    fx.elf = eb.build();
    for (const char* n : {"g0", "g1", "g1_mid", "g2", "g3", "g4", "g5", "g6", "g7", "g8",
                          "g9", "g10", "g11"})
        fx.labels[n] = as.addr_of(n);
    return fx;
}

Fixture corpus3() {
    Asm as(0x403000);
    std::mt19937_64 rng(0xC0FFEE);
    const int kFunctions = 40;

    std::vector<uint64_t> starts;
    std::vector<uint64_t> ends;

    for (int i = 0; i < kFunctions; ++i) {
        std::string name = "h" + std::to_string(i);
        as.label(name);
        starts.push_back(as.here());

        switch (rng() % 6) {
        case 0:
            as.push_rbp();
            as.mov_rbp_rsp();
            as.pop_rbp();
            as.ret();
            break;
        case 1:
            as.push_rbp();
            as.mov_rbp_rsp();
            as.mov_rax_mem_rdi8();
            as.pop_rbp();
            as.ret();
            break;
        case 2:
            // a ret byte hidden in the immediate: b8 00 c3 00 00
            as.mov_eax_imm32(0x0000c300);
            as.mov_rax_rbx();
            as.ret();
            break;
        case 3:
            as.mov_rax_imm32(static_cast<uint32_t>(rng() % 256));
            as.syscall();
            as.ret();
            break;
        case 4:
            as.push_rbp();
            as.mov_rbp_rsp();
            as.mov_mem_rdi8_rax();
            as.leave();
            as.ret_imm16(static_cast<uint16_t>(8 * (rng() % 3)));
            break;
        default:
            as.mov_rax_rcx();
            as.jmp_rax();
            break;
        }
        // calls to already-emitted functions keep the walk graph connected
        if (i > 0 && rng() % 5 < 2) {
            // body continues: call an earlier function then return
            as.call("h" + std::to_string(rng() % i));
            as.ret();
        }
        ends.push_back(as.here());
        as.pad(4 + rng() % 9, rng() % 2 ? 0x90 : 0xcc);
    }

    // three calls into interiors (offset 1 of earlier bodies) to force the
    // splitting rule; emitted as one extra routine at the end
    as.label("h_tail");
    starts.push_back(as.here());
    for (int k = 0; k < 3; ++k) {
        // call victim_start+1: land inside, not at the start
        uint64_t victim_start = starts[5 + 7 * k];
        as.raw({0xe8});
        int64_t rel = static_cast<int64_t>(victim_start + 1) -
                      static_cast<int64_t>(as.here() + 4);
        as.le32(static_cast<uint32_t>(static_cast<int32_t>(rel)));
    }
    as.ret();
    ends.push_back(as.here());

    Fixture fx;
    fx.name = "corpus3";
    ElfBuilder eb;
    eb.text_vaddr = 0x403000;
    eb.entry = starts[0];
    eb.text = as.finish();
    fx.base = 0x403000;
    fx.elf = eb.build();

    std::string seeds_text;
    char line[96];
    for (int i = 0; i <= kFunctions; ++i) {
        std::string name = i < kFunctions ? "h" + std::to_string(i) : "h_tail";
        std::snprintf(line, sizeof line, "%llx %llx %s\n",
                      static_cast<unsigned long long>(starts[i]),
                      static_cast<unsigned long long>(ends[i]), name.c_str());
        seeds_text += line;
        fx.labels[name] = starts[i];
    }
    fx.seeds_text = seeds_text;
    return fx;
}

Fixture run8() {
    Asm as(0x401000);
    const uint64_t msg = 0x404000;
    // message bytes, one char per function: H A B C a D E F
    enum { H = 0, A = 1, B = 2, C = 3, a = 4, D = 5, E = 6, F = 7 };

    as.label("_start");
    as.call("f_hello");
    as.call("f_a");
    as.call("f_d");
    as.call("f_a");
    as.call("f_f");
    as.exit_with(42);
    as.pad(8, 0xcc);

    as.label("f_hello");
    as.write_char(msg + H);
    as.ret();
    as.pad(8, 0xcc);

    as.label("f_a");
    as.write_char(msg + A);
    as.call("f_b");
    as.write_char(msg + a);
    as.ret();
    as.pad(8, 0xcc);

    as.label("f_b");
    as.write_char(msg + B);
    as.call("f_c");
    as.ret();
    as.pad(8, 0xcc);

    as.label("f_c");
    as.write_char(msg + C);
    as.ret();
    as.pad(8, 0xcc);

    as.label("f_d");
    as.write_char(msg + D);
    as.ret();
    as.pad(8, 0xcc);

    as.label("f_e"); // never called
    as.write_char(msg + E);
    as.ret();
    as.pad(8, 0xcc);

    as.label("f_f");
    as.write_char(msg + F);
    as.ret();

    Fixture fx;
    fx.name = "run8";
    ElfBuilder eb;
    eb.text = as.finish();
    eb.entry = as.addr_of("_start");
    eb.data = {'H', 'A', 'B', 'C', 'a', 'D', 'E', 'F'};
    eb.with_symtab = true;
    for (const char* n : {"_start", "f_hello", "f_a", "f_b", "f_c", "f_d", "f_e", "f_f"})
        fx.labels[n] = as.addr_of(n);
    // sizes: to the next label or text end
    {
        std::vector<std::pair<uint64_t, std::string>> sorted;
        for (const auto& [name, addr] : fx.labels) sorted.emplace_back(addr, name);
        std::sort(sorted.begin(), sorted.end());
        for (size_t i = 0; i < sorted.size(); ++i) {
            uint64_t end = i + 1 < sorted.size() ? sorted[i + 1].first
                                                 : 0x401000 + eb.text.size();
            eb.symbols.push_back({sorted[i].second, sorted[i].first, end - sorted[i].first});
        }
    }
    fx.elf = eb.build();
    return fx;
}

Fixture overflow() {
    Asm as(0x401000);
    as.label("_start");
    as.call("f_vuln");
    as.exit_with(0);
    as.pad(8, 0xcc);

    as.label("f_vuln"); // simulated stack smash: forge the return address
    as.push_imm32(0); // patched below: f_victim + 2
    as.ret();
    as.pad(8, 0xcc);

    as.label("f_victim"); // never called legitimately
    as.push_rbp();
    as.mov_rbp_rsp();
    as.pop_rbp();
    as.ret();

    std::vector<uint8_t> text = as.finish();
    // patch the push immediate with the mid-function target
    uint64_t target = as.addr_of("f_victim") + 2;
    uint64_t push_off = as.addr_of("f_vuln") - 0x401000 + 1;
    for (int i = 0; i < 4; ++i)
        text[push_off + i] = static_cast<uint8_t>(target >> (8 * i));

    Fixture fx;
    fx.name = "overflow";
    ElfBuilder eb;
    eb.text = std::move(text);
    eb.entry = as.addr_of("_start");
    eb.with_symtab = true;
    {
        std::vector<std::pair<uint64_t, std::string>> sorted;
        for (const char* n : {"_start", "f_vuln", "f_victim"})
            sorted.emplace_back(as.addr_of(n), n);
        std::sort(sorted.begin(), sorted.end());
        for (size_t i = 0; i < sorted.size(); ++i) {
            uint64_t end = i + 1 < sorted.size() ? sorted[i + 1].first
                                                 : 0x401000 + eb.text.size();
            eb.symbols.push_back({sorted[i].second, sorted[i].first, end - sorted[i].first});
        }
        for (const auto& [addr, name] : sorted) fx.labels[name] = addr;
    }
    fx.elf = eb.build();
    return fx;
}

Fixture mini4k() {
    Asm as(0x401000);
    as.label("_start");
    as.push_rbp();
    as.mov_rbp_rsp();
    as.pop_rbp();
    as.ret();
    as.pad(4096 - 6, 0x90);

    Fixture fx;
    fx.name = "mini4k";
    ElfBuilder eb;
    eb.text = as.finish();
    eb.entry = 0x401000;
    fx.labels["_start"] = 0x401000;
    fx.elf = eb.build();
    return fx;
}

void write_file(const std::string& path, const std::vector<uint8_t>& bytes, bool executable) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + path);
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    out.close();
    if (executable) ::chmod(path.c_str(), 0755);
}

std::string write_corpus(const std::string& dir) {
    ::mkdir(dir.c_str(), 0755);
    for (const auto& fx : {corpus1(), corpus2(), corpus3(), run8(), overflow(), mini4k()}) {
        write_file(dir + "/" + fx.name, fx.elf, true);
        if (!fx.seeds_text.empty()) {
            std::ofstream seeds(dir + "/" + fx.name + ".seeds");
            seeds << fx.seeds_text;
        }
    }
    return dir;
}

} // namespace fixtures
