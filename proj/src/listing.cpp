#include "loadlord/listing.hpp"

#include <algorithm>
#include <cctype>
#include <map>
#include <optional>
#include <sstream>

#include "loadlord/errors.hpp"

namespace loadlord {

namespace {

bool is_hex_pair(const std::string& tok) {
    return tok.size() == 2 && std::isxdigit(static_cast<unsigned char>(tok[0])) &&
           std::isxdigit(static_cast<unsigned char>(tok[1]));
}

std::optional<int> register_id(std::string name) {
    static const std::map<std::string, int> table = [] {
        std::map<std::string, int> t;
        const char* r64[] = {"rax", "rcx", "rdx", "rbx", "rsp", "rbp", "rsi", "rdi"};
        const char* r32[] = {"eax", "ecx", "edx", "ebx", "esp", "ebp", "esi", "edi"};
        const char* r16[] = {"ax", "cx", "dx", "bx", "sp", "bp", "si", "di"};
        const char* r8[] = {"al", "cl", "dl", "bl", "spl", "bpl", "sil", "dil"};
        for (int i = 0; i < 8; ++i) {
            t[r64[i]] = i;
            t[r32[i]] = i;
            t[r16[i]] = i;
            t[r8[i]] = i;
        }
        for (int i = 8; i < 16; ++i) {
            std::string base = "r" + std::to_string(i);
            t[base] = i;
            t[base + "d"] = i;
            t[base + "w"] = i;
            t[base + "b"] = i;
        }
        t["rip"] = kRegRip;
        return t;
    }();
    std::transform(name.begin(), name.end(), name.begin(),
                   [](unsigned char c) { return std::tolower(c); });
    auto it = table.find(name);
    if (it == table.end()) return std::nullopt;
    return it->second;
}

std::optional<int64_t> parse_number(const std::string& tok) {
    if (tok.empty()) return std::nullopt;
    size_t pos = 0;
    bool neg = tok[0] == '-';
    if (neg) pos = 1;
    int base = 10;
    if (tok.compare(pos, 2, "0x") == 0 || tok.compare(pos, 2, "0X") == 0) {
        base = 16;
        pos += 2;
    }
    if (pos >= tok.size()) return std::nullopt;
    int64_t value = 0;
    for (; pos < tok.size(); ++pos) {
        int digit;
        char c = static_cast<char>(std::tolower(static_cast<unsigned char>(tok[pos])));
        if (c >= '0' && c <= '9') digit = c - '0';
        else if (base == 16 && c >= 'a' && c <= 'f') digit = c - 'a' + 10;
        else return std::nullopt;
        value = value * base + digit;
    }
    return neg ? -value : value;
}

std::string trim(const std::string& s) {
    size_t b = s.find_first_not_of(" \t");
    if (b == std::string::npos) return "";
    size_t e = s.find_last_not_of(" \t");
    return s.substr(b, e - b + 1);
}

// `rax` | `[rbp-8]` | `[rip+0x10]` | `0x1000` | `12`
Operand parse_operand(const std::string& raw) {
    std::string tok = trim(raw);
    if (tok.empty()) return {};
    if (tok.front() == '[') {
        if (tok.back() != ']') return {};
        std::string inner = tok.substr(1, tok.size() - 2);
        // base register first, then an optional +/- displacement; scaled
        // index expressions keep only the base
        size_t cut = inner.find_first_of("+-");
        std::string head = trim(cut == std::string::npos ? inner : inner.substr(0, cut));
        int base = kRegNone;
        int64_t disp = 0;
        if (auto reg = register_id(head); reg && head.find('*') == std::string::npos)
            base = *reg;
        if (cut != std::string::npos) {
            std::string rest = trim(inner.substr(cut));
            // drop a scaled-index term if present: [rax+rbx*2+8]
            if (!rest.empty() && rest.find('*') != std::string::npos) {
                size_t next = rest.find_first_of("+-", 1);
                rest = next == std::string::npos ? "" : trim(rest.substr(next));
            }
            if (!rest.empty()) {
                bool neg = rest[0] == '-';
                if (auto num = parse_number(trim(rest.substr(1))))
                    disp = neg ? -*num : *num;
            }
        }
        return Operand::make_mem(base, disp);
    }
    if (auto reg = register_id(tok)) return Operand::make_reg(*reg);
    if (auto num = parse_number(tok)) return Operand::make_imm(*num);
    return {};
}

bool is_jcc(const std::string& m) {
    static const char* names[] = {
        "ja", "jae", "jb", "jbe", "jc", "jnc", "je", "jne", "jz", "jnz",
        "jg", "jge", "jl", "jle", "jo", "jno", "js", "jns", "jp", "jnp",
        "jcxz", "jecxz", "jrcxz",
    };
    for (const char* n : names)
        if (m == n) return true;
    return false;
}

bool is_prefix_token(const std::string& m) {
    return m == "rep" || m == "repz" || m == "repe" || m == "repnz" || m == "repne" ||
           m == "lock" || m == "bnd" || m == "notrack";
}

} // namespace

std::vector<InstructionRecord> ingest_listing(const std::string& text) {
    std::vector<InstructionRecord> out;
    std::istringstream lines(text);
    std::string line;
    size_t line_no = 0;
    while (std::getline(lines, line)) {
        ++line_no;
        std::string stripped = trim(line);
        if (stripped.empty() || stripped[0] == '#') continue;

        size_t colon = stripped.find(':');
        if (colon == std::string::npos)
            throw ParseError(line_no, "expected `hex_vaddr: hex_bytes  mnemonic`");
        std::string addr_tok = trim(stripped.substr(0, colon));
        if (addr_tok.compare(0, 2, "0x") == 0) addr_tok = addr_tok.substr(2);
        uint64_t vaddr = 0;
        if (addr_tok.empty()) throw ParseError(line_no, "missing address");
        for (char c : addr_tok) {
            if (!std::isxdigit(static_cast<unsigned char>(c)))
                throw ParseError(line_no, "bad address digit");
            vaddr = vaddr * 16 + (std::isdigit(static_cast<unsigned char>(c))
                                      ? c - '0'
                                      : std::tolower(static_cast<unsigned char>(c)) - 'a' + 10);
        }

        std::istringstream rest(stripped.substr(colon + 1));
        std::string tok;
        size_t byte_count = 0;
        std::string mnemonic;
        while (rest >> tok) {
            if (mnemonic.empty() && is_hex_pair(tok)) {
                ++byte_count;
                continue;
            }
            std::transform(tok.begin(), tok.end(), tok.begin(),
                           [](unsigned char c) { return std::tolower(c); });
            if (mnemonic.empty() && is_prefix_token(tok)) continue;
            if (mnemonic.empty()) {
                mnemonic = tok;
                break;
            }
        }
        if (byte_count == 0) throw ParseError(line_no, "missing instruction bytes");
        if (byte_count > 255) throw ParseError(line_no, "implausible instruction length");
        if (mnemonic.empty()) throw ParseError(line_no, "missing mnemonic");

        std::string operand_text;
        std::getline(rest, operand_text);
        // drop `<symbol>` annotations disassemblers append to branch targets
        if (size_t lt = operand_text.find('<'); lt != std::string::npos)
            operand_text = operand_text.substr(0, lt);
        operand_text = trim(operand_text);

        std::vector<Operand> operands;
        if (!operand_text.empty()) {
            std::istringstream ops(operand_text);
            std::string piece;
            while (std::getline(ops, piece, ',')) operands.push_back(parse_operand(piece));
        }

        InstructionRecord insn;
        insn.vaddr = vaddr;
        insn.length = static_cast<uint8_t>(byte_count);
        insn.decoded = true;
        insn.op_class = OpClass::other;
        insn.mnemonic = Mnemonic::other;
        auto dst = [&]() -> Operand { return operands.empty() ? Operand{} : operands[0]; };
        auto src = [&]() -> Operand { return operands.size() < 2 ? Operand{} : operands[1]; };

        // documented mnemonic -> class table
        if (mnemonic == "add" || mnemonic == "sub" || mnemonic == "and" ||
            mnemonic == "or" || mnemonic == "xor") {
            insn.op_class = OpClass::arith;
            insn.mnemonic = mnemonic == "add"   ? Mnemonic::add
                            : mnemonic == "sub" ? Mnemonic::sub
                            : mnemonic == "and" ? Mnemonic::and_
                            : mnemonic == "or"  ? Mnemonic::or_
                                                : Mnemonic::xor_;
            insn.dst = dst();
            insn.src = src();
        } else if (mnemonic == "mov" || mnemonic == "movq" || mnemonic == "movl" ||
                   mnemonic == "movw" || mnemonic == "movb") {
            insn.mnemonic = Mnemonic::mov;
            insn.dst = dst();
            insn.src = src();
            if (insn.dst.kind == Operand::Kind::mem) insn.op_class = OpClass::store_mem;
            else if (insn.src.kind == Operand::Kind::mem) insn.op_class = OpClass::load_mem;
            else insn.op_class = OpClass::move_reg;
        } else if (mnemonic == "pop") {
            insn.op_class = OpClass::pop;
            insn.mnemonic = Mnemonic::pop;
            insn.dst = dst();
            insn.src = Operand::make_mem(kRegRsp, 0);
        } else if (mnemonic == "push") {
            insn.op_class = OpClass::push;
            insn.mnemonic = Mnemonic::push;
            insn.src = dst();
        } else if (mnemonic == "ret" || mnemonic == "retq" || mnemonic == "retn") {
            insn.op_class = OpClass::ret;
            insn.mnemonic = Mnemonic::ret;
        } else if (mnemonic == "syscall") {
            insn.op_class = OpClass::syscall_op;
            insn.mnemonic = Mnemonic::syscall_insn;
        } else if (mnemonic == "leave") {
            insn.op_class = OpClass::load_mem;
            insn.mnemonic = Mnemonic::leave;
            insn.dst = Operand::make_reg(kRegRbp);
            insn.src = Operand::make_mem(kRegRsp, 0);
        } else if (mnemonic == "call") {
            insn.mnemonic = Mnemonic::call;
            Operand target = dst();
            if (target.kind == Operand::Kind::imm) {
                insn.op_class = OpClass::call_dir;
                insn.has_branch_target = true;
                insn.branch_target = static_cast<uint64_t>(target.value);
            } else {
                insn.op_class = OpClass::call_ind;
                insn.src = target;
            }
        } else if (mnemonic == "jmp" || is_jcc(mnemonic)) {
            insn.mnemonic = mnemonic == "jmp" ? Mnemonic::jmp : Mnemonic::jcc;
            Operand target = dst();
            if (target.kind == Operand::Kind::imm) {
                insn.op_class = OpClass::jmp_dir;
                insn.has_branch_target = true;
                insn.branch_target = static_cast<uint64_t>(target.value);
            } else if (insn.mnemonic == Mnemonic::jmp) {
                insn.op_class = OpClass::jmp_ind;
                insn.src = target;
            } else {
                insn.op_class = OpClass::jmp_dir; // jcc through register: keep direct class, no target
            }
        } else if (mnemonic == "nop" || mnemonic == "endbr64") {
            insn.mnemonic = Mnemonic::nop;
        }
        // anything else stays a decoded `other`

        out.push_back(insn);
    }
    std::sort(out.begin(), out.end(),
              [](const InstructionRecord& a, const InstructionRecord& b) {
                  return a.vaddr < b.vaddr;
              });
    return out;
}

} // namespace loadlord
