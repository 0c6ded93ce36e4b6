#ifndef LOADLORD_LISTING_HPP
#define LOADLORD_LISTING_HPP

#include <string>
#include <vector>

#include "loadlord/insn.hpp"

namespace loadlord {

// Ingest an external disassembly listing, one instruction per line:
//
//   hex_vaddr: hex_bytes  mnemonic [operands]
//
// e.g. `1000: 48 8b 47 08  mov rax, [rdi+8]`. Blank lines and lines
// starting with '#' are skipped. Mnemonics are mapped to op classes via a
// fixed table (see listing.cpp); unknown mnemonics become decoded `other`
// records, which keeps an external full-ISA disassembler usable as a
// drop-in replacement for the built-in decoder.
//
// Throws ParseError with the offending line number.
std::vector<InstructionRecord> ingest_listing(const std::string& text);

} // namespace loadlord

#endif
