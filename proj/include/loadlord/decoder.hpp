#ifndef LOADLORD_DECODER_HPP
#define LOADLORD_DECODER_HPP

#include <span>
#include <vector>

#include "loadlord/image.hpp"
#include "loadlord/insn.hpp"

namespace loadlord {

// Decode one instruction at `vaddr` from `bytes` (bytes[0] is the first
// byte of the instruction). Total: bytes outside the supported x86-64
// subset come back as length-1 records with decoded = false. Never reads
// past bytes.size() and never returns length 0.
InstructionRecord decode_one(std::span<const uint8_t> bytes, uint64_t vaddr);

// Linear-sweep decode of one byte region.
std::vector<InstructionRecord> decode_region(std::span<const uint8_t> bytes, uint64_t vaddr);

// Linear-sweep decode of every executable segment (zero-fill tails
// included), sorted by address.
std::vector<InstructionRecord> decode_stream(const LoadableImage& image);

} // namespace loadlord

#endif
