#ifndef LOADLORD_GADGET_HPP
#define LOADLORD_GADGET_HPP

#include <array>
#include <cstdint>
#include <optional>
#include <vector>

#include "loadlord/function_map.hpp"
#include "loadlord/image.hpp"
#include "loadlord/insn.hpp"

namespace loadlord {

// The six functional gadget categories.
enum class GadgetClass : uint8_t {
    ArithmeticG = 0,
    LoadMemG = 1,
    StoreMemG = 2,
    MoveRegG = 3,
    SYSG = 4,
    JumpG = 5,
};
inline constexpr size_t kGadgetClassCount = 6;
const char* gadget_class_name(GadgetClass c);

// Small fixed bitmask over GadgetClass.
struct GadgetClassSet {
    uint8_t bits = 0;
    void add(GadgetClass c) { bits = static_cast<uint8_t>(bits | (1u << static_cast<int>(c))); }
    bool has(GadgetClass c) const { return bits & (1u << static_cast<int>(c)); }
    bool empty() const { return bits == 0; }
    bool operator==(const GadgetClassSet&) const = default;
};

enum class TerminatorKind : uint8_t { ret, jmp_ind, call_ind, syscall_term };
const char* terminator_name(TerminatorKind t);

struct Gadget {
    uint64_t start = 0;
    std::vector<InstructionRecord> instrs; // last one is the terminator
    TerminatorKind terminator = TerminatorKind::ret;
    GadgetClassSet classes;
    std::optional<uint32_t> owner; // function id, filled by build_gadget_index

    uint64_t end() const { return instrs.empty() ? start : instrs.back().end(); }
};

inline constexpr int kDefaultMaxGadgetLen = 5;
// Max bytes tried per instruction slot when scanning backwards from a
// terminator (one slot more than the architectural 15-byte limit).
inline constexpr int kScanBytesPerSlot = 16;

// Find every gadget of at most max_len instructions ending in a ret /
// ret imm16 / indirect jmp / indirect call / syscall, at every byte
// offset of every executable segment (unintended instruction boundaries
// included). A candidate run is valid only if each instruction decodes,
// none but the last transfers control, and it ends exactly at the
// terminator. Results are classified, sorted by start address, one per
// (start, terminator) pair.
std::vector<Gadget> scan_gadgets(const LoadableImage& image,
                                 int max_len = kDefaultMaxGadgetLen);

// Classify per the functional categories: ArithmeticG (arith writing a
// register), LoadMemG (pop reg, mov reg <- [reg+off], add/sub reg <-
// [reg+off], leave), StoreMemG ([reg+off] <- reg), MoveRegG (reg <- reg
// or reg <- imm), SYSG (syscall terminator), JumpG (indirect jmp/call
// terminator).
GadgetClassSet classify_gadget(const Gadget& g);

struct ClassCounts {
    std::array<uint32_t, kGadgetClassCount> per_class{};
    uint32_t total = 0; // number of gadgets (each counted once)

    void add(const GadgetClassSet& s) {
        for (size_t i = 0; i < kGadgetClassCount; ++i)
            if (s.bits & (1u << i)) ++per_class[i];
        ++total;
    }
    void add_counts(const ClassCounts& o) {
        for (size_t i = 0; i < kGadgetClassCount; ++i) per_class[i] += o.per_class[i];
        total += o.total;
    }
    uint32_t operator[](GadgetClass c) const { return per_class[static_cast<int>(c)]; }
    bool operator==(const ClassCounts&) const = default;
};

// Gadgets attributed to the function containing their start address.
struct GadgetIndex {
    std::vector<std::vector<Gadget>> by_function; // indexed by function id
    std::vector<ClassCounts> class_counts;        // indexed by function id
    std::vector<Gadget> unattributed;             // starts outside every function
    ClassCounts unattributed_counts;
    ClassCounts totals; // whole image: attributed + unattributed

    size_t function_count() const { return by_function.size(); }
};

GadgetIndex build_gadget_index(std::vector<Gadget> gadgets, const FunctionMap& map);

} // namespace loadlord

#endif
