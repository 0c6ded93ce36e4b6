#ifndef LOADLORD_IMAGE_HPP
#define LOADLORD_IMAGE_HPP

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace loadlord {

struct SegmentPerms {
    bool read = false;
    bool write = false;
    bool execute = false;
};

// One loadable segment. `bytes` holds the file-backed content (file_size
// bytes); the mem_size tail past file_size is implicitly zero.
struct Segment {
    uint64_t file_offset = 0;
    uint64_t vaddr = 0;
    uint64_t mem_size = 0;
    uint64_t file_size = 0;
    SegmentPerms perms;
    std::vector<uint8_t> bytes;

    bool contains(uint64_t addr) const {
        return addr >= vaddr && addr - vaddr < mem_size;
    }
    uint64_t mem_end() const { return vaddr + mem_size; }
};

// Function symbol carried along as an optional boundary seed.
struct SymbolSeed {
    uint64_t addr = 0;
    uint64_t size = 0;
    std::string name;
};

// Parsed executable: segment table, entry point, and the read-only code
// bytes that back the PrepareArea.
struct LoadableImage {
    std::vector<Segment> segments; // sorted by vaddr, non-overlapping
    uint64_t entry = 0;
    std::string machine = "x86-64";
    bool position_independent = false; // ET_DYN; analyzed at stated vaddrs
    std::vector<SymbolSeed> function_symbols; // may be empty

    const Segment* segment_containing(uint64_t vaddr) const;
    bool has_executable_segment() const;
};

// Parse a 64-bit little-endian x86-64 ELF executable (ET_EXEC or ET_DYN).
// Throws MalformedImage, UnsupportedMachine, NoExecutableSegment.
LoadableImage parse_image(std::span<const uint8_t> file_bytes);
LoadableImage parse_image_file(const std::string& path);

// File-backed bytes at [vaddr, vaddr+len); the mem_size > file_size tail
// reads as zeros. The whole range must lie inside one segment, else
// OutOfRange.
std::vector<uint8_t> bytes_at(const LoadableImage& image, uint64_t vaddr, uint64_t len);

} // namespace loadlord

#endif
