#include "loadlord/image.hpp"

#include <algorithm>
#include <cstring>
#include <elf.h>
#include <fstream>

#include "loadlord/errors.hpp"

namespace loadlord {

namespace {

template <typename T>
T read_struct(std::span<const uint8_t> bytes, uint64_t offset, const char* what) {
    if (offset > bytes.size() || bytes.size() - offset < sizeof(T))
        throw MalformedImage(std::string("truncated ") + what);
    T out;
    std::memcpy(&out, bytes.data() + offset, sizeof(T));
    return out;
}

SegmentPerms perms_from_flags(uint32_t p_flags) {
    SegmentPerms p;
    p.read = p_flags & PF_R;
    p.write = p_flags & PF_W;
    p.execute = p_flags & PF_X;
    return p;
}

// Function symbols are optional seeds; a damaged section table is ignored
// rather than failing an otherwise loadable binary.
std::vector<SymbolSeed> collect_function_symbols(std::span<const uint8_t> bytes,
                                                 const Elf64_Ehdr& ehdr,
                                                 const LoadableImage& image) {
    std::vector<SymbolSeed> out;
    if (ehdr.e_shoff == 0 || ehdr.e_shnum == 0) return out;
    if (ehdr.e_shentsize != sizeof(Elf64_Shdr)) return out;
    if (ehdr.e_shoff + uint64_t(ehdr.e_shnum) * sizeof(Elf64_Shdr) > bytes.size()) return out;

    std::vector<Elf64_Shdr> shdrs(ehdr.e_shnum);
    std::memcpy(shdrs.data(), bytes.data() + ehdr.e_shoff, shdrs.size() * sizeof(Elf64_Shdr));

    auto read_symbols = [&](const Elf64_Shdr& sh) {
        if (sh.sh_entsize != sizeof(Elf64_Sym) || sh.sh_link >= shdrs.size()) return;
        if (sh.sh_offset + sh.sh_size > bytes.size()) return;
        const Elf64_Shdr& str = shdrs[sh.sh_link];
        if (str.sh_offset + str.sh_size > bytes.size()) return;
        const char* strtab = reinterpret_cast<const char*>(bytes.data() + str.sh_offset);
        size_t count = sh.sh_size / sizeof(Elf64_Sym);
        for (size_t i = 0; i < count; ++i) {
            Elf64_Sym sym;
            std::memcpy(&sym, bytes.data() + sh.sh_offset + i * sizeof(Elf64_Sym), sizeof(sym));
            if (ELF64_ST_TYPE(sym.st_info) != STT_FUNC || sym.st_value == 0) continue;
            const Segment* seg = image.segment_containing(sym.st_value);
            if (!seg || !seg->perms.execute) continue;
            SymbolSeed seed;
            seed.addr = sym.st_value;
            seed.size = sym.st_size;
            if (sym.st_name < str.sh_size)
                seed.name = std::string(strtab + sym.st_name);
            out.push_back(std::move(seed));
        }
    };

    for (const auto& sh : shdrs)
        if (sh.sh_type == SHT_SYMTAB) read_symbols(sh);
    if (out.empty())
        for (const auto& sh : shdrs)
            if (sh.sh_type == SHT_DYNSYM) read_symbols(sh);

    std::sort(out.begin(), out.end(),
              [](const SymbolSeed& a, const SymbolSeed& b) { return a.addr < b.addr; });
    out.erase(std::unique(out.begin(), out.end(),
                          [](const SymbolSeed& a, const SymbolSeed& b) { return a.addr == b.addr; }),
              out.end());
    return out;
}

} // namespace

const Segment* LoadableImage::segment_containing(uint64_t vaddr) const {
    for (const auto& seg : segments)
        if (seg.contains(vaddr)) return &seg;
    return nullptr;
}

bool LoadableImage::has_executable_segment() const {
    return std::any_of(segments.begin(), segments.end(),
                       [](const Segment& s) { return s.perms.execute; });
}

LoadableImage parse_image(std::span<const uint8_t> file_bytes) {
    if (file_bytes.size() < EI_NIDENT || std::memcmp(file_bytes.data(), ELFMAG, SELFMAG) != 0)
        throw MalformedImage("not an ELF file");
    const auto ehdr = read_struct<Elf64_Ehdr>(file_bytes, 0, "ELF header");

    if (ehdr.e_ident[EI_CLASS] != ELFCLASS64)
        throw UnsupportedMachine("only 64-bit images are supported");
    if (ehdr.e_ident[EI_DATA] != ELFDATA2LSB)
        throw MalformedImage("big-endian images are not supported");
    if (ehdr.e_machine != EM_X86_64)
        throw UnsupportedMachine("only x86-64 images are supported");
    if (ehdr.e_type != ET_EXEC && ehdr.e_type != ET_DYN)
        throw MalformedImage("not an executable image");
    if (ehdr.e_phentsize != sizeof(Elf64_Phdr))
        throw MalformedImage("bad program header entry size");
    if (ehdr.e_phnum == 0)
        throw MalformedImage("no program headers");
    if (ehdr.e_phoff + uint64_t(ehdr.e_phnum) * sizeof(Elf64_Phdr) > file_bytes.size())
        throw MalformedImage("truncated program header table");

    LoadableImage image;
    image.entry = ehdr.e_entry;
    image.position_independent = ehdr.e_type == ET_DYN;

    for (uint16_t i = 0; i < ehdr.e_phnum; ++i) {
        const auto ph = read_struct<Elf64_Phdr>(file_bytes, ehdr.e_phoff + i * sizeof(Elf64_Phdr),
                                                "program header");
        if (ph.p_type != PT_LOAD) continue;
        if (ph.p_filesz > ph.p_memsz)
            throw MalformedImage("segment file size exceeds memory size");
        if (ph.p_offset > file_bytes.size() || ph.p_filesz > file_bytes.size() - ph.p_offset)
            throw MalformedImage("segment data lies outside the file");

        Segment seg;
        seg.file_offset = ph.p_offset;
        seg.vaddr = ph.p_vaddr;
        seg.mem_size = ph.p_memsz;
        seg.file_size = ph.p_filesz;
        seg.perms = perms_from_flags(ph.p_flags);
        if (seg.perms.write && seg.perms.execute)
            throw MalformedImage("segment is both writable and executable");
        seg.bytes.assign(file_bytes.begin() + ph.p_offset,
                         file_bytes.begin() + ph.p_offset + ph.p_filesz);
        if (seg.mem_size > 0) image.segments.push_back(std::move(seg));
    }

    std::sort(image.segments.begin(), image.segments.end(),
              [](const Segment& a, const Segment& b) { return a.vaddr < b.vaddr; });
    for (size_t i = 1; i < image.segments.size(); ++i)
        if (image.segments[i].vaddr < image.segments[i - 1].mem_end())
            throw MalformedImage("overlapping segments");

    if (!image.has_executable_segment())
        throw NoExecutableSegment("image has no executable segment");
    const Segment* entry_seg = image.segment_containing(image.entry);
    if (!entry_seg || !entry_seg->perms.execute)
        throw MalformedImage("entry point lies outside executable segments");

    image.function_symbols = collect_function_symbols(file_bytes, ehdr, image);
    return image;
}

LoadableImage parse_image_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw MalformedImage("cannot open " + path);
    std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                               std::istreambuf_iterator<char>());
    return parse_image(bytes);
}

std::vector<uint8_t> bytes_at(const LoadableImage& image, uint64_t vaddr, uint64_t len) {
    const Segment* seg = image.segment_containing(vaddr);
    if (!seg || (len > 0 && vaddr + len > seg->mem_end()))
        throw OutOfRange("read outside any segment");
    std::vector<uint8_t> out(len, 0);
    uint64_t off = vaddr - seg->vaddr;
    if (off < seg->file_size) {
        uint64_t n = std::min<uint64_t>(len, seg->file_size - off);
        std::copy_n(seg->bytes.begin() + off, n, out.begin());
    }
    return out;
}

} // namespace loadlord
