#include "doctest.h"

#include "fixtures.hpp"
#include "loadlord/errors.hpp"
#include "loadlord/image.hpp"

using namespace loadlord;

namespace {

std::vector<uint8_t> patched(std::vector<uint8_t> bytes, size_t off, uint8_t value) {
    bytes.at(off) = value;
    return bytes;
}

} // namespace

TEST_CASE("parse_image: minimal one-RX-segment executable") {
    fixtures::Fixture fx = fixtures::mini4k();
    LoadableImage image = parse_image(fx.elf);

    REQUIRE(image.segments.size() == 1);
    const Segment& seg = image.segments[0];
    CHECK(seg.vaddr == 0x401000);
    CHECK(seg.file_size == 4096);
    CHECK(seg.mem_size == 4096);
    CHECK(seg.perms.read);
    CHECK(seg.perms.execute);
    CHECK_FALSE(seg.perms.write);
    CHECK(image.entry == 0x401000);
    CHECK(image.machine == "x86-64");
    CHECK(image.segment_containing(image.entry) == &seg);
    CHECK_FALSE(image.position_independent);
}

TEST_CASE("parse_image: degenerate and malformed inputs") {
    fixtures::Fixture fx = fixtures::mini4k();

    CHECK_THROWS_AS(parse_image(std::span<const uint8_t>{}), MalformedImage);

    std::vector<uint8_t> bad_magic = patched(fx.elf, 0, 0x7e);
    CHECK_THROWS_AS(parse_image(bad_magic), MalformedImage);

    // EI_CLASS -> 32-bit
    CHECK_THROWS_AS(parse_image(patched(fx.elf, 4, 1)), UnsupportedMachine);

    // e_machine -> aarch64
    CHECK_THROWS_AS(parse_image(patched(fx.elf, 18, 183)), UnsupportedMachine);

    // truncated file
    std::vector<uint8_t> cut(fx.elf.begin(), fx.elf.begin() + fx.elf.size() / 2);
    CHECK_THROWS_AS(parse_image(cut), MalformedImage);

    // p_flags of the only segment -> RW: no executable segment left
    size_t flags_off = 64 + 4; // e_phoff + offsetof(p_flags)
    CHECK_THROWS_AS(parse_image(patched(fx.elf, flags_off, 6)), NoExecutableSegment);

    // p_flags -> RWX violates the W^X threat model
    CHECK_THROWS_AS(parse_image(patched(fx.elf, flags_off, 7)), MalformedImage);

    // entry outside every segment
    std::vector<uint8_t> bad_entry = fx.elf;
    bad_entry[24] = 0x00;
    bad_entry[25] = 0x40;
    bad_entry[26] = 0x40; // e_entry = 0x404000
    CHECK_THROWS_AS(parse_image(bad_entry), MalformedImage);
}

TEST_CASE("bytes_at: content, zero-fill tail, range checks") {
    fixtures::Fixture fx = fixtures::mini4k();

    // grow mem_size past file_size to model a zero tail
    std::vector<uint8_t> elf = fx.elf;
    size_t memsz_off = 64 + 40; // p_memsz field
    elf[memsz_off] = 0x00;
    elf[memsz_off + 1] = 0x20; // mem_size = 0x2000
    LoadableImage image = parse_image(elf);
    REQUIRE(image.segments.size() == 1);
    CHECK(image.segments[0].mem_size == 0x2000);

    SUBCASE("full file-backed extent equals the input slice") {
        std::vector<uint8_t> content = bytes_at(image, 0x401000, 4096);
        std::vector<uint8_t> expected(elf.begin() + 0x1000, elf.begin() + 0x2000);
        CHECK(content == expected);
    }
    SUBCASE("read straddling file_size..mem_size gets content then zeros") {
        std::vector<uint8_t> tail = bytes_at(image, 0x401000 + 4090, 16);
        for (int i = 0; i < 6; ++i) CHECK(tail[i] == elf[0x1000 + 4090 + i]);
        for (int i = 6; i < 16; ++i) CHECK(tail[i] == 0);
    }
    SUBCASE("fully zero tail") {
        std::vector<uint8_t> tail = bytes_at(image, 0x402800, 64);
        CHECK(std::all_of(tail.begin(), tail.end(), [](uint8_t b) { return b == 0; }));
    }
    SUBCASE("out of range") {
        CHECK_THROWS_AS(bytes_at(image, 0x400000, 8), OutOfRange);
        CHECK_THROWS_AS(bytes_at(image, 0x401000, 0x2001), OutOfRange);
        CHECK_THROWS_AS(bytes_at(image, 0x402fff, 2), OutOfRange);
    }
}

TEST_CASE("parse_image: round-trip and determinism over the corpus") {
    for (const auto& fx : {fixtures::corpus1(), fixtures::corpus2(), fixtures::corpus3(),
                           fixtures::run8(), fixtures::overflow()}) {
        CAPTURE(fx.name);
        LoadableImage image = parse_image(fx.elf);
        REQUIRE(image.has_executable_segment());

        for (const auto& seg : image.segments) {
            if (!seg.perms.execute) continue;
            std::vector<uint8_t> content = bytes_at(image, seg.vaddr, seg.file_size);
            std::vector<uint8_t> expected(fx.elf.begin() + seg.file_offset,
                                          fx.elf.begin() + seg.file_offset + seg.file_size);
            CHECK(content == expected);
        }

        LoadableImage again = parse_image(fx.elf);
        CHECK(again.segments.size() == image.segments.size());
        CHECK(again.entry == image.entry);
        for (size_t i = 0; i < image.segments.size(); ++i) {
            CHECK(again.segments[i].vaddr == image.segments[i].vaddr);
            CHECK(again.segments[i].bytes == image.segments[i].bytes);
        }
    }
}

TEST_CASE("parse_image: function symbols come out sorted when present") {
    fixtures::Fixture fx = fixtures::corpus1();
    LoadableImage image = parse_image(fx.elf);
    REQUIRE(image.function_symbols.size() == 24);
    CHECK(image.function_symbols.front().name == "f0");
    CHECK(image.function_symbols.front().addr == fx.labels.at("f0"));
    for (size_t i = 1; i < image.function_symbols.size(); ++i)
        CHECK(image.function_symbols[i - 1].addr < image.function_symbols[i].addr);

    // heuristic corpus carries none
    LoadableImage c2 = parse_image(fixtures::corpus2().elf);
    CHECK(c2.function_symbols.empty());
}
