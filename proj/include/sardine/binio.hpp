#pragma once

#include <cstdint>
#include <cstring>
#include <string>
#include <vector>

#include "sardine/errors.hpp"

namespace sardine {

// CRC-32 (IEEE 802.3, reflected polynomial 0xEDB88320).
std::uint32_t crc32(const unsigned char* data, std::size_t len,
                    std::uint32_t crc = 0);

// Little-endian buffer builder for the native file formats.
struct ByteWriter {
    std::vector<unsigned char> buf;

    void bytes(const void* p, std::size_t len) {
        const auto* b = static_cast<const unsigned char*>(p);
        buf.insert(buf.end(), b, b + len);
    }
    void u8(std::uint8_t v) { buf.push_back(v); }
    void u16(std::uint16_t v) {
        buf.push_back(static_cast<unsigned char>(v & 0xFF));
        buf.push_back(static_cast<unsigned char>(v >> 8));
    }
    void u32(std::uint32_t v) {
        for (int i = 0; i < 4; ++i) buf.push_back(static_cast<unsigned char>(v >> (8 * i)));
    }
    void f32(float v) {
        std::uint32_t bits;
        std::memcpy(&bits, &v, 4);
        u32(bits);
    }
};

// Bounds-checked little-endian reader; truncation is a FormatError.
struct ByteReader {
    const unsigned char* p = nullptr;
    std::size_t len = 0;
    std::size_t pos = 0;

    ByteReader(const unsigned char* data, std::size_t n) : p(data), len(n) {}

    void need(std::size_t n) const {
        if (pos + n > len) throw FormatError("truncated file");
    }
    void bytes(void* out, std::size_t n) {
        need(n);
        std::memcpy(out, p + pos, n);
        pos += n;
    }
    std::uint8_t u8() {
        need(1);
        return p[pos++];
    }
    std::uint16_t u16() {
        need(2);
        std::uint16_t v = static_cast<std::uint16_t>(p[pos]) |
                          static_cast<std::uint16_t>(p[pos + 1]) << 8;
        pos += 2;
        return v;
    }
    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(p[pos + i]) << (8 * i);
        pos += 4;
        return v;
    }
    float f32() {
        std::uint32_t bits = u32();
        float v;
        std::memcpy(&v, &bits, 4);
        return v;
    }
    std::size_t remaining() const { return len - pos; }
};

// Appends a CRC-32 of the buffer and writes it to disk.
void write_file_with_crc(const std::string& path, ByteWriter&& w);

// Reads a whole file, verifies the trailing CRC-32, and returns the
// payload without it.
std::vector<unsigned char> read_file_checked(const std::string& path);

// Plain whole-file helpers (no CRC), used for text sidecars and reports.
void write_text_file(const std::string& path, const std::string& text);
std::string read_text_file(const std::string& path);

} // namespace sardine
