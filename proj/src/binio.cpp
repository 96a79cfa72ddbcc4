#include "sardine/binio.hpp"

#include <array>
#include <cstdio>
#include <fstream>

namespace sardine {

namespace {

std::array<std::uint32_t, 256> make_crc_table() {
    std::array<std::uint32_t, 256> table{};
    for (std::uint32_t i = 0; i < 256; ++i) {
        std::uint32_t c = i;
        for (int k = 0; k < 8; ++k) {
            c = (c & 1) ? 0xEDB88320u ^ (c >> 1) : c >> 1;
        }
        table[i] = c;
    }
    return table;
}

} // namespace

std::uint32_t crc32(const unsigned char* data, std::size_t len, std::uint32_t crc) {
    static const auto table = make_crc_table();
    crc ^= 0xFFFFFFFFu;
    for (std::size_t i = 0; i < len; ++i) {
        crc = table[(crc ^ data[i]) & 0xFF] ^ (crc >> 8);
    }
    return crc ^ 0xFFFFFFFFu;
}

void write_file_with_crc(const std::string& path, ByteWriter&& w) {
    const std::uint32_t crc = crc32(w.buf.data(), w.buf.size());
    w.u32(crc);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError("cannot open for writing: " + path);
    out.write(reinterpret_cast<const char*>(w.buf.data()),
              static_cast<std::streamsize>(w.buf.size()));
    if (!out) throw FormatError("write failed: " + path);
}

std::vector<unsigned char> read_file_checked(const std::string& path) {
    std::ifstream in(path, std::ios::binary | std::ios::ate);
    if (!in) throw FormatError("cannot open: " + path);
    const auto size = static_cast<std::size_t>(in.tellg());
    if (size < 4) throw FormatError("truncated file: " + path);
    std::vector<unsigned char> buf(size);
    in.seekg(0);
    in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(size));
    if (!in) throw FormatError("read failed: " + path);

    const std::size_t body = size - 4;
    std::uint32_t stored = 0;
    for (int i = 0; i < 4; ++i) stored |= static_cast<std::uint32_t>(buf[body + i]) << (8 * i);
    if (crc32(buf.data(), body) != stored) {
        throw FormatError("CRC mismatch: " + path);
    }
    buf.resize(body);
    return buf;
}

void write_text_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError("cannot open for writing: " + path);
    out << text;
    if (!out) throw FormatError("write failed: " + path);
}

std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary | std::ios::ate);
    if (!in) throw FormatError("cannot open: " + path);
    const auto size = static_cast<std::size_t>(in.tellg());
    std::string text(size, '\0');
    in.seekg(0);
    in.read(text.data(), static_cast<std::streamsize>(size));
    if (!in) throw FormatError("read failed: " + path);
    return text;
}

} // namespace sardine
