#include "kd/tensor_io.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <vector>

#include "kd/errors.hpp"

namespace kd {

namespace {

void put_u32_le(std::ostream& os, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                          static_cast<unsigned char>((v >> 8) & 0xff),
                          static_cast<unsigned char>((v >> 16) & 0xff),
                          static_cast<unsigned char>((v >> 24) & 0xff)};
    os.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t get_u32_le(std::istream& is, const std::string& path) {
    unsigned char b[4];
    if (!is.read(reinterpret_cast<char*>(b), 4)) {
        throw IoError("truncated ADT1 header in " + path);
    }
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

} // namespace

void write_adt1(const Tensor<float>& t, const std::string& path) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw IoError("cannot open " + path + " for writing");
    os.write("ADT1", 4);
    put_u32_le(os, 1u);
    put_u32_le(os, static_cast<std::uint32_t>(t.channels()));
    put_u32_le(os, static_cast<std::uint32_t>(t.width()));
    put_u32_le(os, static_cast<std::uint32_t>(t.height()));
    for (std::size_t i = 0; i < t.size(); ++i) {
        std::uint32_t bits;
        const float v = t[i];
        std::memcpy(&bits, &v, 4);
        put_u32_le(os, bits);
    }
    if (!os) throw IoError("write failed for " + path);
}

Tensor<float> read_adt1(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open " + path);
    char magic[4];
    if (!is.read(magic, 4) || std::memcmp(magic, "ADT1", 4) != 0) {
        throw IoError("bad ADT1 magic in " + path);
    }
    const std::uint32_t version = get_u32_le(is, path);
    if (version != 1) {
        throw IoError("unsupported ADT1 version " + std::to_string(version) + " in " + path);
    }
    const std::uint32_t c = get_u32_le(is, path);
    const std::uint32_t w = get_u32_le(is, path);
    const std::uint32_t h = get_u32_le(is, path);
    const std::size_t n = static_cast<std::size_t>(c) * w * h;
    std::vector<float> values(n);
    for (std::size_t i = 0; i < n; ++i) {
        const std::uint32_t bits = get_u32_le(is, path);
        std::memcpy(&values[i], &bits, 4);
    }
    return Tensor<float>(c, w, h, std::move(values));
}

} // namespace kd
