#include "mrgen/atlas.hpp"

#include "mrgen/errors.hpp"

#include <zlib.h>

namespace mrgen {

namespace {

void put_u32(std::string& out, std::uint32_t v) {
    for (int shift = 24; shift >= 0; shift -= 8) out.push_back(static_cast<char>((v >> shift) & 0xff));
}

void chunk(std::string& out, const char* type, const std::string& data) {
    put_u32(out, static_cast<std::uint32_t>(data.size()));
    const std::string body = std::string(type, 4) + data;
    out += body;
    put_u32(out, static_cast<std::uint32_t>(
                     crc32(0, reinterpret_cast<const Bytef*>(body.data()), static_cast<uInt>(body.size()))));
}

} // namespace

std::string encode_png(std::size_t width, std::size_t height, const std::vector<std::uint8_t>& pixels) {
    if (width == 0 || height == 0) throw ValidationError("empty image");
    if (pixels.size() != width * height) throw DimensionError("pixel buffer does not match the image size");

    std::string raw;
    raw.reserve((width + 1) * height);
    for (std::size_t y = 0; y < height; ++y) {
        raw.push_back('\0');
        raw.append(reinterpret_cast<const char*>(pixels.data() + y * width), width);
    }
    uLongf packed_size = compressBound(static_cast<uLong>(raw.size()));
    std::string packed(packed_size, '\0');
    if (compress2(reinterpret_cast<Bytef*>(packed.data()), &packed_size, reinterpret_cast<const Bytef*>(raw.data()),
                  static_cast<uLong>(raw.size()), 9) != Z_OK) {
        throw Error("zlib compression failed");
    }
    packed.resize(packed_size);

    std::string header;
    put_u32(header, static_cast<std::uint32_t>(width));
    put_u32(header, static_cast<std::uint32_t>(height));
    header += std::string("\x08\x00\x00\x00\x00", 5); // 8-bit grayscale, no interlace

    std::string out("\x89PNG\r\n\x1a\n", 8);
    chunk(out, "IHDR", header);
    chunk(out, "IDAT", packed);
    chunk(out, "IEND", {});
    return out;
}

std::string render_matrix(const AdjacencyMatrix& a, std::size_t scale) {
    if (scale < 1) throw ValidationError("scale must be at least 1");
    const auto side = a.size() * scale;
    std::vector<std::uint8_t> pixels(side * side);
    for (std::size_t y = 0; y < side; ++y)
        for (std::size_t x = 0; x < side; ++x) pixels[y * side + x] = a(y / scale, x / scale) ? 0 : 255;
    return encode_png(side, side, pixels);
}

} // namespace mrgen
