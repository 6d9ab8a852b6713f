#pragma once

// GridFile wire format, all fields little-endian:
//
//   offset  size  field
//   0       4     magic "TGRD"
//   4       4     version (u32) = 1
//   8       4     H (u32)
//   12      4     W (u32)
//   16      4     d (u32)
//   20      4*HWd payload, IEEE-754 binary32, row-major (row, col, channel)

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <span>
#include <string>
#include <vector>

#include "cubist/error.hpp"
#include "cubist/grid.hpp"

namespace cubist {

inline constexpr char grid_file_magic[4] = {'T', 'G', 'R', 'D'};
inline constexpr std::uint32_t grid_file_version = 1;
inline constexpr std::size_t grid_file_header_bytes = 20;

namespace detail {

inline void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v)
{
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

inline std::uint32_t get_u32(std::span<const std::uint8_t> in, std::size_t offset)
{
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= std::uint32_t{in[offset + i]} << (8 * i);
    return v;
}

} // namespace detail

inline std::vector<std::uint8_t> write_grid(const TokenGrid& grid)
{
    std::vector<std::uint8_t> out;
    out.reserve(grid_file_header_bytes + 4 * grid.data().size());
    out.insert(out.end(), std::begin(grid_file_magic), std::end(grid_file_magic));
    detail::put_u32(out, grid_file_version);
    detail::put_u32(out, static_cast<std::uint32_t>(grid.height()));
    detail::put_u32(out, static_cast<std::uint32_t>(grid.width()));
    detail::put_u32(out, static_cast<std::uint32_t>(grid.dim()));
    for (float v : grid.data()) detail::put_u32(out, std::bit_cast<std::uint32_t>(v));
    return out;
}

inline TokenGrid read_grid(std::span<const std::uint8_t> bytes)
{
    if (bytes.size() < grid_file_header_bytes) {
        throw malformed_file_error("grid file shorter than its 20-byte header");
    }
    if (std::memcmp(bytes.data(), grid_file_magic, 4) != 0) {
        throw malformed_file_error("bad magic: expected \"TGRD\"");
    }
    const auto version = detail::get_u32(bytes, 4);
    if (version != grid_file_version) {
        throw malformed_file_error("unsupported grid file version " + std::to_string(version));
    }
    const std::uint64_t h = detail::get_u32(bytes, 8);
    const std::uint64_t w = detail::get_u32(bytes, 12);
    const std::uint64_t d = detail::get_u32(bytes, 16);
    if (h == 0 || w == 0 || d == 0) {
        throw malformed_file_error("grid file declares a zero dimension");
    }
    const std::uint64_t expected = grid_file_header_bytes + 4 * h * w * d;
    if (bytes.size() != expected) {
        throw malformed_file_error("grid file length " + std::to_string(bytes.size()) +
                                   " does not match header (expected " +
                                   std::to_string(expected) + ")");
    }
    std::vector<float> data(h * w * d);
    for (std::size_t i = 0; i < data.size(); ++i) {
        data[i] = std::bit_cast<float>(detail::get_u32(bytes, grid_file_header_bytes + 4 * i));
        if (!std::isfinite(data[i])) {
            throw malformed_file_error("non-finite value at payload index " + std::to_string(i));
        }
    }
    return TokenGrid(h, w, d, std::move(data));
}

inline TokenGrid load_grid(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw malformed_file_error("cannot open " + path);
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                    std::istreambuf_iterator<char>());
    return read_grid(bytes);
}

inline void save_grid(const TokenGrid& grid, const std::string& path)
{
    const auto bytes = write_grid(grid);
    std::ofstream out(path, std::ios::binary);
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    if (!out) throw malformed_file_error("cannot write " + path);
}

} // namespace cubist
