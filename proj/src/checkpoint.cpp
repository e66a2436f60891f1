#include "dynrec/checkpoint.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>

#include "dynrec/errors.hpp"

namespace dynrec {

namespace {

constexpr char kMagic[8] = {'D', 'Y', 'N', 'L', 'L', 'M', '0', '1'};

void put_u32(std::ostream& os, std::uint32_t x) {
    unsigned char b[4] = {static_cast<unsigned char>(x), static_cast<unsigned char>(x >> 8),
                          static_cast<unsigned char>(x >> 16), static_cast<unsigned char>(x >> 24)};
    os.write(reinterpret_cast<const char*>(b), 4);
}

bool get_u32(std::istream& is, std::uint32_t& x) {
    unsigned char b[4];
    if (!is.read(reinterpret_cast<char*>(b), 4)) return false;
    x = std::uint32_t(b[0]) | (std::uint32_t(b[1]) << 8) | (std::uint32_t(b[2]) << 16) |
        (std::uint32_t(b[3]) << 24);
    return true;
}

void put_f64(std::ostream& os, double d) {
    std::uint64_t u;
    std::memcpy(&u, &d, 8);
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(u >> (8 * i));
    os.write(reinterpret_cast<const char*>(b), 8);
}

bool get_f64(std::istream& is, double& d) {
    unsigned char b[8];
    if (!is.read(reinterpret_cast<char*>(b), 8)) return false;
    std::uint64_t u = 0;
    for (int i = 0; i < 8; ++i) u |= std::uint64_t(b[i]) << (8 * i);
    std::memcpy(&d, &u, 8);
    return true;
}

}  // namespace

void save_arrays(const std::string& path, const std::map<std::string, Array>& arrays) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
        if (!os) throw CheckpointError("cannot open for writing: " + tmp);
        os.write(kMagic, 8);
        for (const auto& [name, arr] : arrays) {
            put_u32(os, static_cast<std::uint32_t>(name.size()));
            os.write(name.data(), static_cast<std::streamsize>(name.size()));
            put_u32(os, static_cast<std::uint32_t>(arr.shape.size()));
            for (auto d : arr.shape) put_u32(os, static_cast<std::uint32_t>(d));
            for (double x : arr.v) put_f64(os, x);
        }
        if (!os) throw CheckpointError("write failed: " + tmp);
    }
    if (std::rename(tmp.c_str(), path.c_str()) != 0)
        throw CheckpointError("rename failed: " + tmp + " -> " + path);
}

std::map<std::string, Array> load_arrays(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw CheckpointError("cannot open: " + path);
    char magic[8];
    if (!is.read(magic, 8) || std::memcmp(magic, kMagic, 8) != 0)
        throw CheckpointError("bad magic in " + path);
    std::map<std::string, Array> out;
    for (;;) {
        std::uint32_t name_len;
        if (!get_u32(is, name_len)) break;  // clean EOF
        std::string name(name_len, '\0');
        if (!is.read(name.data(), name_len)) throw CheckpointError("truncated name in " + path);
        std::uint32_t rank;
        if (!get_u32(is, rank)) throw CheckpointError("truncated rank in " + path);
        if (rank > 8) throw CheckpointError("implausible rank in " + path);
        std::vector<std::size_t> shape(rank);
        std::size_t n = 1;
        for (auto& d : shape) {
            std::uint32_t x;
            if (!get_u32(is, x)) throw CheckpointError("truncated dims in " + path);
            d = x;
            n *= x;
        }
        Array arr = Array::zeros(shape);
        for (std::size_t i = 0; i < n; ++i)
            if (!get_f64(is, arr[i])) throw CheckpointError("truncated data in " + path + " for " + name);
        out[name] = std::move(arr);
    }
    return out;
}

}  // namespace dynrec
